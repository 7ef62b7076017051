#include <cstdio>
#include <cstdlib>
#include <random>
int main(int argc, char **argv) {
    std::mt19937 rng(argc > 1 ? atoi(argv[1]) : 1);
    int n = rng() % 50 + 1, q = rng() % 50 + 1;
    printf("%d %d\n", n, q);
    for (int i = 0; i < n; ++i) printf("%d%c", (int)(rng() % 1000001), i + 1 == n ? '\n' : ' ');
    for (int i = 0; i < q; ++i) {
        int l = rng() % n + 1;
        int r = l + rng() % (n - l + 1);
        printf("%d %d\n", l, r);
    }
}
