#include <cstdio>
#include <cstdlib>
#include <random>
int main(int argc, char **argv) {
    std::mt19937 rng(argc > 1 ? atoi(argv[1]) : 1);
    int n = rng() % 6 + 1, k = rng() % 30 + 1;
    printf("%d %d\n", n, k);
    for (int i = 0; i < n; ++i) printf("%d%c", (int)(rng() % 100 + 1), i + 1 == n ? '\n' : ' ');
}
