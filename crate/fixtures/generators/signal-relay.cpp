#include <cstdio>
#include <cstdlib>
#include <random>
int main(int argc, char **argv) {
    std::mt19937 rng(argc > 1 ? atoi(argv[1]) : 1);
    int n = rng() % 10 + 2, m = rng() % 15;
    printf("%d %d\n", n, m);
    for (int i = 0; i < m; ++i) printf("%d %d\n", (int)(rng() % n + 1), (int)(rng() % n + 1));
}
