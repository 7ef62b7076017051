#include <cstdio>
#include <cstdlib>
#include <random>
int main(int argc, char **argv) {
    std::mt19937 rng(argc > 1 ? atoi(argv[1]) : 1);
    int n = rng() % 8 + 1, m = rng() % 8 + 1;
    printf("%d %d\n", n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            bool corner = (i == 0 && j == 0) || (i == n - 1 && j == m - 1);
            putchar(!corner && rng() % 5 == 0 ? '#' : '.');
        }
        putchar('\n');
    }
}
