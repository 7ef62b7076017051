#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>
int main(int argc, char **argv) {
    std::mt19937 rng(argc > 1 ? atoi(argv[1]) : 1);
    std::set<int> coins;
    int k = rng() % 4 + 1;
    while ((int)coins.size() < k) coins.insert(rng() % 20 + 1);
    printf("%d %d\n", k, (int)(rng() % 200));
    int i = 0;
    for (int c : coins) printf("%d%c", c, ++i == k ? '\n' : ' ');
}
