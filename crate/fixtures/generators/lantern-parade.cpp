#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
int main(int argc, char **argv) {
    std::mt19937 rng(argc > 1 ? atoi(argv[1]) : 1);
    int t = rng() % 5 + 1;
    printf("%d\n", t);
    const char *alpha = "()[]";
    while (t--) {
        int len = rng() % 12 + 1;
        std::string s;
        for (int i = 0; i < len; ++i) s += alpha[rng() % 4];
        printf("%s\n", s.c_str());
    }
}
