#include <cstdio>
#include <vector>
// key: vending-change
int main() {
    int k, x;
    if (scanf("%d %d", &k, &x) != 2) return 0;
    std::vector<int> c(k);
    for (int &v : c) scanf("%d", &v);
    const int INF = 1 << 30;
    std::vector<int> best(x + 1, INF);
    best[0] = 0;
    for (int a = 1; a <= x; ++a) {
        for (int v : c) {
            if (v <= a && best[a - v] + 1 < best[a]) best[a] = best[a - v] + 1;
        }
    }
    printf("%d\n", best[x] >= INF ? -1 : best[x]);
}
