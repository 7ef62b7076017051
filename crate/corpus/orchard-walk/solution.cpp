#include <cstdio>
#include <vector>
// key: orchard-walk
int main() {
    const long long MOD = 1000000007LL;
    int n, m;
    if (scanf("%d %d", &n, &m) != 2) return 0;
    std::vector<long long> w(m, 0);
    static char row[1024];
    for (int i = 0; i < n; ++i) {
        scanf("%s", row);
        for (int j = 0; j < m; ++j) {
            if (row[j] == '#') { w[j] = 0; continue; }
            if (i == 0 && j == 0) { w[j] = 1; continue; }
            long long left = j > 0 ? w[j - 1] : 0;
            w[j] = (w[j] + left) % MOD;
        }
    }
    printf("%lld\n", w[m - 1]);
}
