#include <cstdio>
#include <vector>
// key: toll-road
int main() {
    int n, q;
    if (scanf("%d %d", &n, &q) != 2) return 0;
    std::vector<long long> s(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        long long a;
        scanf("%lld", &a);
        s[i] = s[i - 1] + a;
    }
    while (q--) {
        int l, r;
        scanf("%d %d", &l, &r);
        printf("%lld\n", s[r] - s[l - 1]);
    }
}
