#include <cstdio>
#include <vector>
// key: ribbon-workshop
int main() {
    int n;
    long long k;
    if (scanf("%d %lld", &n, &k) != 2) return 0;
    std::vector<long long> a(n);
    long long hi = 0;
    for (auto &v : a) {
        scanf("%lld", &v);
        if (v > hi) hi = v;
    }
    long long lo = 0;
    while (lo < hi) {
        long long mid = lo + (hi - lo + 1) / 2;
        long long pieces = 0;
        for (long long v : a) pieces += v / mid;
        if (pieces >= k) lo = mid; else hi = mid - 1;
    }
    printf("%lld\n", lo);
}
