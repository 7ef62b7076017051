#include <iostream>
#include <string>
// key: lantern-parade
int main() {
    std::ios::sync_with_stdio(false);
    int t;
    std::cin >> t;
    while (t--) {
        std::string s, st;
        std::cin >> s;
        bool ok = true;
        for (char c : s) {
            if (c == '(' || c == '[') {
                st.push_back(c);
            } else {
                char want = c == ')' ? '(' : '[';
                if (st.empty() || st.back() != want) { ok = false; break; }
                st.pop_back();
            }
        }
        std::cout << (ok && st.empty() ? "YES" : "NO") << '\n';
    }
}
