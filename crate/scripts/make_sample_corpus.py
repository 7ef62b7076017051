#!/usr/bin/env python3
"""Regenerates corpus/ from the problem definitions below.

Inputs come from seeded generators; expected outputs come from compiling and
running each reference solution with g++.
"""

import json
import random
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "corpus"
LIMITS = "Time limit: 1 second\nMemory limit: 256 megabytes\n"

PROBLEMS = []


def problem(pid, title, venue, category, statement, editorial, solution, sample, gen):
    PROBLEMS.append(dict(pid=pid, title=title, venue=venue, category=category, statement=statement,
                         editorial=editorial, solution=solution, sample=sample, gen=gen))


# --- toll-road -------------------------------------------------------------

def gen_toll(rng, big):
    n = rng.randint(1, 2000 if big else 8)
    q = rng.randint(1, 2000 if big else 5)
    a = [rng.randint(0, 10**6) for _ in range(n)]
    lines = [f"{n} {q}", " ".join(map(str, a))]
    for _ in range(q):
        l = rng.randint(1, n)
        r = rng.randint(l, n)
        lines.append(f"{l} {r}")
    return "\n".join(lines) + "\n"


problem(
    "toll-road", "Toll Road Receipts", "Lakeside Regional", "regional",
    "# Toll Road Receipts\n\n" + LIMITS + """
A highway has n toll booths numbered 1 to n. Booth i charges a_i coins.
A driver who enters before booth l and leaves after booth r pays every booth
from l to r inclusive. Answer q such trips.

## Input

The first line holds n and q (1 <= n, q <= 200000). The second line holds
a_1 .. a_n (0 <= a_i <= 10^6). Each of the next q lines holds l and r
(1 <= l <= r <= n).

## Output

For each trip print the total charge on its own line.

## Sample

Input:

```
5 3
4 1 7 0 2
1 5
2 3
4 4
```

Output:

```
14
8
0
```
""",
    """Precompute prefix sums s_i = a_1 + ... + a_i with s_0 = 0. A trip (l, r)
costs s_r - s_{l-1}. Totals reach 2 * 10^11, so use 64-bit integers. Each
query is answered in constant time after a linear pass.
""",
    """#include <cstdio>
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
        printf("%lld\\n", s[r] - s[l - 1]);
    }
}
""",
    "5 3\n4 1 7 0 2\n1 5\n2 3\n4 4\n",
    gen_toll,
)

# --- lantern-parade --------------------------------------------------------


def gen_brackets(rng, big):
    t = rng.randint(1, 20 if big else 4)
    lines = [str(t)]
    for _ in range(t):
        if rng.random() < 0.5:
            s = []
            depth = []
            for _ in range(rng.randint(1, 200 if big else 6)):
                if depth and rng.random() < 0.5:
                    s.append(depth.pop())
                else:
                    o = rng.choice("([")
                    s.append(o)
                    depth.append(")" if o == "(" else "]")
            s.extend(reversed(depth))
            lines.append("".join(s))
        else:
            lines.append("".join(rng.choice("()[]") for _ in range(rng.randint(1, 200 if big else 6))))
    return "\n".join(lines) + "\n"


problem(
    "lantern-parade", "Lantern Parade", "Northern Continental Final", "cf",
    "# Lantern Parade\n\n" + LIMITS + """
Parade lanterns come in round and square shapes, and every lantern is either
an opening or a closing half. A row of halves written as a string over the
characters `(`, `)`, `[` and `]` forms a valid parade when the halves can be
matched so that each closing half follows its opening half of the same shape
and matched pairs never cross.

## Input

The first line holds t (1 <= t <= 100). Each of the next t lines holds a
non-empty string of at most 10^5 characters.

## Output

For each string print YES if it forms a valid parade and NO otherwise.

## Sample

Input:

```
3
([])
([)]
((
```

Output:

```
YES
NO
NO
```
""",
    """Scan left to right with a stack of open halves. Push openings. On a
closing half the stack top must be the matching opening, which is then
popped. The row is valid iff no mismatch occurred and the stack ends empty.
""",
    """#include <iostream>
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
        std::cout << (ok && st.empty() ? "YES" : "NO") << '\\n';
    }
}
""",
    "3\n([])\n([)]\n((\n",
    gen_brackets,
)

# --- orchard-walk ----------------------------------------------------------


def gen_grid(rng, big):
    n = rng.randint(1, 60 if big else 4)
    m = rng.randint(1, 60 if big else 4)
    p = rng.choice([0.0, 0.1, 0.25])
    rows = []
    for i in range(n):
        rows.append("".join("#" if rng.random() < p and (i, j) not in ((0, 0), (n - 1, m - 1)) else "."
                            for j in range(m)))
    return f"{n} {m}\n" + "\n".join(rows) + "\n"


problem(
    "orchard-walk", "Orchard Walk", "Lakeside Regional", "regional",
    "# Orchard Walk\n\n" + LIMITS + """
An orchard is an n by m grid. Cell `.` is open ground and cell `#` holds a
tree. A gardener starts in the top-left cell and walks to the bottom-right
cell, each step moving one cell right or one cell down, never entering a
tree. Both corner cells are open. Count the walks modulo 1000000007.

## Input

The first line holds n and m (1 <= n, m <= 1000). Each of the next n lines
holds m characters.

## Output

Print the number of walks modulo 1000000007.

## Sample

Input:

```
3 3
...
.#.
...
```

Output:

```
2
```
""",
    """Let w[i][j] be the number of walks reaching cell (i, j). The start has one
walk, trees have zero, and every other cell sums the counts of its top and
left neighbours. Reduce modulo 10^9+7 after each addition. The table fills
in O(nm) time and one row of memory suffices.
""",
    """#include <cstdio>
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
    printf("%lld\\n", w[m - 1]);
}
""",
    "3 3\n...\n.#.\n...\n",
    gen_grid,
)

# --- signal-relay ----------------------------------------------------------


def gen_graph(rng, big):
    n = rng.randint(2, 3000 if big else 7)
    m = rng.randint(0, 6000 if big else 9)
    edges = [f"{rng.randint(1, n)} {rng.randint(1, n)}" for _ in range(m)]
    return f"{n} {m}\n" + "".join(e + "\n" for e in edges)


problem(
    "signal-relay", "Signal Relay", "Harbor World Final", "wf",
    "# Signal Relay\n\n" + LIMITS + """
A network has n relay towers and m two-way links. A message starts at tower 1
and must reach tower n. Each link use costs one hop. Find the fewest hops, or
report that tower n is unreachable.

## Input

The first line holds n and m (2 <= n <= 200000, 0 <= m <= 200000). Each of
the next m lines holds u and v (1 <= u, v <= n), a link between u and v.
Links may repeat and may join a tower to itself.

## Output

Print the fewest hops from tower 1 to tower n, or -1.

## Sample

Input:

```
4 4
1 2
2 3
3 4
1 3
```

Output:

```
2
```
""",
    """All links cost the same, so breadth-first search from tower 1 visits
towers in order of hop distance. Store adjacency lists, mark distances on
first visit, and print the distance of tower n or -1 if it was never
reached. The search runs in O(n + m).
""",
    """#include <cstdio>
#include <queue>
#include <vector>
// key: signal-relay
int main() {
    int n, m;
    if (scanf("%d %d", &n, &m) != 2) return 0;
    std::vector<std::vector<int>> adj(n + 1);
    for (int i = 0; i < m; ++i) {
        int u, v;
        scanf("%d %d", &u, &v);
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<int> dist(n + 1, -1);
    std::queue<int> q;
    dist[1] = 0;
    q.push(1);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : adj[u]) {
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
    }
    printf("%d\\n", dist[n]);
}
""",
    "4 4\n1 2\n2 3\n3 4\n1 3\n",
    gen_graph,
)

# --- vending-change --------------------------------------------------------


def gen_coins(rng, big):
    k = rng.randint(1, 30 if big else 4)
    coins = sorted({rng.randint(1, 500 if big else 12) for _ in range(k)})
    x = rng.randint(0, 100000 if big else 40)
    return f"{len(coins)} {x}\n" + " ".join(map(str, coins)) + "\n"


problem(
    "vending-change", "Vending Change", "Northern Continental Final", "cf",
    "# Vending Change\n\n" + LIMITS + """
A vending machine stocks an unlimited supply of k coin denominations. It must
pay out exactly x units of change using as few coins as possible.

## Input

The first line holds k and x (1 <= k <= 100, 0 <= x <= 10^6). The second
line holds the k distinct denominations, each between 1 and 10^6.

## Output

Print the fewest coins summing to exactly x, or -1 if no combination does.

## Sample

Input:

```
3 11
1 5 7
```

Output:

```
3
```
""",
    """Greedy choice fails (11 = 7 + 1 + 1 + 1 but 5 + 5 + 1 is shorter), so use
dynamic programming over amounts: best[0] = 0 and best[a] is one more than
the minimum of best[a - c] over coins c <= a. Unreachable amounts stay at
infinity. The table costs O(kx) time.
""",
    """#include <cstdio>
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
    printf("%d\\n", best[x] >= INF ? -1 : best[x]);
}
""",
    "3 11\n1 5 7\n",
    gen_coins,
)

# --- ribbon-workshop -------------------------------------------------------


def gen_ribbon(rng, big):
    n = rng.randint(1, 2000 if big else 5)
    k = rng.randint(1, 10**6 if big else 12)
    a = [rng.randint(1, 10**9 if big else 30) for _ in range(n)]
    return f"{n} {k}\n" + " ".join(map(str, a)) + "\n"


problem(
    "ribbon-workshop", "Ribbon Workshop", "Harbor World Final", "wf",
    "# Ribbon Workshop\n\n" + LIMITS + """
A workshop owns n ribbons with integer lengths a_1 .. a_n. It needs k pieces
of one common integer length L, cut from the ribbons (pieces may not be glued
and leftovers are discarded). Find the largest possible L.

## Input

The first line holds n and k (1 <= n <= 200000, 1 <= k <= 10^9). The second
line holds a_1 .. a_n (1 <= a_i <= 10^9).

## Output

Print the largest L, or 0 if not even pieces of length 1 suffice.

## Sample

Input:

```
3 5
10 7 4
```

Output:

```
3
```
""",
    """The number of pieces of length L, the sum of floor(a_i / L), never grows
as L grows. Binary search the largest L in [1, max a_i] with at least k
pieces, counting with 64-bit integers. Each check is O(n), so the search is
O(n log max a_i).
""",
    """#include <cstdio>
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
    printf("%lld\\n", lo);
}
""",
    "3 5\n10 7 4\n",
    gen_ribbon,
)


def run(binary, text):
    return subprocess.run([binary], input=text.encode(), capture_output=True, check=True, timeout=10).stdout


def main():
    if ROOT.exists():
        shutil.rmtree(ROOT)
    with tempfile.TemporaryDirectory() as tmp:
        for p in PROBLEMS:
            rng = random.Random(p["pid"])
            src = Path(tmp) / f"{p['pid']}.cpp"
            binary = Path(tmp) / p["pid"]
            src.write_text(p["solution"])
            subprocess.run(["g++", "-std=c++17", "-O2", "-w", "-o", str(binary), str(src)], check=True)
            d = ROOT / p["pid"]
            (d / "tests/unit").mkdir(parents=True)
            (d / "tests/hidden").mkdir(parents=True)
            unit = [p["sample"], p["gen"](rng, False), p["gen"](rng, False)]
            hidden = [p["gen"](rng, False) for _ in range(4)] + [p["gen"](rng, True) for _ in range(2)]
            for sub, inputs in (("unit", unit), ("hidden", hidden)):
                for i, text in enumerate(inputs, 1):
                    (d / "tests" / sub / f"{i:03}.in").write_text(text)
                    (d / "tests" / sub / f"{i:03}.ans").write_bytes(run(binary, text))
            meta = {
                "title": p["title"],
                "venue": p["venue"],
                "category": p["category"],
                "synthesized_tests": ["unit/002", "unit/003"],
            }
            (d / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
            (d / "statement.md").write_text(p["statement"])
            (d / "editorial.md").write_text(p["editorial"])
            (d / "solution.cpp").write_text(p["solution"])
            print(f"wrote {d}", file=sys.stderr)


if __name__ == "__main__":
    main()
