#!/usr/bin/env python3
"""Builds the scripted-model fixtures in fixtures/ from corpus/ and
fixtures/generators/."""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
OUT = ROOT / "fixtures"

WRONG_ZERO = "#include <cstdio>\nint main() { printf(\"0\\n\"); }"
WRONG_ONE = "#include <cstdio>\nint main() { printf(\"1\\n\"); }"
SPIN = "int main() { volatile unsigned long long x = 0; for (;;) ++x; }"
GREEDY_CHANGE = """#include <algorithm>
#include <cstdio>
#include <vector>
int main() {
    int k, x;
    scanf("%d %d", &k, &x);
    std::vector<int> c(k);
    for (int &v : c) scanf("%d", &v);
    std::sort(c.rbegin(), c.rend());
    int used = 0;
    for (int v : c) { used += x / v; x %= v; }
    printf("%d\\n", x == 0 ? used : -1);
}"""


def reference(pid):
    code = (CORPUS / pid / "solution.cpp").read_text()
    return "\n".join(l for l in code.splitlines() if not l.startswith("// key:"))


def title(pid):
    return json.loads((CORPUS / pid / "meta.json").read_text())["title"]


def answer(code, note="Here is my solution."):
    return f"{note}\n\n```C++\n{code}\n```\n"


def rule(name, responses, all=(), regex=None):
    r = {"name": name, "all": list(all), "responses": responses}
    if regex:
        r["regex"] = regex
    return r


def judge_rule():
    return rule("self-judge", ["The solution handles every shown case.\nScore: 1/1"], all=["You are a judge."])


def synth_rules():
    rules = []
    for gen in sorted((OUT / "generators").glob("*.cpp")):
        pid = gen.stem
        rules.append(rule(f"generator {pid}", [answer(gen.read_text().rstrip(), "Generator below.")],
                          all=["[BEGIN STANDARD SOLUTION]", f"[BEGIN PROBLEM]\n# {title(pid)}\n"]))
    return rules


def demo():
    first = {
        "toll-road": reference("toll-road"),
        "lantern-parade": reference("lantern-parade"),
        "orchard-walk": WRONG_ZERO,
        "signal-relay": WRONG_ONE,
        "vending-change": GREEDY_CHANGE,
        "ribbon-workshop": SPIN,
    }
    later = dict(first, **{"orchard-walk": reference("orchard-walk")})
    rules = [judge_rule()] + synth_rules()
    for pid, code in later.items():
        rules.append(rule(f"reflect {pid}", [answer(code, "I see the mistake now.")],
                          regex=f"solving:\\n+# {title(pid)}\\n"))
    for pid, code in first.items():
        rules.append(rule(f"solve {pid}", [answer(code)], all=[f"[BEGIN PROBLEM]\n# {title(pid)}\n"]))
    return {"model": "scripted-demo", "rules": rules, "default": "I cannot help with that."}


def ablation():
    rules = []
    for d in sorted(p for p in CORPUS.iterdir() if p.is_dir()):
        rules.append(rule(f"keyed {d.name}", [answer(reference(d.name), "Adapting the similar solution.")],
                          all=[f"[BEGIN PROBLEM]\n# {title(d.name)}\n", "// key:"]))
    return {"model": "scripted-ablation", "rules": rules, "default": answer(WRONG_ZERO, "A guess.")}


def main():
    for name, fixture in (("scripted.json", demo()), ("ablation.json", ablation())):
        (OUT / name).write_text(json.dumps(fixture, indent=2) + "\n")


if __name__ == "__main__":
    main()
