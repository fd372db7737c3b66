import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from poarewrite.cli import run
from poarewrite.surface import bundled

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def M(name):
    return bundled(name)


def D(name):
    return str(DATA / name)


CASES = {
    "reduce-nat": ["reduce", M("nat.mod"), "s 0 < s s 0"],
    "search-bubble": ["search", M("bubble.mod"), "3 1 2", "--terminal"],
    "search-goal": ["search", M("bubble.mod"), "3 2 1", "--goal", "1 L:List{Nat}"],
    "step-bubble": ["step", M("bubble.mod"), "3 2 1"],
    "coherence-beta": ["check-coherence", M("beta-fail.mod"), "--size", "8", "--depth", "6"],
    "coherence-plus": ["check-coherence", M("bubble-plus.mod"), "--size", "5", "--depth", "4"],
    "protection-bubble": ["check-protection", M("bubble.mod")],
    "protection-junk": ["check-protection", D("junk.mod"), "--size", "3"],
    "protection-confusion": ["check-protection", D("confusion.mod")],
    "free-preorder-z4": ["free-preorder", D("z4.alg"), M("solutions.mod")],
    "satisfies-true": ["satisfies", D("z4p.alg"), "forall x:s . f(x) => x"],
    "satisfies-false": ["satisfies", D("z4p.alg"), "forall x:s . x => f(f(x)) /\\ f(x) = x"],
    "pushout": ["pushout", D("double.mod"), D("triple.mod"), "--name", "SUM"],
    "amalgamate": ["amalgamate", D("span.mor"), D("double.alg"), D("triple.alg"), "--load", D("double.mod"), "--load", D("triple.mod")],
    "amalgamate-bad": ["amalgamate", D("span.mor"), D("double.alg"), D("triple-bad.alg"), "--load", D("double.mod"), "--load", D("triple.mod")],
    "parse-error": ["reduce", M("nat.mod"), "s 0 <"],
    "missing-file": ["reduce", D("nope.mod"), "0"],
}

EXIT = {
    "coherence-beta": 1,
    "protection-junk": 1,
    "protection-confusion": 1,
    "satisfies-false": 1,
    "amalgamate-bad": 1,
    "parse-error": 2,
    "missing-file": 2,
}


def leaves(x):
    if isinstance(x, dict):
        for k, v in x.items():
            if k not in ("command", "exit"):
                yield from leaves(v)
    elif isinstance(x, list):
        for v in x:
            yield from leaves(v)
    elif isinstance(x, bool):
        yield str(x).lower()
    else:
        yield str(x)


@pytest.mark.parametrize("case", sorted(CASES))
def test_exit_codes_and_parity(case):
    code_t, text = run(CASES[case])
    code_j, js = run(CASES[case] + ["--format", "json"])
    assert code_t == code_j == EXIT.get(case, 0)
    res = json.loads(js)
    assert res["exit"] == code_j
    for leaf in leaves(res):
        assert leaf.strip() in text, f"{leaf!r} missing from text output"


@pytest.mark.parametrize("case", sorted(k for k in CASES if k not in ("missing-file",)))
def test_golden(case):
    _, js = run(CASES[case] + ["--format", "json"])
    got = json.loads(js)
    path = GOLDEN / f"{case}.json"
    if os.environ.get("POAREWRITE_REGEN"):
        path.write_text(json.dumps(got, indent=2, sort_keys=True) + "\n")
    assert got == json.loads(path.read_text())


def test_search_text_shape():
    code, out = run(CASES["search-bubble"])
    lines = out.splitlines()
    assert code == 0
    assert "solution 1: 1 2 3 (depth 2)" in lines
    assert "  3 1 2 --[rl1@1, {m := 3, n := 1}]--> 1 3 2" in lines
    assert "  1 3 2 --[rl1@2, {m := 3, n := 2}]--> 1 2 3" in lines


def test_reduce_prints_bare_result():
    assert run(CASES["reduce-nat"]) == (0, "true")


def test_budget_exit_code(tmp_path):
    p = tmp_path / "loop.mod"
    p.write_text("mod LOOP is\n  sort S .\n  op a : -> S .\n  op f : S -> S .\n  eq a = f(a) .\nendm\n")
    code, out = run(["reduce", str(p), "a", "--max-steps", "30"])
    assert code == 3 and out.startswith("budget error")


def test_incomplete_search_exit_code():
    code, out = run(["search", M("bubble.mod"), "3 2 1", "--terminal", "--depth", "1"])
    assert code == 3
    assert "complete: false" in out


def test_usage_error():
    assert run(["frobnicate"])[0] == 2
    assert run(["search", M("bubble.mod")])[0] == 2


def test_console_script():
    out = subprocess.run(
        [sys.executable, "-m", "poarewrite.cli", "reduce", M("nat.mod"), "s 0 < s s 0"],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0 and out.stdout.strip() == "true"
