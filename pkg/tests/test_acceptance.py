"""Acceptance suite: ten criteria, one PASS/FAIL line each.

Run under pytest (the lines appear in the normal output) or directly with
``python3 tests/test_acceptance.py [--seed N]``.
"""

import itertools
import json
import random
import subprocess
import sys
import time

from poarewrite.cli import run
from poarewrite.coherence import check_protection, equational_normal_forms, spot_check_computational_model
from poarewrite.core import App, Op, Rule, Signature, Sort
from poarewrite.engine import Rewriter, equal_modulo, ground_terms
from poarewrite.freeness import check_leastness, free_preorder, hom_extension_check, least_preorder_oracle
from poarewrite.generators import (
    random_algebra,
    random_amalgamation_instance,
    random_extension_instance,
    random_morphism,
    random_poa,
    random_rules,
    random_sentence,
    random_signature,
)
from poarewrite.modular import (
    HOLDS,
    HYPOTHESIS_FAILURE,
    UNEQUAL,
    SignatureMorphism,
    check_rewrite_amalgamation,
    pushout,
    translate_sentence,
)
from poarewrite.models import FiniteAlgebra, Homomorphism, check_isomorphism, reduct, satisfies
from poarewrite.surface import bundled, format_term, load_bundled, parse_document, parse_term

DEFAULT_SEED = 20240607


def report(n, ok, detail, out=None):
    line = f"CRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    if out is not None:
        with out.disabled():
            print(line)
    else:
        print(line)
    return ok


# -- the criteria ------------------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    terminals, depths = {}, {}
    for perm in itertools.permutations("123"):
        code, js = run(["search", bundled("bubble.mod"), " ".join(perm), "--terminal", "--format", "json"])
        res = json.loads(js)
        if code != 0 or not res["complete"]:
            return False, f"search from {' '.join(perm)} exited {code}"
        terminals[" ".join(perm)] = [s["term"] for s in res["solutions"]]
        depths[" ".join(perm)] = max(s["depth"] for s in res["solutions"])
    dt = time.perf_counter() - t0
    ok = all(v == ["1 2 3"] for v in terminals.values())
    deepest = max(depths, key=depths.get)
    ok = ok and deepest == "3 2 1" and depths[deepest] == 3 and dt < 1.0
    return ok, f"6 permutations, unique terminal 1 2 3, deepest {deepest} at {depths[deepest]}, {dt:.3f}s"


def criterion_2():
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "poarewrite.cli", "check-coherence", bundled("beta-fail.mod"),
         "--size", "8", "--depth", "6", "--format", "json"],
        capture_output=True,
        text=True,
    )
    dt = time.perf_counter() - t0
    res = json.loads(proc.stdout)
    mod = load_bundled("beta-fail.mod").module()
    cx = res.get("counterexample") or {}
    src_ok = bool(cx) and equal_modulo(parse_term(cx["t"], mod), parse_term("[a 0] [b 1] [c 0]", mod), mod.E0)
    tgt_ok = bool(cx) and equal_modulo(parse_term(cx["t_prime"], mod), parse_term("[a 0] [b 0] [c 0]", mod), mod.E0)
    ok = proc.returncode == 1 and src_ok and tgt_ok and dt < 5.0
    return ok, f"exit {proc.returncode}, t = {cx.get('t')}, t' = {cx.get('t_prime')}, {dt:.2f}s"


def criterion_3(seed, n=500):
    rng = random.Random(seed)
    t0 = time.perf_counter()
    agree = nontrivial = 0
    for _ in range(n):
        sig = random_signature(rng, rng.randint(1, 2), rng.randint(1, 2), rng.randint(1, 3))
        B = random_algebra(rng, sig, 3)
        G = random_rules(rng, sig, 2)
        fp = free_preorder(B, G)
        oracle = least_preorder_oracle(B, G)
        agree += oracle == fp.relation and check_leastness(B, G, fp)
        nontrivial += any(a != b for rel in fp.relation.values() for a, b in rel)
    dt = time.perf_counter() - t0
    ok = agree == n and dt < 60.0
    return ok, f"{agree}/{n} equal to the brute-force least preorder ({nontrivial} non-discrete), {dt:.2f}s"


def criterion_4(seed, n=200):
    rng = random.Random(seed + 1)
    good = 0
    kinds = {}
    for _ in range(n):
        inst = random_extension_instance(rng)
        kinds[inst.kind] = kinds.get(inst.kind, 0) + 1
        good += hom_extension_check(inst.B, inst.gamma, inst.A, inst.h)
    mix = ", ".join(f"{k} {v}" for k, v in sorted(kinds.items()))
    return good == n, f"{good}/{n} homomorphisms stay monotone on the free preorder ({mix})"


def criterion_5(seed, n=1000):
    rng = random.Random(seed + 2)
    bad = 0
    holds = 0
    for _ in range(n):
        sig = random_signature(rng, rng.randint(1, 2), rng.randint(1, 2), rng.randint(1, 2))
        phi = random_morphism(rng, sig)
        A = random_poa(rng, phi.target, 3)
        rho = random_sentence(rng, sig, 3)
        left = satisfies(A, translate_sentence(phi, rho))
        bad += left != satisfies(reduct(A, phi), rho)
        holds += left
    return bad == 0, f"{n} triples, {bad} violations ({holds} satisfied, {n - holds} not)"


def criterion_6():
    S = "s"
    a, b = Op("a", (), S), Op("b", (), S)
    sig = Signature([Sort(S, "system")], [a, b], "AB")
    tables = {a: {(): "x"}, b: {(): "y"}}
    A = FiniteAlgebra(sig, {S: ["x", "y"]}, tables, {S: {("x", "x"), ("y", "y")}})
    B = FiniteAlgebra(sig, {S: ["x", "y"]}, tables, {S: {("x", "x"), ("y", "y"), ("x", "y")}})
    h = Homomorphism({S: {"x": "x", "y": "y"}})
    msa = check_isomorphism(h, A, B, poa=False)
    poa = check_isomorphism(h, A, B, poa=True)
    return msa is True and poa is False, f"MSA mode {msa}, POA mode {poa}"


def criterion_7(bound=7):
    mod = load_bundled("bubble-plus.mod").module()
    t0 = time.perf_counter()
    rep = spot_check_computational_model(mod, bound)
    dt = time.perf_counter() - t0
    ok = rep.ok and dt < 120.0
    return ok, f"{rep.checked} start terms up to size {bound}, {len(rep.mismatches)} mismatches, {dt:.1f}s"


def criterion_8(data_dir):
    bub = check_protection(load_bundled("bubble.mod").module(), 6)
    junk_mod = parse_document((data_dir / "junk.mod").read_text()).module()
    conf_mod = parse_document((data_dir / "confusion.mod").read_text()).module()
    junk = check_protection(junk_mod, 6).sorts["Bool"]
    conf = check_protection(conf_mod, 6).sorts["Bool"]
    junk_w = format_term(junk.junk[0][0], junk_mod) if junk.junk else None
    conf_w = [sorted(format_term(x, conf_mod) for x in p) for p in conf.confusion]
    ok = bub.ok and junk_w == "odd(0)" and conf_w == [["false", "true"]]
    b = bub.sorts["Bool"]
    return ok, f"NAT/Bool clean over {b.checked} terms; junk witness {junk_w}; confusion witness {conf_w}"


def _violating_fixture():
    S = "s"
    a, b = Op("a", (), S), Op("b", (), S)
    base = Signature([Sort(S, "system")], [a, b], "BASE")
    s1 = Signature([Sort(S, "system")], [a, b], "M1")
    s2 = Signature([Sort(S, "system")], [a, b], "M2")
    sq = pushout(SignatureMorphism.inclusion(base, s1), SignatureMorphism.inclusion(base, s2), "APEX")
    Bp = FiniteAlgebra(sq.apex, {S: ["0", "1"]}, {a: {(): "0"}, b: {(): "1"}})
    return sq, Bp, [Rule("rl", App(a, ()), App(b, ()), (), "r")], []


def criterion_9(seed, need=100, max_draws=5000):
    rng = random.Random(seed + 3)
    counts = {}
    draws = nontrivial = 0
    while counts.get(HOLDS, 0) + counts.get(UNEQUAL, 0) < need and draws < max_draws:
        inst = random_amalgamation_instance(rng)
        rep = check_rewrite_amalgamation(inst.square, inst.Bp, inst.gamma1, inst.gamma2)
        st = rep.status
        counts[st] = counts.get(st, 0) + 1
        if st == HOLDS and any(a != b for rel in rep.relation.values() for a, b in rel):
            nontrivial += 1
        draws += 1
    verified = counts.get(HOLDS, 0) + counts.get(UNEQUAL, 0)
    fixture = check_rewrite_amalgamation(*_violating_fixture()).status
    ok = verified >= need and counts.get(UNEQUAL, 0) == 0 and fixture == HYPOTHESIS_FAILURE
    return ok, (
        f"{counts.get(HOLDS, 0)}/{verified} hypothesis-verified squares equal, {nontrivial} non-discrete "
        f"({counts.get(HYPOTHESIS_FAILURE, 0)} draws skipped as hypothesis-failure); fixture reported {fixture}"
    )


def criterion_10(bound=6):
    mod = load_bundled("bubble.mod").module()
    rw = Rewriter(mod)
    n = bad = 0
    for s in sorted(mod.signature.sorts):
        for t in ground_terms(mod, s, bound):
            n += 1
            ends = equational_normal_forms(mod, t)
            bad += len(ends) != 1 or ends != {rw.normalize(t)}
    return bad == 0, f"{n} ground terms up to size {bound}, {bad} with more than one normal form"


# -- pytest entry points -------------------------------------------------------------------


def _check(n, result, capsys):
    ok, detail = result
    report(n, ok, detail, capsys)
    assert ok, detail


def test_criterion_01_bubble_sort(capsys):
    _check(1, criterion_1(), capsys)


def test_criterion_02_beta_fail_cli(capsys):
    _check(2, criterion_2(), capsys)


def test_criterion_03_free_preorder_leastness(seed, capsys):
    _check(3, criterion_3(seed), capsys)


def test_criterion_04_extension_property(seed, capsys):
    _check(4, criterion_4(seed), capsys)


def test_criterion_05_satisfaction_lemma(seed, capsys):
    _check(5, criterion_5(seed), capsys)


def test_criterion_06_bijective_not_iso(capsys):
    _check(6, criterion_6(), capsys)


def test_criterion_07_hybrid_vs_interleaving(capsys):
    _check(7, criterion_7(), capsys)


def test_criterion_08_protection(data_dir, capsys):
    _check(8, criterion_8(data_dir), capsys)


def test_criterion_09_amalgamation(seed, capsys):
    _check(9, criterion_9(seed), capsys)


def test_criterion_10_confluence(capsys):
    _check(10, criterion_10(), capsys)


if __name__ == "__main__":
    import argparse
    from pathlib import Path

    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    seed = ap.parse_args().seed
    data = Path(__file__).parent / "data"
    results = [
        criterion_1(), criterion_2(), criterion_3(seed), criterion_4(seed), criterion_5(seed),
        criterion_6(), criterion_7(), criterion_8(data), criterion_9(seed), criterion_10(),
    ]
    for i, (ok, detail) in enumerate(results, 1):
        report(i, ok, detail)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
