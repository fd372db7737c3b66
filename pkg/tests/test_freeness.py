import random

import pytest
from hypothesis import given, settings, strategies as st

from poarewrite.core import App, Eq, Op, Rule, Signature, Sort, Trans
from poarewrite.errors import PreconditionError
from poarewrite.freeness import (
    all_preorders,
    check_leastness,
    free_preorder,
    gamma_step,
    hom_extension_check,
    hom_extension_violation,
    least_preorder_oracle,
    preorder_models,
    satisfies_all,
)
from poarewrite.generators import random_algebra, random_extension_instance, random_rules, random_signature
from poarewrite.models import FiniteAlgebra, Homomorphism, identity_hom, monotonicity_violation
from poarewrite.surface import parse_document


def z4(data_dir):
    doc = parse_document((data_dir / "z4p.alg").read_text())
    return doc.algebras[0], list(doc.modules[0].transitions)


def test_z4_free_preorder(data_dir):
    A, G = z4(data_dir)
    B = A.without_preorders()
    fp = free_preorder(B, G)
    diag = {(x, x) for x in "0123"}
    assert fp.relation == {"s": frozenset(diag | {("0", "2"), ("2", "0"), ("1", "3"), ("3", "1")})}
    assert fp.stage == 1
    assert fp.trace.stages[0] == {"s": frozenset(diag)}
    assert fp.algebra(B) == A


def test_z4_gamma_step(data_dir):
    A, G = z4(data_dir)
    step = gamma_step(A.without_preorders(), G, {"s": set()})
    assert step == {"s": frozenset({("0", "2"), ("2", "0"), ("1", "3"), ("3", "1")})}


def test_conditional_rule_needs_a_second_stage():
    S = "S"
    ops = [Op(n, (), S) for n in "abcd"]
    sig = Signature([Sort(S, "system")], ops, "ABCD")
    a, b, c, d = (App(o, ()) for o in ops)
    B = FiniteAlgebra(sig, {S: list("abcd")}, {o: {(): o.name} for o in ops})
    G = [Rule("rl", a, b, (), "r1"), Rule("rl", c, d, (Trans(a, b),), "r2")]
    fp = free_preorder(B, G)
    assert fp.stage == 2
    assert fp.relation[S] - {(x, x) for x in "abcd"} == {("a", "b"), ("c", "d")}
    # an equation condition that fails in B blocks the rule
    fp2 = free_preorder(B, [Rule("rl", c, d, (Eq(a, b),), "r3")])
    assert fp2.relation[S] == {(x, x) for x in "abcd"}


def test_transitive_and_monotone_closure():
    S = "S"
    f = Op("f", (S,), S)
    k = [Op(n, (), S) for n in "xyz"]
    sig = Signature([Sort(S, "system")], [f, *k], "F")
    tab = {f: {("x",): "y", ("y",): "z", ("z",): "z"}}
    tab.update({o: {(): o.name} for o in k})
    B = FiniteAlgebra(sig, {S: list("xyz")}, tab)
    x, y = App(k[0], ()), App(k[1], ())
    fp = free_preorder(B, [Rule("rl", x, y, (), "r")])
    # x <= y, f x = y <= z = f y, then x <= z by transitivity
    assert fp.relation[S] >= {("x", "y"), ("y", "z"), ("x", "z")}
    assert monotonicity_violation(fp.algebra(B)) is None


def test_free_preorder_rejects_poa(data_dir):
    A, G = z4(data_dir)
    with pytest.raises(PreconditionError):
        free_preorder(A, G)


def test_oracle_limits(data_dir):
    A, G = z4(data_dir)
    with pytest.raises(PreconditionError):
        preorder_models(A.without_preorders(), G, max_carrier=3)


def test_all_preorders_counts():
    # number of preorders on n labelled points
    assert [len(all_preorders(n)) for n in range(4)] == [1, 1, 4, 29]


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_free_preorder_is_least_model(seed):
    rng = random.Random(seed)
    sig = random_signature(rng, rng.randint(1, 2), rng.randint(1, 2), rng.randint(1, 3))
    B = random_algebra(rng, sig, 3)
    G = random_rules(rng, sig, 2)
    fp = free_preorder(B, G)
    assert satisfies_all(fp.algebra(B), G)
    assert check_leastness(B, G, fp)
    assert least_preorder_oracle(B, G) == fp.relation


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_extension_property(seed):
    inst = random_extension_instance(random.Random(seed))
    assert hom_extension_check(inst.B, inst.gamma, inst.A, inst.h)


def test_extension_preconditions(data_dir):
    A, G = z4(data_dir)
    B = A.without_preorders()
    with pytest.raises(PreconditionError):
        hom_extension_check(B, G, B, identity_hom(B))  # target without preorder
    discrete = B.with_preorders({"s": {(x, x) for x in "0123"}})
    with pytest.raises(PreconditionError):
        hom_extension_check(B, G, discrete, identity_hom(B))  # target fails the rule
    assert hom_extension_violation(B, G, A, identity_hom(B)) is None
    bad = Homomorphism({"s": {"0": "1", "1": "0", "2": "2", "3": "3"}})
    with pytest.raises(PreconditionError):
        hom_extension_check(B, G, A, bad)
