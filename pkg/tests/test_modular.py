import random

import pytest
from hypothesis import given, settings, strategies as st

from poarewrite.core import App, Op, Rule, Signature, Sort, Trans, Var
from poarewrite.errors import AmalgamationError, PushoutError, SignatureError
from poarewrite.generators import (
    random_amalgamation_instance,
    random_morphism,
    random_poa,
    random_sentence,
    random_signature,
)
from poarewrite.modular import (
    HOLDS,
    HYPOTHESIS_FAILURE,
    SignatureMorphism,
    amalgamate_models,
    check_rewrite_amalgamation,
    format_morphism,
    parse_morphism,
    pushout,
    pushout_modules,
    translate_sentence,
    translate_term,
)
from poarewrite.models import FiniteAlgebra, reduct, satisfies
from poarewrite.surface import ModuleDatabase, format_module, parse_document, parse_module


def load(data_dir, *names):
    db = ModuleDatabase()
    docs = [parse_document((data_dir / n).read_text(), db) for n in names]
    return db, docs


def test_morphism_rank_checked():
    s, t = Sort("s"), Sort("t")
    src = Signature([s], [Op("a", (), "s")])
    dst = Signature([s, t], [Op("a", (), "t")])
    with pytest.raises(SignatureError):
        SignatureMorphism(src, dst, {}, {Op("a", (), "s"): Op("a", (), "t")})
    with pytest.raises(SignatureError):
        SignatureMorphism(src, Signature([s], []), {}, {})


def test_morphism_kind_checked():
    src = Signature([Sort("s", "system")], [])
    dst = Signature([Sort("s")], [])
    with pytest.raises(SignatureError):
        SignatureMorphism.inclusion(src, dst)
    SignatureMorphism.inclusion(src, dst, strict=False)


def test_translate_term_renames():
    s = Sort("s")
    f, g = Op("f", ("s",), "s"), Op("g", ("s",), "s")
    a = Op("a", (), "s")
    src = Signature([s], [f, a])
    dst = Signature([s], [g, a])
    phi = SignatureMorphism.from_names(src, dst, ops={"f": "g"})
    t = App(f, (App(a, ()),))
    assert translate_term(phi, t) == App(g, (App(a, ()),))


def test_pushout_of_double_and_triple(data_dir):
    db, docs = load(data_dir, "double.mod", "triple.mod")
    phi1, phi2 = docs[0].morphisms[0], docs[1].morphisms[0]
    sq, mod = pushout_modules(phi1, phi2, db.get("DOUBLE"), db.get("TRIPLE"), "SUM")
    assert sq.commutes()
    names = sorted(o.name for o in mod.signature.ops if o.sort == "Nat")
    assert names == ["0", "DOUBLE.f", "TRIPLE.f", "double", "s_", "triple"]
    assert len(mod.equations) == 3
    # the printed module reads back to the same shape
    again = parse_module(format_module(mod))
    assert sorted(o.name for o in again.signature.ops) == sorted(o.name for o in mod.signature.ops)


def test_pushout_glues_shared_symbols():
    base = Signature([Sort("s")], [Op("a", (), "s")], "BASE")
    s1 = Signature([Sort("s"), Sort("p")], [Op("a", (), "s"), Op("k", (), "p")], "M1")
    s2 = Signature([Sort("s")], [Op("a", (), "s"), Op("k", (), "s")], "M2")
    sq = pushout(SignatureMorphism.inclusion(base, s1), SignatureMorphism.inclusion(base, s2), "P")
    assert sq.commutes()
    assert sorted(sq.apex.sorts) == ["p", "s"]
    # the two k's differ in rank, so both keep their name
    assert sorted(str(o) for o in sq.apex.ops) == ["a : -> s", "k : -> p", "k : -> s"]


def test_pushout_kind_conflict():
    base = Signature([Sort("x"), Sort("y", "system")], [], "BASE")
    glue = Signature([Sort("z", "system")], [], "G")
    phi1 = SignatureMorphism(base, glue, {"x": "z", "y": "z"}, {}, strict=False)
    phi2 = SignatureMorphism.identity(base)
    with pytest.raises(PushoutError):
        pushout(phi1, phi2)


def test_morphism_text_roundtrip(data_dir):
    db, docs = load(data_dir, "double.mod", "triple.mod")
    sq, _ = pushout_modules(docs[0].morphisms[0], docs[1].morphisms[0], db.get("DOUBLE"), db.get("TRIPLE"), "SUM")
    db.register(_)
    text = format_morphism(sq.theta1)
    assert "op f |-> DOUBLE.f" in text
    assert parse_morphism(text, db) == sq.theta1


def test_amalgamation_of_models(data_dir):
    db, docs = load(data_dir, "double.mod", "triple.mod", "span.mor", "double.alg", "triple.alg", "triple-bad.alg")
    sq = pushout(*docs[2].morphisms)
    M1, M2, bad = docs[3].algebras[0], docs[4].algebras[0], docs[5].algebras[0]
    M = amalgamate_models(sq, M1, M2)
    for theta, Mi in ((sq.theta1, M1), (sq.theta2, M2)):
        back = reduct(M, theta, True)
        assert back.carriers == Mi.carriers and back.tables == Mi.tables
    assert sorted(M.carriers) == ["Nat"]
    with pytest.raises(AmalgamationError, match="s_"):
        amalgamate_models(sq, M1, bad)


def _violating_square():
    S = "s"
    a, b = Op("a", (), S), Op("b", (), S)
    base = Signature([Sort(S, "system")], [a, b], "BASE")
    s1 = Signature([Sort(S, "system")], [a, b], "M1")
    s2 = Signature([Sort(S, "system")], [a, b], "M2")
    sq = pushout(SignatureMorphism.inclusion(base, s1), SignatureMorphism.inclusion(base, s2), "APEX")
    Bp = FiniteAlgebra(sq.apex, {S: ["0", "1"]}, {a: {(): "0"}, b: {(): "1"}})
    g1 = [Rule("rl", App(a, ()), App(b, ()), (), "r")]
    return sq, Bp, g1, []


def test_hypothesis_failure_is_not_theorem_failure():
    sq, Bp, g1, g2 = _violating_square()
    rep = check_rewrite_amalgamation(sq, Bp, g1, g2)
    assert rep.status == HYPOTHESIS_FAILURE
    assert rep.witness[:3] == ("s", "0", "1")


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_amalgamation_never_unequal(seed):
    inst = random_amalgamation_instance(random.Random(seed))
    assert check_rewrite_amalgamation(inst.square, inst.Bp, inst.gamma1, inst.gamma2).status in (
        HOLDS,
        HYPOTHESIS_FAILURE,
    )


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_satisfaction_lemma(seed):
    rng = random.Random(seed)
    sig = random_signature(rng, rng.randint(1, 2), rng.randint(1, 2), rng.randint(1, 2))
    phi = random_morphism(rng, sig)
    A = random_poa(rng, phi.target, 3)
    rho = random_sentence(rng, sig, 3)
    assert satisfies(A, translate_sentence(phi, rho)) == satisfies(reduct(A, phi), rho)


def test_satisfaction_lemma_with_seed_flag(seed):
    rng = random.Random(seed)
    for _ in range(100):
        sig = random_signature(rng, 2, 2, 2)
        phi = random_morphism(rng, sig)
        A = random_poa(rng, phi.target, 3)
        rho = random_sentence(rng, sig, 3)
        assert satisfies(A, translate_sentence(phi, rho)) == satisfies(reduct(A, phi), rho)
