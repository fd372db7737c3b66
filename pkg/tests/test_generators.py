import random

from poarewrite.freeness import satisfies_all
from poarewrite.generators import (
    random_amalgamation_instance,
    random_extension_instance,
    random_morphism,
    random_poa,
    random_rules,
    random_sentence,
    random_signature,
)
from poarewrite.core import check_sentence
from poarewrite.models import check_homomorphism, monotonicity_violation


def test_same_seed_same_instances():
    a = random.Random(7)
    b = random.Random(7)
    for _ in range(20):
        sa, sb = random_signature(a), random_signature(b)
        assert sa == sb
        assert [str(r) for r in random_rules(a, sa)] == [str(r) for r in random_rules(b, sb)]


def test_signatures_have_a_system_sort(rng):
    for _ in range(50):
        assert random_signature(rng, 2, 2, 2).system_sorts


def test_random_poa_is_valid(rng):
    for _ in range(50):
        sig = random_signature(rng, 2, 2, 2)
        A = random_poa(rng, sig)
        assert A.is_poa and monotonicity_violation(A) is None


def test_random_sentences_are_well_formed(rng):
    for _ in range(100):
        sig = random_signature(rng, 2, 2, 2)
        check_sentence(sig, random_sentence(rng, sig, 3))


def test_random_morphisms_translate(rng):
    for _ in range(50):
        sig = random_signature(rng, 2, 2, 2)
        phi = random_morphism(rng, sig)
        assert set(phi.sort_map) == set(sig.sorts)
        assert all(phi.op_of(op) in phi.target for op in sig.ops)


def test_extension_instances_meet_preconditions(rng):
    for _ in range(60):
        inst = random_extension_instance(rng)
        assert check_homomorphism(inst.h, inst.B, inst.A.without_preorders())
        assert satisfies_all(inst.A, inst.gamma)


def test_amalgamation_instances_commute(rng):
    for _ in range(40):
        inst = random_amalgamation_instance(rng)
        assert inst.square.commutes()
        assert inst.Bp.signature == inst.square.apex
