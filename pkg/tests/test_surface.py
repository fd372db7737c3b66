import pytest
from hypothesis import given, settings, strategies as st

from poarewrite.core import Eq, Forall, Implies, Trans, Var
from poarewrite.engine import equal_modulo, ground_terms
from poarewrite.errors import AmbiguousParseError, ParseError, RuleError
from poarewrite.surface import (
    ModuleDatabase,
    format_module,
    format_term,
    load_bundled,
    parse_document,
    parse_module,
    parse_sentence,
    parse_term,
    tokenize,
)


def test_tokenize():
    assert tokenize("f(x, s 0)") == ["f", "(", "x", ",", "s", "0", ")"]
    assert tokenize("[a 0] [b 1]") == ["[", "a", "0", "]", "[", "b", "1", "]"]


def test_listing_shapes(bubble, beta_fail, bubble_plus):
    assert len(bubble.equations) == 3 and len(bubble.transitions) == 1
    assert bubble.signature.system_sorts == ["List{Nat}"]
    assert len(beta_fail.equations) == 2 and len(beta_fail.transitions) == 4
    # every transition has a left-hand side of sort M
    assert beta_fail.signature.system_sorts == ["M"]
    assert len(bubble_plus.equations) == 5


def test_auto_labels(bubble):
    assert [r.label for r in bubble.transitions] == ["rl1"]
    assert [r.label for r in bubble.equations] == ["eq1", "eq2", "eq3"]


def test_numerals_and_lists(bubble):
    t = parse_term("3 1 2", bubble)
    assert t.sort == "List{Nat}"
    assert format_term(t, bubble) == "3 1 2"
    assert format_term(parse_term("s s 0", bubble), bubble) == "2"


def test_assoc_parses_are_identified(bubble):
    a = parse_term("(1 2) 3", bubble)
    b = parse_term("1 (2 3)", bubble)
    assert equal_modulo(a, b, bubble.E0)


def test_parse_errors(bubble):
    with pytest.raises(ParseError):
        parse_term("1 2 )", bubble)
    with pytest.raises(ParseError):
        parse_term("frobnicate", bubble)


def test_ambiguity_is_reported():
    db = ModuleDatabase()
    m = parse_module(
        """mod AMB is
  sort S .
  op a : -> S .
  op _+_ : S S -> S .
endm""",
        db,
    )
    with pytest.raises(AmbiguousParseError) as exc:
        parse_term("a + a + a", m)
    assert len(exc.value.candidates) == 2


def test_inline_variables(bubble):
    t = parse_term("x:Nat y:Nat", bubble)
    assert {v.name for v in t.args[0].args + t.args[1].args} == {"x", "y"}


def test_unconditional_rule_with_condition_rejected():
    with pytest.raises((RuleError, ParseError)):
        parse_module(
            """mod BAD is
  sort S .
  op a : -> S .
  rl a => a if a = a .
endm"""
        )


def test_rule_label_syntax():
    m = parse_module(
        """mod L is
  sort S .
  ops a b : -> S .
  rl [go] : a => b .
endm"""
    )
    assert m.rule("go").rhs.op.name == "b"


def test_module_roundtrip(bubble, beta_fail):
    for mod in (bubble, beta_fail):
        again = parse_module(format_module(mod))
        assert again.signature.system_sorts == mod.signature.system_sorts
        assert [(str(r.lhs), str(r.rhs)) for r in again.transitions] == [
            (str(r.lhs), str(r.rhs)) for r in mod.transitions
        ]
        assert len(again.equations) == len(mod.equations)


def test_sentences(bubble):
    rho = parse_sentence("forall l:List{Nat} . l => l", bubble)
    assert isinstance(rho, Forall) and isinstance(rho.body, Trans)
    rho = parse_sentence("forall n:Nat . 0 < s n -> n = n", bubble)
    assert isinstance(rho.body, Implies)
    assert isinstance(rho.body.conclusion, Eq)


def test_document_with_algebra(data_dir):
    doc = parse_document((data_dir / "z4p.alg").read_text())
    assert [m.name for m in doc.modules] == ["SOLUTIONS"]
    assert doc.algebras[0].is_poa


def test_bundled_modules_load():
    for name in ("nat.mod", "bubble.mod", "bubble-plus.mod", "beta-fail.mod", "solutions.mod"):
        assert load_bundled(name).modules


@settings(max_examples=80, deadline=None)
@given(data=st.data())
def test_print_parse_roundtrip(data, bubble, beta_fail):
    for mod in (bubble, beta_fail):
        for sort in sorted(mod.signature.sorts):
            pool = ground_terms(mod, sort, 4)
            if not pool:
                continue
            t = data.draw(st.sampled_from(pool))
            back = parse_term(format_term(t, mod), mod, sort=sort)
            assert equal_modulo(back, t, mod.E0)
            back = parse_term(format_term(t, mod, parens="full"), mod, sort=sort)
            assert equal_modulo(back, t, mod.E0)
