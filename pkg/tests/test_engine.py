import itertools
from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from poarewrite.coherence import equational_normal_forms
from poarewrite.core import App, Var, apply_substitution
from poarewrite.engine import (
    EngineLimits,
    Rewriter,
    canonical_form,
    equal_modulo,
    ground_terms,
    match_at,
    match_modulo,
)
from poarewrite.errors import BudgetExhausted
from poarewrite.surface import format_term, parse_module, parse_term


def bfs_sort_oracle(xs):
    """Adjacent swaps of out-of-order neighbours on plain tuples."""
    start = tuple(xs)
    dist = {start: 0}
    q = deque([start])
    while q:
        u = q.popleft()
        for i in range(len(u) - 1):
            if u[i + 1] < u[i]:
                v = u[:i] + (u[i + 1], u[i]) + u[i + 2 :]
                if v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
    terminals = {u for u in dist if all(u[i] <= u[i + 1] for i in range(len(u) - 1))}
    return terminals, dist


def test_nat_less(nat):
    rw = Rewriter(nat)
    assert format_term(rw.normalize(parse_term("s 0 < s s 0", nat)), nat) == "true"
    assert format_term(rw.normalize(parse_term("s s 0 < s 0", nat)), nat) == "false"
    assert format_term(rw.normalize(parse_term("0 < 0", nat)), nat) == "false"


def test_one_step_bubble(bubble):
    rw = Rewriter(bubble)
    show = lambda t: sorted(format_term(st.result, bubble) for st in rw.one_step(parse_term(t, bubble)))
    assert show("2 1 3") == ["1 2 3"]
    assert show("3 2 1") == ["2 3 1", "3 1 2"]
    assert show("1 2 3") == []
    # a one-element list is not a redex
    assert show("2") == []


@pytest.mark.parametrize("perm", list(itertools.permutations([1, 2, 3])))
def test_bubble_against_bfs_oracle(bubble, perm):
    rw = Rewriter(bubble)
    t = parse_term(" ".join(map(str, perm)), bubble)
    res = rw.search(t, terminal=True)
    terminals, dist = bfs_sort_oracle(perm)
    assert res.complete
    assert [format_term(u, bubble) for u, _ in res.solutions] == [" ".join(map(str, x)) for x in terminals]
    assert len(res.solutions[0][1]) == dist[(1, 2, 3)]
    assert res.states == len(dist)


def test_search_traces_replay(bubble):
    rw = Rewriter(bubble)
    res = rw.search(parse_term("3 2 1", bubble))
    for u, tr in res.solutions:
        terms = tr.terms
        assert terms[-1] == u
        for a, b, step in zip(terms, terms[1:], tr.steps):
            assert b in {rw.normalize(s.result) for s in rw.one_step(a) if s.rule == step.rule}


def test_search_goal_and_depth(bubble):
    rw = Rewriter(bubble)
    goal = parse_term("1 L:List{Nat}", bubble)
    res = rw.search(parse_term("3 2 1", bubble), goal=goal)
    assert {format_term(u, bubble) for u, _ in res.solutions} == {"1 3 2", "1 2 3"}
    shallow = rw.search(parse_term("3 2 1", bubble), terminal=True, max_depth=1)
    assert not shallow.complete and not shallow.solutions


def test_search_anywhere(bubble):
    rw = Rewriter(bubble)
    goal = parse_term("3 1", bubble)
    res = rw.search(parse_term("3 2 1", bubble), goal=goal, anywhere=True)
    assert {format_term(u, bubble) for u, _ in res.solutions} == {"2 3 1", "3 1 2"}


def test_budget_exhaustion():
    m = parse_module(
        """mod LOOP is
  sort S .
  op a : -> S .
  op f : S -> S .
  eq a = f(a) .
endm"""
    )
    rw = Rewriter(m, EngineLimits(max_normalization_steps=50))
    with pytest.raises(BudgetExhausted):
        rw.normalize(parse_term("a", m))


def test_transition_conditions():
    m = parse_module(
        """mod TC is
  sort S .
  ops a b c d : -> S .
  rl a => b .
  rl b => c .
  crl d => a if a => c .
endm"""
    )
    rw = Rewriter(m)
    assert [format_term(s.result, m) for s in rw.one_step(parse_term("d", m))] == ["a"]


def test_match_modulo_ac(beta_fail):
    subject = parse_term("[a 0] [b 1] [c 0]", beta_fail)
    pat = parse_term("[a 0] R:M", beta_fail)
    ms = match_modulo(pat, subject, beta_fail.E0)
    # R takes the rest of the multiset at the root, one element in the two extension contexts
    assert len(ms) == 3
    ms = [m for m in ms if m.context.path == ()]
    assert len(ms) == 1 and format_term(ms[0].theta[Var("R", "M")], beta_fail) == "[b 1] [c 0]"
    # a two-element sub-multiset anywhere: three choices
    pat2 = parse_term("[X:U 0] [Y:U Z:B]", beta_fail)
    sols = match_modulo(pat2, subject, beta_fail.E0)
    assert len(sols) >= 3


def _brute_force_matches(pattern, subject, E0, pool):
    xs = sorted({v for v in _vars(pattern)}, key=lambda v: v.name)
    found = set()
    for combo in itertools.product(*(pool[v.sort] for v in xs)):
        th = dict(zip(xs, combo))
        if equal_modulo(apply_substitution(th, pattern), subject, E0):
            found.add(tuple((v.name, canonical_form(t, E0)) for v, t in sorted(th.items(), key=lambda kv: kv[0].name)))
    return found


def _vars(t):
    if isinstance(t, Var):
        yield t
    else:
        for a in t.args:
            yield from _vars(a)


@pytest.mark.parametrize(
    "mod_name,pattern,subject",
    [
        ("beta", "X:M Y:M", "[a 0] [b 1] [c 0]"),
        ("beta", "[a B:B] X:M", "[a 0] [a 1] [b 1]"),
        ("beta", "[U:U 0] X:M", "[a 0] [b 0] [c 1]"),
        ("bubble", "L:List{Nat} K:List{Nat}", "1 2 3 4"),
        ("bubble", "L:List{Nat} 2 K:List{Nat}", "2 1 2 3"),
        ("bubble", "N:Nat L:List{Nat}", "3 1 2"),
    ],
)
def test_matching_against_brute_force(mod_name, pattern, subject, beta_fail, bubble):
    mod = beta_fail if mod_name == "beta" else bubble
    E0 = mod.E0
    p = canonical_form(parse_term(pattern, mod), E0)
    s = canonical_form(parse_term(subject, mod), E0)
    pool = {srt: [canonical_form(t, E0) for t in ground_terms(mod, srt, 5)] for srt in mod.signature.sorts}
    if mod is bubble:
        # no identity element, so a list variable can only take a proper piece built from the subject's entries
        entries = subject.split()
        pool["Nat"] = [canonical_form(parse_term(x, mod), E0) for x in set(entries)]
        pool["List{Nat}"] = [
            canonical_form(parse_term(" ".join(xs), mod, sort="List{Nat}"), E0)
            for k in range(1, len(entries))
            for xs in itertools.product(sorted(set(entries)), repeat=k)
        ]
    got = {
        tuple((v.name, canonical_form(t, E0)) for v, t in sorted(th.items(), key=lambda kv: kv[0].name))
        for th in match_at(p, s, E0)
    }
    assert got == _brute_force_matches(p, s, E0, pool)
    assert got


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_equational_confluence_nat(data, nat):
    pool = ground_terms(nat, "Bool", 6)
    t = data.draw(st.sampled_from(pool))
    rw = Rewriter(nat)
    assert equational_normal_forms(nat, t) == {rw.normalize(t)}


@settings(max_examples=40, deadline=None)
@given(xs=st.lists(st.integers(0, 3), min_size=1, max_size=5))
def test_normal_forms_are_canonical_modulo_assoc(xs, bubble):
    rw = Rewriter(bubble)
    t = parse_term(" ".join(map(str, xs)), bubble)
    u = parse_term(" ".join(f"({x})" for x in xs), bubble)
    assert rw.normalize(t) == rw.normalize(u)


@settings(max_examples=25, deadline=None)
@given(xs=st.lists(st.integers(0, 3), min_size=1, max_size=5))
def test_terminal_is_sorted(xs, bubble):
    rw = Rewriter(bubble)
    res = rw.search(parse_term(" ".join(map(str, xs)), bubble), terminal=True)
    assert res.complete
    assert [format_term(u, bubble) for u, _ in res.solutions] == [" ".join(map(str, sorted(xs)))]
