"""The least preorder making a finite algebra satisfy a set of transitions.

Starting from the diagonal, each stage adds the pairs produced by the
transition rules (under every valuation whose conditions hold, the
transition conditions being read against the previous stage) pushed
through every rewriting context, then closes reflexively and
transitively.  On finite carriers the stages stabilise.

Contexts are handled semantically: a context denotes a unary
polynomial function, and on a finite algebra the set of these functions
is the closure of the identity under "put the argument in one system
position of a system-valued operation, with the other arguments fixed".
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import App, Eq, Rule, Trans, Var, term_key
from .errors import PreconditionError
from .models import (
    FiniteAlgebra,
    Homomorphism,
    check_preorder,
    homomorphism_violation,
    monotonicity_violation,
    reflexive_transitive_closure,
    satisfies,
)

log = logging.getLogger(__name__)


class _Compiled:
    """Integer-indexed view of a finite algebra."""

    def __init__(self, B: FiniteAlgebra):
        self.B = B
        self.sig = B.signature
        self.elems = {s: list(c) for s, c in B.carriers.items()}
        self.index = {s: {x: i for i, x in enumerate(c)} for s, c in self.elems.items()}
        self.tables = {}
        for op in self.sig.ops:
            idx = [self.index[s] for s in op.arity]
            out = self.index[op.sort]
            self.tables[op] = {
                tuple(i[a] for i, a in zip(idx, args)): out[v] for args, v in B.tables[op].items()
            }
        self._polys = None

    def term_fn(self, t, pos):
        """Closure evaluating ``t`` on a tuple of variable values laid out by ``pos``."""
        if isinstance(t, Var):
            k = pos[t]
            return lambda env: env[k]
        table = self.tables[t.op]
        if not t.args:
            v = table[()]
            return lambda env: v
        subs = [self.term_fn(a, pos) for a in t.args]
        if len(subs) == 1:
            f = subs[0]
            return lambda env: table[(f(env),)]
        if len(subs) == 2:
            f, g = subs
            return lambda env: table[(f(env), g(env))]
        return lambda env: table[tuple(h(env) for h in subs)]

    def polynomials(self):
        """hole sort -> result sort -> set of unary functions (as tuples)."""
        if self._polys is not None:
            return self._polys
        sig = self.sig
        polys = {}
        work = []
        for s in sig.system_sorts:
            ident = tuple(range(len(self.elems[s])))
            polys.setdefault(s, {}).setdefault(s, set()).add(ident)
            work.append((s, s, ident))
        steps = []
        for op in sig.ops:
            if not sig.is_system(op.sort):
                continue
            for i, si in enumerate(op.arity):
                if sig.is_system(si):
                    steps.append((op, i))
        while work:
            h, s, p = work.pop()
            for op, i in steps:
                if op.arity[i] != s:
                    continue
                table = self.tables[op]
                others = [range(len(self.elems[x])) for j, x in enumerate(op.arity) if j != i]
                for rest in itertools.product(*others):
                    g = tuple(table[rest[:i] + (v,) + rest[i:]] for v in p)
                    bucket = polys[h].setdefault(op.sort, set())
                    if g not in bucket:
                        bucket.add(g)
                        work.append((h, op.sort, g))
        self._polys = {h: {r: sorted(fs) for r, fs in d.items()} for h, d in polys.items()}
        return self._polys


class _RuleTable:
    """Every valuation of one rule, pre-evaluated."""

    def __init__(self, comp: _Compiled, rule: Rule):
        xs = sorted(rule.variables, key=term_key)
        pos = {x: k for k, x in enumerate(xs)}
        lhs, rhs = comp.term_fn(rule.lhs, pos), comp.term_fn(rule.rhs, pos)
        eqs = [(comp.term_fn(c.lhs, pos), comp.term_fn(c.rhs, pos)) for c in rule.eq_conditions]
        trs = [(c.lhs.sort, comp.term_fn(c.lhs, pos), comp.term_fn(c.rhs, pos)) for c in rule.tr_conditions]
        self.sort = rule.lhs.sort
        self.rows = []  # (transition premises [(sort, a, b)], a, b)
        for env in itertools.product(*(range(len(comp.elems[x.sort])) for x in xs)):
            if all(f(env) == g(env) for f, g in eqs):
                prem = tuple((s, f(env), g(env)) for s, f, g in trs)
                self.rows.append((prem, lhs(env), rhs(env)))


def _check_rules(B, Gamma):
    sig = B.signature
    for r in Gamma:
        if not isinstance(r, Rule) or r.kind != "rl":
            raise PreconditionError(f"{r} is not a transition rule")
        for t in (r.lhs, r.rhs, *(x for c in r.conditions for x in (c.lhs, c.rhs))):
            _check_term(t, sig)
        if not sig.is_system(r.lhs.sort):
            raise PreconditionError(f"transition {r.label or r} is over data sort {r.lhs.sort}")


def _check_term(t, sig):
    if isinstance(t, App):
        if t.op not in sig:
            raise PreconditionError(f"operation {t.op} is not interpreted by the algebra")
        for a in t.args:
            _check_term(a, sig)
    elif t.sort not in sig.sorts:
        raise PreconditionError(f"variable {t.name} has a sort the algebra lacks")


def _to_names(comp, rel):
    return {s: frozenset((comp.elems[s][a], comp.elems[s][b]) for a, b in pairs) for s, pairs in rel.items()}


def _to_idx(comp, rel):
    return {s: {(comp.index[s][a], comp.index[s][b]) for a, b in pairs} for s, pairs in rel.items()}


def _gamma(comp, tables, omega):
    out = {s: set() for s in comp.sig.system_sorts}
    polys = comp.polynomials()
    for tab in tables:
        base = set()
        for prem, a, b in tab.rows:
            if all((x, y) in omega[s] for s, x, y in prem):
                base.add((a, b))
        if not base:
            continue
        for r, fs in polys[tab.sort].items():
            dst = out[r]
            for f in fs:
                for a, b in base:
                    dst.add((f[a], f[b]))
    return out


def gamma_step(B: FiniteAlgebra, Gamma: Sequence[Rule], Omega) -> dict:
    """Pairs ``(B_c(theta t), B_c(theta t'))`` for rules whose conditions hold (``Omega`` for transitions)."""
    _check_rules(B, Gamma)
    comp = _Compiled(B)
    tables = [_RuleTable(comp, r) for r in Gamma]
    omega = {s: set() for s in B.signature.system_sorts}
    omega.update(_to_idx(comp, Omega))
    return _to_names(comp, _gamma(comp, tables, omega))


@dataclass
class StageTrace:
    """Relations ``Gamma_{B,0}, Gamma_{B,1}, ...`` up to stabilisation."""

    stages: list = field(default_factory=list)

    def __len__(self):
        return len(self.stages)

    def __getitem__(self, k):
        return self.stages[k]


@dataclass
class FreePreorder:
    relation: dict  # system sort -> frozenset of (a, b)
    stage: int
    trace: StageTrace

    def algebra(self, B: FiniteAlgebra) -> FiniteAlgebra:
        return B.with_preorders(self.relation)

    def __eq__(self, other):
        rel = other.relation if isinstance(other, FreePreorder) else other
        return self.relation == {s: frozenset(p) for s, p in rel.items()}


def free_preorder(B: FiniteAlgebra, Gamma: Sequence[Rule]) -> FreePreorder:
    """Least preorder on ``B`` that is monotone and satisfies ``Gamma``, with its stages."""
    if B.is_poa:
        raise PreconditionError("free_preorder starts from a plain algebra; drop its preorder first")
    _check_rules(B, Gamma)
    comp = _Compiled(B)
    tables = [_RuleTable(comp, r) for r in Gamma]
    sorts = comp.sig.system_sorts
    cur = {s: {(i, i) for i in range(len(comp.elems[s]))} for s in sorts}
    stages = [_to_names(comp, cur)]
    while True:
        closed = {s: _closure_idx(cur[s], len(comp.elems[s])) for s in sorts}
        step = _gamma(comp, tables, closed)
        nxt = {s: closed[s] | step[s] for s in sorts}
        if nxt == cur:
            break
        cur = nxt
        stages.append(_to_names(comp, cur))
    final = {s: _closure_idx(cur[s], len(comp.elems[s])) for s in sorts}
    return FreePreorder(_to_names(comp, final), len(stages) - 1, StageTrace(stages))


def _closure_idx(pairs, n):
    reach = [1 << i for i in range(n)]
    for a, b in pairs:
        reach[a] |= 1 << b
    for k in range(n):
        bit, rk = 1 << k, reach[k]
        for i in range(n):
            if reach[i] & bit:
                reach[i] |= rk
    return {(i, j) for i in range(n) for j in range(n) if reach[i] >> j & 1}


# -- brute-force oracle ----------------------------------------------------------------


def all_preorders(n: int) -> list[frozenset]:
    """Every reflexive transitive relation on ``range(n)``."""
    off = [(i, j) for i in range(n) for j in range(n) if i != j]
    diag = {(i, i) for i in range(n)}
    out = []
    for bits in range(1 << len(off)):
        rel = diag | {off[k] for k in range(len(off)) if bits >> k & 1}
        if all((a, d) in rel for a, b in rel for c, d in rel if b == c):
            out.append(frozenset(rel))
    return out


def preorder_models(B: FiniteAlgebra, Gamma: Sequence[Rule], max_carrier: int = 3) -> list[dict]:
    """Every monotone preorder family on ``B`` satisfying ``Gamma``, by exhaustive enumeration."""
    _check_rules(B, Gamma)
    comp = _Compiled(B)
    sorts = comp.sig.system_sorts
    for s in sorts:
        if len(comp.elems[s]) > max_carrier:
            raise PreconditionError(
                f"exhaustive preorder enumeration is limited to {max_carrier} elements per system sort; "
                f"{s} has {len(comp.elems[s])}"
            )
    tables = [_RuleTable(comp, r) for r in Gamma]
    # monotonicity constraints: (s, a, b) in R implies (r, fa, fb) in R
    mono = []
    sig = comp.sig
    for op in sig.ops:
        if not sig.is_system(op.sort):
            continue
        table = comp.tables[op]
        for i, s in enumerate(op.arity):
            if not sig.is_system(s):
                continue
            others = [range(len(comp.elems[x])) for j, x in enumerate(op.arity) if j != i]
            n = len(comp.elems[s])
            for rest in itertools.product(*others):
                for a in range(n):
                    for b in range(n):
                        if a != b:
                            fa = table[rest[:i] + (a,) + rest[i:]]
                            fb = table[rest[:i] + (b,) + rest[i:]]
                            if fa != fb:
                                mono.append((s, (a, b), op.sort, (fa, fb)))
    rows = [(tab.sort, prem, (a, b)) for tab in tables for prem, a, b in tab.rows if a != b]
    choices = [all_preorders(len(comp.elems[s])) for s in sorts]
    out = []
    for fam in itertools.product(*choices):
        R = dict(zip(sorts, fam))
        if any(p in R[s] and q not in R[r] for s, p, r, q in mono):
            continue
        if any(pair not in R[s] and all((x, y) in R[ps] for ps, x, y in prem) for s, prem, pair in rows):
            continue
        out.append(R)
    return [_to_names(comp, R) for R in out]


def check_leastness(B: FiniteAlgebra, Gamma: Sequence[Rule], candidate, max_carrier: int = 3) -> bool:
    """True iff ``candidate`` is a model and is contained in every other model."""
    rel = candidate.relation if isinstance(candidate, FreePreorder) else candidate
    rel = {s: frozenset(p) for s, p in rel.items()}
    models = preorder_models(B, Gamma, max_carrier)
    if rel not in models:
        return False
    return all(all(rel[s] <= M[s] for s in rel) for M in models)


def least_preorder_oracle(B: FiniteAlgebra, Gamma: Sequence[Rule], max_carrier: int = 3) -> Optional[dict]:
    """Intersection of all models if that intersection is itself a model, else ``None``."""
    models = preorder_models(B, Gamma, max_carrier)
    if not models:
        return None
    least = {s: frozenset.intersection(*(M[s] for M in models)) for s in models[0]}
    return least if least in models else None


# -- adjunction ------------------------------------------------------------------------


def hom_extension_violation(B: FiniteAlgebra, Gamma, A: FiniteAlgebra, h) -> Optional[tuple]:
    """A pair related by the free preorder on ``B`` whose ``h``-image is unrelated in ``A``."""
    if not A.is_poa:
        raise PreconditionError("the target algebra must carry a preorder")
    for s in A.signature.system_sorts:
        check_preorder(A.preorders[s], A.carriers[s], s)
    bad = monotonicity_violation(A)
    if bad:
        raise PreconditionError(f"the target is not a preordered algebra: {bad}")
    for r in Gamma:
        if not satisfies(A, r.as_sentence()):
            raise PreconditionError(f"the target does not satisfy {r.label or r}")
    Bm = B.without_preorders() if B.is_poa else B
    why = homomorphism_violation(h, Bm, A.without_preorders())
    if why:
        raise PreconditionError(f"not a homomorphism: {why}")
    hh = h if isinstance(h, Homomorphism) else Homomorphism(dict(h))
    free = free_preorder(Bm, Gamma)
    for s in sorted(free.relation):
        for a, b in sorted(free.relation[s]):
            if (hh(s, a), hh(s, b)) not in A.preorders[s]:
                return (s, a, b)
    return None


def hom_extension_check(B: FiniteAlgebra, Gamma, A: FiniteAlgebra, h) -> bool:
    """Whether ``h`` stays monotone from ``(B, free preorder)`` into ``A``; always true in theory."""
    bad = hom_extension_violation(B, Gamma, A, h)
    if bad is not None:
        s, a, b = bad
        log.error("extension of h is not monotone on %s: %s => %s maps outside the target preorder", s, a, b)
        return False
    return True


def satisfies_all(A: FiniteAlgebra, Gamma) -> bool:
    return all(satisfies(A, r.as_sentence()) for r in Gamma)
