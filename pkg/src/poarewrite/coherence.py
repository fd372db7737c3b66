"""Bounded checks of the side conditions under which normal-form rewriting is faithful.

* coherence: every transition step taken on a term that is not yet in
  normal form can be mirrored, after normalization, by steps of the
  normalize/step/normalize loop started from the normal form;
* protection: every ground term of a condition sort reduces to one of
  a few designated constants (no junk), and those constants stay
  distinct (no confusion).

Both are undecidable in general, so the reports carry their bounds and
say ``ok-up-to-bounds`` rather than ``ok``.
"""

from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .core import App, Eq, Term, TheoryModule, term_key, term_size
from .engine import DEFAULT_LIMITS, EngineLimits, Rewriter, ground_terms
from .errors import BudgetExhausted, ClosureError, PreconditionError
from .models import FiniteAlgebra, Homomorphism, homomorphism_violation

log = logging.getLogger(__name__)

OK = "ok-up-to-bounds"
COUNTEREXAMPLE = "counterexample"
INCONCLUSIVE = "inconclusive"


@dataclass
class Counterexample:
    source: Term  # t, canonical modulo the structural axioms
    target: Term  # t', one transition step away from t
    rule: str
    context: object
    substitution: tuple
    source_nf: Term
    target_nf: Term
    frontier: list  # every normal form reached from source_nf
    exhaustive: bool  # the search from source_nf ran out of states before the depth bound
    depth: int = 0


@dataclass
class CoherenceReport:
    status: str
    checked: int
    bounds: dict
    counterexample: Optional[Counterexample] = None
    reason: str = ""
    skipped: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OK


def check_coherence(
    mod: TheoryModule,
    term_size_bound: int = 8,
    search_depth: int = 6,
    limits: EngineLimits = DEFAULT_LIMITS,
) -> CoherenceReport:
    """Search for a step ``t -> t'`` with no ``u`` reachable from the normal form of ``t`` normalizing like ``t'``.

    Ground terms of every system sort are visited by increasing size,
    ties broken by the fixed term order; the first failure is reported.
    """
    rw = Rewriter(mod, limits)
    bounds = {"size": term_size_bound, "depth": search_depth}
    terms = []
    for s in mod.signature.system_sorts:
        terms.extend(ground_terms(mod, s, term_size_bound))
    terms.sort(key=lambda t: (term_size(t), term_key(t)))
    reach_cache: dict = {}
    checked = 0
    for t in terms:
        try:
            steps = rw.one_step(t)
            if not steps:
                checked += 1
                continue
            t_nf = rw.normalize(t)
            if t_nf not in reach_cache:
                res = rw.search(t_nf, max_depth=search_depth)
                reach_cache[t_nf] = ({u for u, _ in res.solutions}, res)
            reached, res = reach_cache[t_nf]
            for st in steps:
                target_nf = rw.normalize(st.result)
                if target_nf not in reached:
                    cex = Counterexample(
                        t, st.result, st.rule, st.context, st.substitution, t_nf, target_nf,
                        sorted(reached, key=term_key), res.complete, search_depth,
                    )
                    return CoherenceReport(COUNTEREXAMPLE, checked + 1, bounds, cex, skipped=list(rw.skipped))
        except BudgetExhausted as exc:
            return CoherenceReport(INCONCLUSIVE, checked, bounds, reason=f"normalization budget exhausted: {exc}")
        checked += 1
    if rw.skipped:
        return CoherenceReport(
            INCONCLUSIVE, checked, bounds,
            reason=f"{len(rw.skipped)} rule applications had undecided transition conditions",
            skipped=list(rw.skipped),
        )
    return CoherenceReport(OK, checked, bounds)


def replay_counterexample(mod: TheoryModule, cex: Counterexample, limits: EngineLimits = DEFAULT_LIMITS) -> bool:
    """Re-derive a counterexample: the step exists and the target normal form stays unreachable."""
    rw = Rewriter(mod, limits)
    if not any(st.result == cex.target and st.rule == cex.rule for st in rw.one_step(cex.source)):
        return False
    if rw.normalize(cex.source) != cex.source_nf or rw.normalize(cex.target) != cex.target_nf:
        return False
    reached = {u for u, _ in rw.search(cex.source_nf, max_depth=cex.depth).solutions}
    return cex.target_nf not in reached and reached == set(cex.frontier)


# -- protection ----------------------------------------------------------------------


@dataclass
class SortProtection:
    sort: str
    normal_forms: list
    junk: list
    confusion: list
    checked: int
    junk_total: int = 0

    @property
    def ok(self) -> bool:
        return not self.junk and not self.confusion


@dataclass
class ProtectionReport:
    sorts: dict
    bound: int
    out_of_fragment: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(p.ok for p in self.sorts.values())


def condition_sorts(mod: TheoryModule):
    """Sorts of ``t = c`` transition conditions, their right-hand constants, and rules outside that fragment."""
    sorts: dict = {}
    outside = []
    for r in mod.transitions:
        if r.tr_conditions or any(not (isinstance(c.rhs, App) and not c.rhs.args) for c in r.eq_conditions):
            outside.append(r.label)
            continue
        for c in r.eq_conditions:
            sorts.setdefault(c.lhs.sort, set()).add(c.rhs)
    return sorts, outside


def check_protection(
    mod: TheoryModule,
    term_size_bound: int = 6,
    normal_forms: Optional[Mapping[str, list]] = None,
    limits: EngineLimits = DEFAULT_LIMITS,
    max_witnesses: int = 20,
) -> ProtectionReport:
    """No junk and no confusion for the sorts used in transition conditions.

    Without ``normal_forms`` the designated constants of a sort are all
    its declared constants (which include those written on the right of
    its conditions).  Keeping reducible ones in the set is what lets a
    collapse such as ``true = false`` show up as confusion.
    """
    rw = Rewriter(mod, limits)
    found, outside = condition_sorts(mod)
    out = {}
    for s in sorted(found):
        if normal_forms and s in normal_forms:
            nfs = list(normal_forms[s])
        else:
            cs = set(found[s]) | {App(op, ()) for op in mod.signature.constants(s)}
            nfs = sorted(cs, key=term_key)
        images = {c: rw.normalize(c) for c in nfs}
        confusion = [
            (a, b) for a, b in itertools.combinations(nfs, 2) if images[a] == images[b]
        ]
        targets = set(nfs)
        junk = []
        total = 0
        terms = ground_terms(mod, s, term_size_bound)
        for t in terms:
            u = rw.normalize(t)
            if u not in targets:
                total += 1
                if len(junk) < max_witnesses:
                    junk.append((t, u))
        out[s] = SortProtection(s, nfs, junk, confusion, len(terms), total)
    return ProtectionReport(out, term_size_bound, outside)


# -- finite nf-homomorphisms -------------------------------------------------------------


def check_nf_homomorphism(B: FiniteAlgebra, beta, N: Mapping[str, set]) -> bool:
    """``beta`` maps ``B`` onto the subalgebra ``N`` and fixes every element of ``N``.

    Raises :class:`ClosureError` when ``N`` is not closed under the operations.
    """
    sig = B.signature
    N = {s: set(N.get(s, ())) for s in sig.sorts}
    for s in sig.sorts:
        extra = N[s] - set(B.carriers[s])
        if extra:
            raise ClosureError(f"N contains {sorted(extra)} which are not elements of {s}")
    for op in sig.ops:
        for args in itertools.product(*(sorted(N[x]) for x in op.arity)):
            v = B.tables[op][args]
            if v not in N[op.sort]:
                raise ClosureError(f"N is not closed under {op.name}: ({', '.join(args)}) -> {v}")
    sub = FiniteAlgebra(
        sig,
        {s: [x for x in B.carriers[s] if x in N[s]] for s in sig.sorts},
        {op: {a: v for a, v in B.tables[op].items() if all(x in N[s] for x, s in zip(a, op.arity))} for op in sig.ops},
        validate=False,
    )
    h = beta if isinstance(beta, Homomorphism) else Homomorphism(dict(beta))
    for s in sig.sorts:
        for x in B.carriers[s]:
            if h.maps.get(s, {}).get(x) not in N[s]:
                return False
    if homomorphism_violation(h, B.without_preorders() if B.is_poa else B, sub) is not None:
        return False
    return all(h(s, n) == n for s in sig.sorts for n in N[s])


# -- computational model spot checks -----------------------------------------------------


def hybrid_reachable(mod: TheoryModule, t: Term, limits: EngineLimits = DEFAULT_LIMITS, max_depth: int = 64) -> set:
    """Normal forms reachable from the normal form of ``t`` by the normalize/step/normalize loop."""
    rw = Rewriter(mod, limits)
    res = rw.search(t, max_depth=max_depth)
    if not res.complete:
        raise BudgetExhausted(f"hybrid exploration from {t!r} did not finish within depth {max_depth}")
    return {u for u, _ in res.solutions}


def interleaving_reachable(
    mod: TheoryModule,
    t: Term,
    limits: EngineLimits = DEFAULT_LIMITS,
    max_states: int = 200_000,
) -> set:
    """Normal forms of every class reachable from ``t`` by single equation and transition steps in any order.

    A deliberately naive oracle: no normalization is interleaved, every
    equation step at every position is explored separately.
    """
    rw = Rewriter(mod, limits)
    start = rw.canonical(t)
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        nxt = [v for _, v in rw.equation_steps(u)] + [st.result for st in rw.one_step(u)]
        for v in nxt:
            if v not in seen:
                seen.add(v)
                if len(seen) > max_states:
                    raise BudgetExhausted(f"interleaving oracle exceeded {max_states} states")
                queue.append(v)
    return {rw.normalize(u) for u in seen}


@dataclass
class IsomorphismSpotCheck:
    checked: int
    mismatches: list  # (t, hybrid set, oracle set)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def spot_check_computational_model(
    mod: TheoryModule, term_size_bound: int, limits: EngineLimits = DEFAULT_LIMITS, sorts=None
) -> IsomorphismSpotCheck:
    """Compare :func:`hybrid_reachable` and :func:`interleaving_reachable` on every ground term up to the bound."""
    mismatches = []
    checked = 0
    for s in sorts or mod.signature.system_sorts:
        for t in ground_terms(mod, s, term_size_bound):
            h = hybrid_reachable(mod, t, limits)
            o = interleaving_reachable(mod, t, limits)
            checked += 1
            if h != o:
                mismatches.append((t, h, o))
    return IsomorphismSpotCheck(checked, mismatches)


def equational_normal_forms(mod: TheoryModule, t: Term, limits: EngineLimits = DEFAULT_LIMITS, max_states: int = 100_000) -> set:
    """Irreducible ends of all equation-only rewrite sequences from ``t`` (a confluence oracle)."""
    rw = Rewriter(mod, limits)
    start = rw.canonical(t)
    seen = {start}
    stack = [start]
    ends = set()
    while stack:
        u = stack.pop()
        succ = rw.equation_steps(u)
        if not succ:
            ends.add(u)
        for _, v in succ:
            if v not in seen:
                seen.add(v)
                if len(seen) > max_states:
                    raise BudgetExhausted(f"confluence oracle exceeded {max_states} states")
                stack.append(v)
    return ends


def require_executable(mod: TheoryModule) -> None:
    for r in (*mod.equations, *mod.transitions):
        if not r.is_executable:
            raise PreconditionError(f"rule {r.label} is not executable")
