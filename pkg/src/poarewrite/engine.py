"""Rewriting modulo associativity/commutativity.

Terms handled here are kept in canonical form: associative operators
become right combs and the arguments of commutative operators are
sorted by :func:`~poarewrite.core.term_key`.  Two terms are equal
modulo the structural axioms exactly when their canonical forms are
equal, so canonical terms can be hashed and stored in visited sets.

Computation follows the two-level method used by Maude/CafeOBJ: a state
is first reduced to its equational normal form, then one transition is
applied, and the result is normalized again.
"""

from __future__ import annotations

import functools
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .core import (
    App,
    Axioms,
    Context,
    Eq,
    Rule,
    Signature,
    Term,
    TheoryModule,
    Trans,
    Var,
    _subst,
    const,
    hole,
    is_hole,
    term_key,
    term_size,
    variables,
)
from .errors import BudgetExhausted, RuleError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineLimits:
    max_normalization_steps: int = 100_000
    max_search_depth: int = 12
    max_condition_depth: int = 4

    def __post_init__(self):
        for name in ("max_normalization_steps", "max_search_depth", "max_condition_depth"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


DEFAULT_LIMITS = EngineLimits()


# -- canonical forms ----------------------------------------------------------


def flatten(op, t: Term) -> list[Term]:
    """Arguments of a nest of ``op`` applications, left to right."""
    out = []
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, App) and u.op == op:
            stack.append(u.args[1])
            stack.append(u.args[0])
        else:
            out.append(u)
    return out


def comb(op, items: Sequence[Term]) -> Term:
    """Right comb ``op(x1, op(x2, ... op(xn-1, xn)))``; a single item is returned as is."""
    it = list(items)
    acc = it[-1]
    for x in reversed(it[:-1]):
        acc = App(op, (x, acc))
    return acc


def canonical_form(t: Term, E0: Axioms) -> Term:
    """Canonical representative of the E0-congruence class of ``t``."""
    if not E0:
        return t
    return _canon(t, E0)


@functools.lru_cache(maxsize=500_000)
def _canon(t, E0):
    if isinstance(t, Var) or not t.args:
        return t
    args = tuple(_canon(a, E0) for a in t.args)
    op = t.op
    if op in E0.assoc:
        items = flatten(op, App(op, args))
        if op in E0.comm:
            items.sort(key=term_key)
        return comb(op, items)
    if op in E0.comm and term_key(args[1]) < term_key(args[0]):
        args = (args[1], args[0])
    if all(a is b for a, b in zip(args, t.args)):
        return t
    return App(op, args)


def assoc_form(t: Term, E0: Axioms) -> Term:
    """Reassociate associative operators into right combs without reordering anything."""
    return canonical_form(t, Axioms(E0.assoc, frozenset())) if E0.assoc else t


def equal_modulo(t1: Term, t2: Term, E0: Axioms) -> bool:
    return canonical_form(t1, E0) == canonical_form(t2, E0)


# -- matching -----------------------------------------------------------------


@dataclass(frozen=True)
class MatchResult:
    substitution: tuple  # sorted ((Var, Term), ...) pairs
    context: Context

    @property
    def theta(self) -> dict:
        return dict(self.substitution)


def _freeze(theta: dict) -> tuple:
    return tuple(sorted(theta.items(), key=lambda kv: (kv[0].name, kv[0].sort)))


def _absorbing(p, op) -> bool:
    return isinstance(p, Var) and p.sort == op.sort


def match_at(pattern: Term, subject: Term, E0: Axioms, theta: Optional[dict] = None) -> Iterator[dict]:
    """Substitutions making ``pattern`` E0-equal to ``subject`` (both canonical), extending ``theta``."""
    yield from _match(pattern, subject, E0, dict(theta or {}))


def _match(p, s, E0, theta):
    if isinstance(p, Var):
        bound = theta.get(p)
        if bound is None:
            if p.sort == s.sort:
                out = dict(theta)
                out[p] = s
                yield out
        elif bound == s:
            yield theta
        return
    if not isinstance(s, App) or s.op != p.op:
        return
    op = p.op
    if not p.args:
        yield theta
        return
    if op in E0.assoc:
        P = flatten(op, p)
        S = flatten(op, s)
        if op in E0.comm:
            yield from _match_ac(op, P, S, E0, theta)
        else:
            yield from _match_a(op, P, 0, S, 0, E0, theta)
    elif op in E0.comm:
        yield from _match_seq(p.args, s.args, E0, theta)
        if s.args[0] != s.args[1]:
            yield from _match_seq(p.args, (s.args[1], s.args[0]), E0, theta)
    else:
        yield from _match_seq(p.args, s.args, E0, theta)


def _match_seq(ps, ss, E0, theta, i=0):
    if i == len(ps):
        yield theta
        return
    for th in _match(ps[i], ss[i], E0, theta):
        yield from _match_seq(ps, ss, E0, th, i + 1)


def _match_a(op, P, i, S, j, E0, theta):
    if i == len(P):
        if j == len(S):
            yield theta
        return
    p = P[i]
    rest = len(P) - i - 1
    if _absorbing(p, op):
        for end in range(j + 1, len(S) - rest + 1):
            for th in _match(p, comb(op, S[j:end]), E0, theta):
                yield from _match_a(op, P, i + 1, S, end, E0, th)
    elif j < len(S):
        for th in _match(p, S[j], E0, theta):
            yield from _match_a(op, P, i + 1, S, j + 1, E0, th)


def _match_ac(op, P, S, E0, theta):
    fixed = [p for p in P if not _absorbing(p, op)]
    absorbing = [p for p in P if _absorbing(p, op)]
    if len(fixed) > len(S) or (not absorbing and len(fixed) != len(S)):
        return
    seen = set()

    def pick(i, remaining, th):
        if i == len(fixed):
            yield from _distribute(op, absorbing, remaining, E0, th)
            return
        tried = set()
        for idx, e in enumerate(remaining):
            if e in tried:
                continue
            tried.add(e)
            for th2 in _match(fixed[i], e, E0, th):
                yield from pick(i + 1, remaining[:idx] + remaining[idx + 1:], th2)

    for th in pick(0, tuple(S), theta):
        key = _freeze(th)
        if key not in seen:
            seen.add(key)
            yield th


def _distribute(op, xs, remaining, E0, theta):
    if not xs:
        if not remaining:
            yield theta
        return
    if len(remaining) < len(xs):
        return
    if len(xs) == 1:
        yield from _match(xs[0], comb(op, sorted(remaining, key=term_key)), E0, theta)
        return
    for chunk, rest in _sub_multisets(remaining, 1, len(remaining) - len(xs) + 1):
        for th in _match(xs[0], comb(op, chunk), E0, theta):
            yield from _distribute(op, xs[1:], rest, E0, th)


def _sub_multisets(items, lo, hi):
    """(chunk, rest) pairs for every sub-multiset with lo <= |chunk| <= hi, no repeats."""
    items = sorted(items, key=term_key)
    n = len(items)
    seen = set()
    for k in range(hi, lo - 1, -1):
        for idxs in itertools.combinations(range(n), k):
            chunk = tuple(items[i] for i in idxs)
            if chunk in seen:
                continue
            seen.add(chunk)
            chosen = set(idxs)
            yield chunk, tuple(items[i] for i in range(n) if i not in chosen)


def _find_hole(t, path=()):
    if is_hole(t):
        return path
    if isinstance(t, App):
        for i, a in enumerate(t.args):
            p = _find_hole(a, path + (i,))
            if p is not None:
                return p
    return None


def _wrap(ctx: Term, inner: Term) -> Term:
    """Plug the context ``inner`` (which has its own hole) into the hole of ``ctx``."""
    if isinstance(ctx, Var):
        return inner
    return _subst({hole(inner.sort): inner}, ctx)


def sites(t: Term, E0: Axioms, sig: Optional[Signature] = None, system_only: bool = False):
    """Every (context term, subject) decomposition of ``t`` modulo E0, pre-order.

    Below an associative operator the subjects include every contiguous
    slice of the flattened argument list (every sub-multiset when the
    operator is also commutative), each with the remainder as context.
    """

    def ok(u):
        return not system_only or sig.is_system(u.sort)

    def walk(u, ctx):
        if not ok(u):
            return
        if isinstance(u, App) and u.op in E0.assoc:
            op = u.op
            items = flatten(op, u)
            n = len(items)
            h = hole(op.sort)
            if op in E0.comm:
                for chunk, rest in _sub_multisets(items, 2, n):
                    if not rest:
                        yield ctx, u
                    else:
                        inner = _canon(comb(op, (h, *rest)), E0)
                        yield _wrap(ctx, inner), comb(op, chunk)
            else:
                yield ctx, u
                for i in range(n):
                    for j in range(n, i + 1, -1):
                        if i == 0 and j == n:
                            continue
                        inner = comb(op, (*items[:i], h, *items[j:]))
                        yield _wrap(ctx, inner), comb(op, items[i:j])
            for k, item in enumerate(items):
                inner = comb(op, (*items[:k], hole(item.sort), *items[k + 1:]))
                if op in E0.comm:
                    inner = _canon(inner, E0)
                yield from walk(item, _wrap(ctx, inner))
        else:
            yield ctx, u
            if isinstance(u, App):
                for i, a in enumerate(u.args):
                    args = list(u.args)
                    args[i] = hole(a.sort)
                    yield from walk(a, _wrap(ctx, App(u.op, args)))

    yield from walk(t, hole(t.sort))


def _context(ctx_term: Term, E0: Axioms) -> Context:
    ctx_term = canonical_form(ctx_term, E0)
    return Context(ctx_term, _find_hole(ctx_term))


def match_modulo(
    pattern: Term,
    subject: Term,
    E0: Axioms,
    system_only: bool = False,
    sig: Optional[Signature] = None,
) -> list[MatchResult]:
    """All (context, substitution) pairs with ``context[pattern theta]`` E0-equal to ``subject``."""
    if system_only and sig is None:
        raise ValueError("system_only matching needs the signature")
    pattern = canonical_form(pattern, E0)
    subject = canonical_form(subject, E0)
    out = []
    seen = set()
    for ctx, u in sites(subject, E0, sig, system_only):
        if u.sort != pattern.sort:
            continue
        for th in _match(pattern, u, E0, {}):
            c = _context(ctx, E0)
            key = (c.term, _freeze(th))
            if key not in seen:
                seen.add(key)
                out.append(MatchResult(_freeze(th), c))
    return out


# -- traces -------------------------------------------------------------------


@dataclass(frozen=True)
class TraceStep:
    rule: str
    context: Context
    substitution: tuple
    result: Term  # canonical, before equational normalization
    normalized: Optional[Term] = None

    @property
    def theta(self) -> dict:
        return dict(self.substitution)


@dataclass
class RewriteTrace:
    start: Term
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    @property
    def terms(self) -> list:
        return [self.start] + [s.normalized if s.normalized is not None else s.result for s in self.steps]


@dataclass
class SearchResult:
    solutions: list  # [(term, RewriteTrace)]
    complete: bool
    states: int
    depth_reached: int
    skipped: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.solutions)

    def __len__(self):
        return len(self.solutions)


class ConditionUndecided(Exception):
    """A transition condition could not be settled within its search budget."""


# -- the rewriter -------------------------------------------------------------


class Rewriter:
    """Equational normalization, transition steps and search for one module.

    Normal forms and successor lists are memoized; the memo tables are
    sound under the usual assumption that the equations are confluent
    and terminating modulo the structural axioms.
    """

    def __init__(self, mod: TheoryModule, limits: EngineLimits = DEFAULT_LIMITS):
        for r in (*mod.equations, *mod.transitions):
            if not r.is_executable:
                extra = sorted(v.name for v in r.variables - variables(r.lhs))
                raise RuleError(
                    f"rule {r.label} is not executable: variables {', '.join(extra)} do not occur in its lhs"
                )
        self.mod = mod
        self.sig = mod.signature
        self.E0 = mod.axioms
        self.limits = limits
        self.equations = [self._prep(r) for r in mod.equations]
        self.transitions = [self._prep(r) for r in mod.transitions]
        self._eq_index: dict = {}
        for r in self.equations:
            key = r.lhs.op if isinstance(r.lhs, App) else None
            self._eq_index.setdefault(key, []).append(r)
        self._nf_memo: dict = {}
        self._succ_memo: dict = {}
        self._steps = 0
        self._trace: deque = deque(maxlen=64)
        self._cond_level = 0
        self.skipped: list = []

    def _prep(self, r: Rule) -> Rule:
        E0 = self.E0
        conds = tuple(type(c)(canonical_form(c.lhs, E0), canonical_form(c.rhs, E0)) for c in r.conditions)
        return Rule(r.kind, canonical_form(r.lhs, E0), canonical_form(r.rhs, E0), conds, r.label)

    def canonical(self, t: Term) -> Term:
        return canonical_form(t, self.E0)

    # equations

    def normalize(self, t: Term) -> Term:
        self._steps = 0
        self._trace.clear()
        return self._nf(self.canonical(t))

    def _nf(self, t):
        memo = self._nf_memo
        hit = memo.get(t)
        if hit is not None:
            return hit
        u = t
        while True:
            if isinstance(u, App) and u.args:
                args = tuple(self._nf(a) for a in u.args)
                if any(a is not b for a, b in zip(args, u.args)):
                    u = self.canonical(App(u.op, args))
            r = self._root_step(u)
            if r is None:
                break
            self._steps += 1
            self._trace.append((r[0], u, r[1]))
            if self._steps > self.limits.max_normalization_steps:
                raise BudgetExhausted(
                    f"normalization exceeded {self.limits.max_normalization_steps} steps; "
                    "the equations may not terminate",
                    list(self._trace),
                )
            u = r[1]
        memo[t] = u
        memo[u] = u
        return u

    def _root_step(self, u):
        op = u.op if isinstance(u, App) else None
        cands = self._eq_index.get(op, ()) if op is not None else ()
        cands = list(cands) + list(self._eq_index.get(None, ()))
        if not cands:
            return None
        for r in cands:
            for ctx, s in self._root_sites(u, r.lhs):
                for th in _match(r.lhs, s, self.E0, {}):
                    if self._conditions_hold(r, th):
                        new = _subst(th, r.rhs)
                        if not isinstance(ctx, Var):
                            new = _subst({hole(new.sort): new}, ctx)
                        return r.label, self.canonical(new)
        return None

    def _root_sites(self, u, lhs):
        """Root-level subjects: ``u`` itself, plus slices when the root is associative."""
        if isinstance(u, App) and u.op in self.E0.assoc and (
            (isinstance(lhs, App) and lhs.op == u.op) or (isinstance(lhs, Var) and lhs.sort == u.sort)
        ):
            op = u.op
            items = flatten(op, u)
            n = len(items)
            h = hole(op.sort)
            if op in self.E0.comm:
                for chunk, rest in _sub_multisets(items, 2, n):
                    yield (h if not rest else comb(op, (h, *rest))), comb(op, chunk)
            else:
                for i in range(n):
                    for j in range(n, i + 1, -1):
                        if i == 0 and j == n:
                            yield h, u
                        else:
                            yield comb(op, (*items[:i], h, *items[j:])), comb(op, items[i:j])
        else:
            yield hole(u.sort), u

    def _conditions_hold(self, r: Rule, th: dict) -> bool:
        for c in r.conditions:
            a = self._nf(self.canonical(_subst(th, c.lhs)))
            b = self._nf(self.canonical(_subst(th, c.rhs)))
            if isinstance(c, Eq):
                if a != b:
                    return False
            elif not self._reaches(a, b):
                return False
        return True

    def _reaches(self, a, b) -> bool:
        if a == b:
            return True
        if self._cond_level >= 3:
            raise ConditionUndecided("transition conditions nested too deeply")
        self._cond_level += 1
        try:
            seen = {a}
            frontier = [a]
            for _ in range(self.limits.max_condition_depth):
                nxt = []
                for u in frontier:
                    for st in self._successors(u):
                        v = self._nf(st.result)
                        if v == b:
                            return True
                        if v not in seen:
                            seen.add(v)
                            nxt.append(v)
                frontier = nxt
                if not frontier:
                    return False
            raise ConditionUndecided(f"reachability condition undecided within depth {self.limits.max_condition_depth}")
        finally:
            self._cond_level -= 1

    def equation_steps(self, t: Term) -> list[tuple[str, Term]]:
        """Every single E1 step from ``t`` at any position (no normalization of the result)."""
        t = self.canonical(t)
        out = []
        seen = set()
        for r in self.equations:
            for m in match_modulo(r.lhs, t, self.E0):
                th = m.theta
                if not self._conditions_hold(r, th):
                    continue
                new = self.canonical(m.context.plug(_subst(th, r.rhs)))
                if new not in seen:
                    seen.add(new)
                    out.append((r.label, new))
        return out

    # transitions

    def one_step(self, t: Term) -> list[TraceStep]:
        return list(self._successors(self.canonical(t)))

    def _successors(self, t):
        hit = self._succ_memo.get(t)
        if hit is not None:
            return hit
        out = []
        seen = set()
        for r in self.transitions:
            for m in match_modulo(r.lhs, t, self.E0, system_only=True, sig=self.sig):
                th = m.theta
                try:
                    ok = self._conditions_hold(r, th)
                except (ConditionUndecided, BudgetExhausted) as exc:
                    log.warning("skipping %s at %s: %s", r.label, m.context, exc)
                    self.skipped.append((t, r.label, m.context, str(exc)))
                    continue
                if not ok:
                    continue
                new = self.canonical(m.context.plug(_subst(th, r.rhs)))
                if new not in seen:
                    seen.add(new)
                    out.append(TraceStep(r.label, m.context, m.substitution, new))
        out = tuple(out)
        self._succ_memo[t] = out
        return out

    def search(
        self,
        t: Term,
        goal=None,
        terminal: bool = False,
        max_depth: Optional[int] = None,
        anywhere: bool = False,
    ) -> SearchResult:
        """Breadth-first exploration of the normalize / one-step / normalize loop.

        ``goal`` is a pattern matched at the top of each reached normal
        form (anywhere inside it with ``anywhere``); ``terminal`` selects
        states without successors.  With neither, every reached state is
        reported.
        """
        depth_limit = self.limits.max_search_depth if max_depth is None else max_depth
        if goal is not None:
            goal = self.canonical(goal)
        skipped_before = len(self.skipped)
        start = self.normalize(t)
        parent = {start: None}
        order = [start]
        frontier = [start]
        depth = 0
        complete = True
        solutions = []

        def hits(u):
            if goal is None:
                return True
            if anywhere:
                return bool(match_modulo(goal, u, self.E0))
            return next(_match(goal, u, self.E0, {}), None) is not None

        expand_queue = [(start, 0)]
        idx = 0
        while idx < len(expand_queue):
            u, d = expand_queue[idx]
            idx += 1
            steps = self._successors(u)
            if terminal:
                if not steps:
                    solutions.append(u)
            elif hits(u):
                solutions.append(u)
            if d >= depth_limit:
                for st in steps:
                    if self._nf(st.result) not in parent:
                        complete = False
                        break
                continue
            for st in steps:
                self._steps = 0
                v = self._nf(st.result)
                if v not in parent:
                    parent[v] = (u, TraceStep(st.rule, st.context, st.substitution, st.result, v))
                    expand_queue.append((v, d + 1))
                    depth = max(depth, d + 1)
        skipped = self.skipped[skipped_before:]
        if skipped:
            complete = False
        return SearchResult(
            [(u, self._trace_to(u, parent)) for u in solutions],
            complete,
            len(parent),
            depth,
            skipped,
        )

    def reachable(self, t: Term, max_depth: Optional[int] = None) -> SearchResult:
        return self.search(t, max_depth=max_depth)

    @staticmethod
    def _trace_to(u, parent) -> RewriteTrace:
        steps = []
        cur = u
        while parent[cur] is not None:
            prev, st = parent[cur]
            steps.append(st)
            cur = prev
        steps.reverse()
        return RewriteTrace(cur, steps)


@functools.lru_cache(maxsize=64)
def rewriter(mod: TheoryModule, limits: EngineLimits = DEFAULT_LIMITS) -> Rewriter:
    return Rewriter(mod, limits)


def normalize(t: Term, mod: TheoryModule, lim: EngineLimits = DEFAULT_LIMITS) -> Term:
    return rewriter(mod, lim).normalize(t)


def one_step(t: Term, mod: TheoryModule, lim: EngineLimits = DEFAULT_LIMITS) -> list[TraceStep]:
    return rewriter(mod, lim).one_step(t)


def search(t: Term, mod: TheoryModule, goal=None, lim: EngineLimits = DEFAULT_LIMITS, **kw) -> SearchResult:
    """``goal`` is a pattern term or the string ``"terminal"``."""
    if isinstance(goal, str):
        if goal != "terminal":
            raise ValueError(f"unknown goal {goal!r}")
        return rewriter(mod, lim).search(t, terminal=True, **kw)
    return rewriter(mod, lim).search(t, goal=goal, **kw)


def ground_terms(mod: TheoryModule, sort: str, max_size: int, min_size: int = 0) -> list[Term]:
    """Canonical ground terms of ``sort`` up to ``max_size``, ordered by (size, term order)."""
    table = _GroundTable(mod.signature, mod.axioms)
    out = []
    for k in range(min_size, max_size + 1):
        out.extend(table.get(sort, k))
    return out


class _GroundTable:
    def __init__(self, sig, E0):
        self.sig = sig
        self.E0 = E0
        self.memo = {}

    def get(self, sort, size):
        key = (sort, size)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        found = set()
        if size == 0:
            found.update(const(op) for op in self.sig.constants(sort))
        else:
            for op in self.sig.ops_into(sort):
                if op.is_constant:
                    continue
                assoc = op in self.E0.assoc
                for split in _compositions(size - 1, len(op.arity)):
                    pools = [self.get(s, k) for s, k in zip(op.arity, split)]
                    if assoc:
                        pools[0] = [x for x in pools[0] if not (isinstance(x, App) and x.op == op)]
                    for args in itertools.product(*pools):
                        found.add(canonical_form(App(op, args), self.E0))
        out = sorted(found, key=term_key)
        self.memo[key] = out
        return out


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def size_of(t: Term) -> int:
    return term_size(t)
