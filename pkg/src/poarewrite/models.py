"""Finite many-sorted algebras, optionally preordered on their system sorts."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .core import (
    And,
    App,
    Eq,
    Exists,
    Forall,
    Implies,
    Not,
    Op,
    Or,
    Signature,
    Sort,
    Term,
    Trans,
    Var,
    sentence_free_vars,
    term_key,
)
from .errors import AlgebraError, MissingPreorderError, ParseError


class FiniteAlgebra:
    """Carriers, total operation tables and (optionally) one preorder per system sort.

    ``preorders`` is ``None`` for a plain many-sorted algebra.  When given,
    each relation is the full set of pairs (the diagonal included) and is
    validated: reflexive, transitive, and every operation into a system
    sort is monotone in its system-sorted arguments.
    """

    def __init__(
        self,
        signature: Signature,
        carriers: Mapping[str, Iterable[str]],
        tables: Mapping[Op, Mapping[tuple, str]],
        preorders: Optional[Mapping[str, Iterable[tuple]]] = None,
        name: str = "",
        validate: bool = True,
    ):
        self.signature = signature
        self.name = name
        self.carriers = {s: tuple(carriers.get(s, ())) for s in signature.sorts}
        self.tables = {op: dict(tables.get(op, {})) for op in signature.ops}
        self.preorders = None
        if preorders is not None:
            self.preorders = {
                s: frozenset(tuple(p) for p in preorders.get(s, {(x, x) for x in self.carriers[s]}))
                for s in signature.system_sorts
            }
        if validate:
            self.validate()

    # -- validation

    def validate(self) -> None:
        for s, elems in self.carriers.items():
            if len(set(elems)) != len(elems):
                raise AlgebraError(f"carrier of {s} lists an element twice")
        for op in self.signature.ops:
            table = self.tables[op]
            target = set(self.carriers[op.sort])
            for args in itertools.product(*(self.carriers[s] for s in op.arity)):
                if args not in table:
                    raise AlgebraError(f"table of {op} has no entry for ({', '.join(args)})")
                if table[args] not in target:
                    raise AlgebraError(f"{op} maps ({', '.join(args)}) to {table[args]!r}, not in carrier of {op.sort}")
            extra = set(table) - set(itertools.product(*(self.carriers[s] for s in op.arity)))
            if extra:
                raise AlgebraError(f"table of {op} has rows outside its domain: {sorted(extra)[:3]}")
        if self.preorders is not None:
            for s, rel in self.preorders.items():
                check_preorder(rel, self.carriers[s], s)
            bad = monotonicity_violation(self)
            if bad:
                raise AlgebraError(bad)

    @property
    def is_poa(self) -> bool:
        return self.preorders is not None

    def leq(self, sort: str, a: str, b: str) -> bool:
        if self.preorders is None:
            raise MissingPreorderError(f"algebra {self.name or ''} has no preorder on {sort}")
        return (a, b) in self.preorders[sort]

    def apply(self, op: Op, args: tuple) -> str:
        try:
            return self.tables[op][tuple(args)]
        except KeyError:
            raise AlgebraError(f"{op} is not interpreted at ({', '.join(args)})") from None

    def with_preorders(self, preorders, name=None) -> "FiniteAlgebra":
        return FiniteAlgebra(self.signature, self.carriers, self.tables, preorders, name or self.name)

    def without_preorders(self) -> "FiniteAlgebra":
        return FiniteAlgebra(self.signature, self.carriers, self.tables, None, self.name, validate=False)

    def __eq__(self, other):
        return (
            isinstance(other, FiniteAlgebra)
            and self.signature == other.signature
            and self.carriers == other.carriers
            and self.tables == other.tables
            and self.preorders == other.preorders
        )

    def __repr__(self):
        sizes = ", ".join(f"{s}:{len(c)}" for s, c in sorted(self.carriers.items()))
        return f"FiniteAlgebra({self.name!r}, {sizes}{', poa' if self.is_poa else ''})"


def check_preorder(rel, carrier, sort="?") -> None:
    elems = set(carrier)
    for a, b in rel:
        if a not in elems or b not in elems:
            raise AlgebraError(f"preorder on {sort} relates elements outside its carrier: ({a}, {b})")
    for x in carrier:
        if (x, x) not in rel:
            raise AlgebraError(f"preorder on {sort} is not reflexive at {x}")
    succ: dict = {}
    for a, b in rel:
        succ.setdefault(a, set()).add(b)
    for a, b in rel:
        for c in succ.get(b, ()):
            if (a, c) not in rel:
                raise AlgebraError(f"preorder on {sort} is not transitive: ({a}, {b}), ({b}, {c}) but not ({a}, {c})")


def monotonicity_violation(A: FiniteAlgebra, rel=None) -> Optional[str]:
    """Description of the first non-monotone operation, or ``None``."""
    rel = A.preorders if rel is None else rel
    sig = A.signature
    for op in sig.ops:
        if not sig.is_system(op.sort):
            continue
        for i, s in enumerate(op.arity):
            if not sig.is_system(s):
                continue
            pairs = [p for p in rel[s] if p[0] != p[1]]
            if not pairs:
                continue
            others = [A.carriers[x] for j, x in enumerate(op.arity) if j != i]
            for rest in itertools.product(*others):
                for a, b in pairs:
                    lo = rest[:i] + (a,) + rest[i:]
                    hi = rest[:i] + (b,) + rest[i:]
                    fa, fb = A.tables[op][lo], A.tables[op][hi]
                    if (fa, fb) not in rel[op.sort]:
                        return (
                            f"{op.name} is not monotone in argument {i + 1}: {a} <= {b} but "
                            f"{op.name}({', '.join(lo)}) = {fa} is not <= {op.name}({', '.join(hi)}) = {fb}"
                        )
    return None


def discrete(A: FiniteAlgebra) -> dict:
    """The identity preorder on every system carrier."""
    return {s: frozenset((x, x) for x in A.carriers[s]) for s in A.signature.system_sorts}


def reflexive_transitive_closure(pairs, carrier) -> frozenset:
    idx = {x: i for i, x in enumerate(carrier)}
    n = len(carrier)
    reach = [1 << i for i in range(n)]
    for a, b in pairs:
        reach[idx[a]] |= 1 << idx[b]
    for k in range(n):
        bit = 1 << k
        rk = reach[k]
        for i in range(n):
            if reach[i] & bit:
                reach[i] |= rk
    return frozenset((carrier[i], carrier[j]) for i in range(n) for j in range(n) if reach[i] >> j & 1)


# -- evaluation and satisfaction ---------------------------------------------------


def evaluate(A: FiniteAlgebra, t: Term, v: Optional[Mapping[Var, str]] = None) -> str:
    """Value of ``t`` in ``A`` under the valuation ``v``."""
    v = v or {}
    if isinstance(t, Var):
        try:
            return v[t]
        except KeyError:
            raise AlgebraError(f"variable {t.name}:{t.sort} has no value") from None
    return A.apply(t.op, tuple(evaluate(A, a, v) for a in t.args))


def valuations(A: FiniteAlgebra, xs) -> Iterable[dict]:
    xs = list(xs)
    for vals in itertools.product(*(A.carriers[x.sort] for x in xs)):
        yield dict(zip(xs, vals))


def satisfies(A: FiniteAlgebra, rho, v: Optional[Mapping[Var, str]] = None) -> bool:
    """``A |= rho``; free variables not bound by ``v`` are read universally."""
    v = dict(v or {})
    free = sorted((x for x in sentence_free_vars(rho) if x not in v), key=term_key)
    if free:
        rho = Forall(tuple(free), rho)
    _require_preorder(A, rho)
    return _sat(A, rho, v)


def _require_preorder(A, rho):
    if A.preorders is None and _has_transition(rho):
        raise MissingPreorderError("sentence has transition atoms but the algebra has no preorder")


def _has_transition(rho) -> bool:
    if isinstance(rho, Trans):
        return True
    if isinstance(rho, Eq):
        return False
    if isinstance(rho, (And, Or)):
        return any(_has_transition(p) for p in rho.parts)
    if isinstance(rho, Implies):
        return _has_transition(rho.premise) or _has_transition(rho.conclusion)
    if isinstance(rho, Not):
        return _has_transition(rho.body)
    return _has_transition(rho.body)


def _sat(A, rho, v) -> bool:
    if isinstance(rho, Eq):
        return evaluate(A, rho.lhs, v) == evaluate(A, rho.rhs, v)
    if isinstance(rho, Trans):
        return (evaluate(A, rho.lhs, v), evaluate(A, rho.rhs, v)) in A.preorders[rho.lhs.sort]
    if isinstance(rho, And):
        return all(_sat(A, p, v) for p in rho.parts)
    if isinstance(rho, Or):
        return any(_sat(A, p, v) for p in rho.parts)
    if isinstance(rho, Implies):
        return not _sat(A, rho.premise, v) or _sat(A, rho.conclusion, v)
    if isinstance(rho, Not):
        return not _sat(A, rho.body, v)
    if isinstance(rho, Forall):
        # an empty carrier makes the universal vacuously true
        return all(_sat(A, rho.body, {**v, **w}) for w in valuations(A, rho.vars))
    if isinstance(rho, Exists):
        return any(_sat(A, rho.body, {**v, **w}) for w in valuations(A, rho.vars))
    raise TypeError(f"not a sentence: {rho!r}")


# -- homomorphisms -------------------------------------------------------------------


@dataclass
class Homomorphism:
    """Per-sort element maps ``maps[sort][a] = h_sort(a)``."""

    maps: dict

    def __call__(self, sort: str, x: str) -> str:
        return self.maps[sort][x]

    def inverse(self) -> "Homomorphism":
        inv = {}
        for s, m in self.maps.items():
            r = {b: a for a, b in m.items()}
            if len(r) != len(m):
                raise AlgebraError(f"map on {s} is not injective")
            inv[s] = r
        return Homomorphism(inv)

    def compose(self, other: "Homomorphism") -> "Homomorphism":
        """``self`` followed by ``other``."""
        return Homomorphism({s: {a: other.maps[s][b] for a, b in m.items()} for s, m in self.maps.items()})


def identity_hom(A: FiniteAlgebra) -> Homomorphism:
    return Homomorphism({s: {x: x for x in c} for s, c in A.carriers.items()})


def _as_hom(h) -> Homomorphism:
    return h if isinstance(h, Homomorphism) else Homomorphism(dict(h))


def homomorphism_violation(h, A: FiniteAlgebra, B: FiniteAlgebra, poa: bool = False) -> Optional[str]:
    """First reason ``h`` fails to be a homomorphism ``A -> B``, or ``None``."""
    h = _as_hom(h)
    if A.signature != B.signature:
        return "the algebras have different signatures"
    for s, elems in A.carriers.items():
        m = h.maps.get(s)
        if m is None:
            return f"no map given for sort {s}"
        for x in elems:
            if x not in m:
                return f"h_{s} is undefined at {x}"
            if m[x] not in B.carriers[s]:
                return f"h_{s}({x}) = {m[x]} is not in the carrier of {s} in the target"
    for op in A.signature.ops:
        for args, val in A.tables[op].items():
            image = tuple(h.maps[s][a] for s, a in zip(op.arity, args))
            if h.maps[op.sort][val] != B.tables[op][image]:
                return f"h does not commute with {op.name} at ({', '.join(args)})"
    if poa:
        if A.preorders is None or B.preorders is None:
            raise MissingPreorderError("POA homomorphism check needs preordered algebras")
        for s in A.signature.system_sorts:
            for a, b in A.preorders[s]:
                if (h.maps[s][a], h.maps[s][b]) not in B.preorders[s]:
                    return f"h is not monotone on {s}: {a} <= {b} but {h.maps[s][a]} is not <= {h.maps[s][b]}"
    return None


def check_homomorphism(h, A: FiniteAlgebra, B: FiniteAlgebra, poa: bool = False) -> bool:
    return homomorphism_violation(h, A, B, poa) is None


def check_isomorphism(h, A: FiniteAlgebra, B: FiniteAlgebra, poa: bool = False) -> bool:
    """Bijective homomorphism whose inverse is a homomorphism too (monotone ones with ``poa``)."""
    h = _as_hom(h)
    if not check_homomorphism(h, A, B, poa):
        return False
    for s, elems in A.carriers.items():
        image = {h.maps[s][x] for x in elems}
        if len(image) != len(elems) or image != set(B.carriers[s]):
            return False
    return check_homomorphism(h.inverse(), B, A, poa)


# -- reducts -------------------------------------------------------------------------


def reduct(A: FiniteAlgebra, phi, partial: bool = False) -> FiniteAlgebra:
    """The ``phi``-reduct of ``A``: each source symbol x is read as ``phi(x)`` in ``A``.

    ``phi`` needs ``source`` and ``target`` signatures and ``sort_of``/``op_of`` maps.
    With ``partial`` the source is first cut down to the sorts whose image
    has a carrier in ``A`` (and the operations over those sorts), which is
    how algebras read from files that leave out some sorts are handled.
    """
    src = phi.source
    if partial:
        keep = [s for s in src.sorts if phi.sort_of(s) in A.carriers]
        ops = [op for op in src.ops if op.sort in keep and all(x in keep for x in op.arity)]
        src = Signature([src.sorts[s] for s in keep], ops, src.name)
    carriers = {s: A.carriers[phi.sort_of(s)] for s in src.sorts}
    tables = {op: A.tables[phi.op_of(op)] for op in src.ops}
    pre = None
    if A.preorders is not None:
        pre = {s: A.preorders[phi.sort_of(s)] for s in src.system_sorts}
    return FiniteAlgebra(src, carriers, tables, pre, f"{A.name}|{getattr(phi, 'name', '')}", validate=False)


# -- text format ---------------------------------------------------------------------

_ALG_RE = re.compile(r"^\s*algebra\s+(\S+)\s+over\s+(\S+)\s*\{(.*)\}\s*$", re.S)


def parse_algebra(text: str, db=None, module=None) -> FiniteAlgebra:
    """Read the ``algebra NAME over MODULE { ... }`` block format.

    The algebra's signature is the module signature restricted to the
    sorts given a carrier (operations over other sorts are dropped).
    Preorders list the non-reflexive pairs; the diagonal is implied.  An
    algebra without any ``preorder`` statement is a plain many-sorted one.
    """
    from .surface import strip_comments

    m = _ALG_RE.match(strip_comments(text))
    if not m:
        raise ParseError("expected 'algebra NAME over MODULE { ... }'")
    name, modname, body = m.groups()
    if module is None:
        if db is None:
            raise ParseError("parse_algebra needs a module or a module database")
        module = db.get(modname)
    sig = getattr(module, "signature", module)
    carriers: dict = {}
    raw_ops = []
    pre_pairs: Optional[dict] = None
    for stmt in body.split(";"):
        stmt = stmt.strip()
        if not stmt:
            continue
        kw, _, rest = stmt.partition(" ")
        if kw == "carrier":
            s, sep, elems = rest.partition(":")
            s = s.strip()
            if not sep or s not in sig.sorts:
                raise ParseError(f"algebra {name}: bad carrier statement {stmt!r}")
            carriers[s] = elems.split()
        elif kw == "op":
            raw_ops.append(rest)
        elif kw == "preorder":
            s, sep, pairs = rest.partition(":")
            s = s.strip()
            if not sep or s not in sig.sorts:
                raise ParseError(f"algebra {name}: bad preorder statement {stmt!r}")
            pre_pairs = pre_pairs or {}
            pre_pairs.setdefault(s, set()).update(_pairs(pairs, name))
        else:
            raise ParseError(f"algebra {name}: unknown statement {kw!r}")
    kept = [op for op in sig.ops if op.sort in carriers and all(s in carriers for s in op.arity)]
    sub = Signature([sig.sorts[s] for s in sig.sorts if s in carriers], kept, sig.name)
    tables: dict = {}
    for rest in raw_ops:
        op, rows = _op_rows(rest, sub, name)
        if op in tables:
            raise ParseError(f"algebra {name}: operation {op} given twice")
        tables[op] = rows
    missing = [str(op) for op in kept if op not in tables]
    if missing:
        raise ParseError(f"algebra {name}: no table for {', '.join(missing)}")
    pre = None
    if pre_pairs is not None:
        pre = {}
        for s in sub.system_sorts:
            diag = {(x, x) for x in carriers[s]}
            pre[s] = diag | pre_pairs.get(s, set())
        for s in pre_pairs:
            if s not in pre:
                raise ParseError(f"algebra {name}: preorder given for data sort {s}")
    try:
        return FiniteAlgebra(sub, carriers, tables, pre, name)
    except AlgebraError as exc:
        raise ParseError(f"algebra {name}: {exc}") from None


def _pairs(text, name):
    out = set()
    for a, b in re.findall(r"\(\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)", text):
        out.add((a, b))
    leftover = re.sub(r"\(\s*[^,()\s]+\s*,\s*[^,()\s]+\s*\)", "", text).strip()
    if leftover:
        raise ParseError(f"algebra {name}: cannot read preorder pairs near {leftover!r}")
    return out


def _op_rows(rest, sig, name):
    head, sep, rows_text = rest.partition(" : ")
    if not sep:
        raise ParseError(f"algebra {name}: bad op statement {rest!r}")
    head = head.strip()
    opname, _, rank = head.partition("@")
    opname = opname.strip()
    cands = sig.ops_named(opname)
    if rank.strip():
        arity_txt, _, res = rank.partition("->")
        cands = [op for op in cands if op.arity == tuple(arity_txt.split()) and op.sort == res.strip()]
    if len(cands) != 1:
        raise ParseError(f"algebra {name}: operation {head!r} is {'ambiguous' if cands else 'unknown'}")
    op = cands[0]
    rows = {}
    for args, val in re.findall(r"\(([^()]*)\)\s*->\s*([^\s()]+)", rows_text):
        key = tuple(a.strip() for a in args.split(",")) if args.strip() else ()
        if len(key) != len(op.arity):
            raise ParseError(f"algebra {name}: row ({args}) of {op.name} has the wrong arity")
        if key in rows:
            raise ParseError(f"algebra {name}: row ({args}) of {op.name} given twice")
        rows[key] = val
    return op, rows


def format_algebra(A: FiniteAlgebra, module_name: Optional[str] = None) -> str:
    """Canonical text; parsing it back gives an equal algebra."""
    sig = A.signature
    lines = [f"algebra {A.name or 'A'} over {module_name or sig.name or 'M'} {{"]
    for s in sorted(sig.sorts):
        lines.append(f"  carrier {s} : {' '.join(A.carriers[s])} ;")
    for op in sig.ops:
        ranked = op.name
        if len(sig.ops_named(op.name)) > 1:
            ranked += f" @ {' '.join(op.arity)}{' ' if op.arity else ''}-> {op.sort}"
        rows = " ".join(
            f"({', '.join(args)}) -> {A.tables[op][args]}"
            for args in itertools.product(*(A.carriers[s] for s in op.arity))
        )
        lines.append(f"  op {ranked} : {rows} ;")
    if A.preorders is not None:
        for s in sig.system_sorts:
            lines.append(f"  {format_preorder(A.preorders[s], A.carriers[s], s)}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_preorder(rel, carrier, sort) -> str:
    pos = {x: i for i, x in enumerate(carrier)}
    pairs = sorted((p for p in rel if p[0] != p[1]), key=lambda p: (pos[p[0]], pos[p[1]]))
    body = " ".join(f"({a},{b})" for a, b in pairs)
    return f"preorder {sort} : {body} ;" if body else f"preorder {sort} : ;"


def algebra_from_functions(sig: Signature, carriers, funcs: Mapping[Op, object], preorders=None, name="") -> FiniteAlgebra:
    """Build tables by calling ``funcs[op](*args)`` on every argument tuple."""
    tables = {}
    for op in sig.ops:
        f = funcs[op]
        tables[op] = {
            args: (f(*args) if callable(f) else f)
            for args in itertools.product(*(carriers[s] for s in op.arity))
        }
    return FiniteAlgebra(sig, carriers, tables, preorders, name)


def sort_signature(sorts, ops, name="") -> Signature:
    """Convenience: ``sorts`` is a mapping name -> kind."""
    return Signature([Sort(n, k) for n, k in sorts.items()], ops, name)
