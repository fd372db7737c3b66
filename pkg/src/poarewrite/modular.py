"""Signature morphisms, translations, pushouts and amalgamation of models and rewrite relations."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .core import (
    DATA,
    SYSTEM,
    And,
    App,
    Axioms,
    Eq,
    Exists,
    Forall,
    Implies,
    Not,
    Op,
    Or,
    Rule,
    Signature,
    Sort,
    Term,
    TheoryModule,
    Trans,
    Var,
)
from .errors import AmalgamationError, ParseError, PushoutError, SignatureError, TranslationError
from .freeness import free_preorder
from .models import FiniteAlgebra, reduct


class SignatureMorphism:
    """A rank-compatible map of sorts and ranked operations.

    With ``strict`` (the default) data sorts must go to data sorts and
    system sorts to system sorts.
    """

    def __init__(
        self,
        source: Signature,
        target: Signature,
        sort_map: Mapping[str, str],
        op_map: Mapping[Op, Op],
        name: str = "",
        strict: bool = True,
        source_module: str = "",
        target_module: str = "",
    ):
        self.source = source
        self.target = target
        self.name = name
        self.source_module = source_module or source.name
        self.target_module = target_module or target.name
        self.sort_map = {s: sort_map.get(s, s) for s in source.sorts}
        self.op_map = {}
        for s, t in self.sort_map.items():
            if t not in target.sorts:
                raise SignatureError(f"sort {s} is mapped to {t}, which the target lacks")
            if strict and source.sorts[s].kind != target.sorts[t].kind:
                raise SignatureError(
                    f"sort {s} ({source.sorts[s].kind}) is mapped to {t} ({target.sorts[t].kind})"
                )
        for op in source.ops:
            img = op_map.get(op)
            want_arity = tuple(self.sort_map[x] for x in op.arity)
            want_sort = self.sort_map[op.sort]
            if img is None:
                img = Op(op.name, want_arity, want_sort)
            if img.arity != want_arity or img.sort != want_sort:
                raise SignatureError(f"{op} is mapped to {img}, whose rank does not match")
            if img not in target:
                raise SignatureError(f"{op} is mapped to {img}, which the target lacks")
            self.op_map[op] = img

    @classmethod
    def identity(cls, sig: Signature, name="id") -> "SignatureMorphism":
        return cls(sig, sig, {}, {}, name)

    @classmethod
    def inclusion(cls, source: Signature, target: Signature, name="incl", strict=True) -> "SignatureMorphism":
        return cls(source, target, {}, {}, name, strict)

    @classmethod
    def from_names(cls, source, target, sorts=None, ops=None, name="", strict=True, **kw) -> "SignatureMorphism":
        """Operation images given by name; ``ops`` keys are names or ranked ops."""
        sorts = dict(sorts or {})
        sort_map = {s: sorts.get(s, s) for s in source.sorts}
        op_map = {}
        for key, new in (ops or {}).items():
            olds = [key] if isinstance(key, Op) else source.ops_named(key)
            if not olds:
                raise SignatureError(f"the source has no operation {key}")
            for old in olds:
                if isinstance(new, Op):
                    op_map[old] = new
                else:
                    op_map[old] = Op(new, tuple(sort_map[x] for x in old.arity), sort_map[old.sort])
        return cls(source, target, sort_map, op_map, name, strict, **kw)

    def sort_of(self, s: str) -> str:
        try:
            return self.sort_map[s]
        except KeyError:
            raise TranslationError(f"sort {s} is outside the domain of {self.name or 'the morphism'}") from None

    def op_of(self, op: Op) -> Op:
        try:
            return self.op_map[op]
        except KeyError:
            raise TranslationError(f"operation {op} is outside the domain of {self.name or 'the morphism'}") from None

    def then(self, other: "SignatureMorphism", name="") -> "SignatureMorphism":
        """``self`` followed by ``other``."""
        return SignatureMorphism(
            self.source,
            other.target,
            {s: other.sort_of(t) for s, t in self.sort_map.items()},
            {o: other.op_of(p) for o, p in self.op_map.items()},
            name or f"{self.name};{other.name}",
            strict=False,
        )

    def __eq__(self, other):
        return (
            isinstance(other, SignatureMorphism)
            and self.source == other.source
            and self.target == other.target
            and self.sort_map == other.sort_map
            and self.op_map == other.op_map
        )

    def __repr__(self):
        return f"SignatureMorphism({self.name!r}: {self.source_module} -> {self.target_module})"


def translate_term(phi: SignatureMorphism, t: Term) -> Term:
    if isinstance(t, Var):
        return Var(t.name, phi.sort_of(t.sort))
    return App(phi.op_of(t.op), tuple(translate_term(phi, a) for a in t.args))


def translate_sentence(phi: SignatureMorphism, rho):
    """Rename sorts and operations throughout ``rho``."""
    if isinstance(rho, (Eq, Trans)):
        return type(rho)(translate_term(phi, rho.lhs), translate_term(phi, rho.rhs))
    if isinstance(rho, (And, Or)):
        return type(rho)(tuple(translate_sentence(phi, p) for p in rho.parts))
    if isinstance(rho, Implies):
        return Implies(translate_sentence(phi, rho.premise), translate_sentence(phi, rho.conclusion))
    if isinstance(rho, Not):
        return Not(translate_sentence(phi, rho.body))
    if isinstance(rho, (Forall, Exists)):
        xs = tuple(translate_term(phi, x) for x in rho.vars)
        if len(set(xs)) != len(xs):
            raise TranslationError("two quantified variables collapse to the same name and sort")
        return type(rho)(xs, translate_sentence(phi, rho.body))
    raise TranslationError(f"not a sentence: {rho!r}")


def translate_rule(phi: SignatureMorphism, r: Rule) -> Rule:
    conds = tuple(translate_sentence(phi, c) for c in r.conditions)
    return Rule(r.kind, translate_term(phi, r.lhs), translate_term(phi, r.rhs), conds, r.label)


# -- pushouts -------------------------------------------------------------------------------


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


@dataclass
class TheorySquare:
    """``phi1 : base -> S1``, ``phi2 : base -> S2``, ``theta1 : S1 -> S'``, ``theta2 : S2 -> S'``."""

    phi1: SignatureMorphism
    phi2: SignatureMorphism
    theta1: SignatureMorphism
    theta2: SignatureMorphism

    @property
    def base(self) -> Signature:
        return self.phi1.source

    @property
    def apex(self) -> Signature:
        return self.theta1.target

    def commutes(self) -> bool:
        a = self.phi1.then(self.theta1)
        b = self.phi2.then(self.theta2)
        return a.sort_map == b.sort_map and a.op_map == b.op_map


def pushout(phi1: SignatureMorphism, phi2: SignatureMorphism, name: str = "") -> TheorySquare:
    """Amalgamated union of the two targets over the common source.

    Symbols are classes of (side, symbol) pairs glued along the two
    morphisms.  A class keeps its name unless another class of the same
    name (and, for operations, the same rank) exists, in which case the
    private symbols are qualified as ``Module.symbol``.
    """
    if phi1.source != phi2.source:
        raise PushoutError("the two morphisms do not share their source signature")
    sides = {1: phi1, 2: phi2}
    mods = {1: phi1.target_module or "M1", 2: phi2.target_module or "M2"}
    if mods[1] == mods[2]:
        mods = {1: mods[1] + "1", 2: mods[2] + "2"}
    uf = _UnionFind()
    for k, phi in sides.items():
        for s in phi.target.sorts:
            uf.find(("sort", k, s))
        for op in phi.target.ops:
            uf.find(("op", k, op))
    for s in phi1.source.sorts:
        uf.union(("sort", 1, phi1.sort_of(s)), ("sort", 2, phi2.sort_of(s)))
    for op in phi1.source.ops:
        uf.union(("op", 1, phi1.op_of(op)), ("op", 2, phi2.op_of(op)))

    sort_classes: dict = {}
    for k, phi in sides.items():
        for s in phi.target.sorts:
            sort_classes.setdefault(uf.find(("sort", k, s)), []).append((k, s))
    kinds = {}
    for root, members in sort_classes.items():
        ks = {sides[k].target.sorts[s].kind for k, s in members}
        if len(ks) > 1:
            where = ", ".join(f"{mods[k]}.{s}" for k, s in members)
            raise PushoutError(f"sort class {{{where}}} is data on one side and system on the other")
        kinds[root] = ks.pop()
    sort_name = _name_classes(sort_classes, mods, key=lambda root, nm: nm)

    op_classes: dict = {}
    for k, phi in sides.items():
        for op in phi.target.ops:
            op_classes.setdefault(uf.find(("op", k, op)), []).append((k, op))

    def op_rank(root):
        k, op = min(op_classes[root], key=lambda m: (m[0], m[1]))
        return (
            tuple(sort_name[uf.find(("sort", k, x))] for x in op.arity),
            sort_name[uf.find(("sort", k, op.sort))],
        )

    ranks = {root: op_rank(root) for root in op_classes}
    for root, members in op_classes.items():
        for k, op in members:
            mapped = (
                tuple(sort_name[uf.find(("sort", k, x))] for x in op.arity),
                sort_name[uf.find(("sort", k, op.sort))],
            )
            if mapped != ranks[root]:
                raise PushoutError(f"operation class of {op} has inconsistent ranks")
    op_named = {root: (n.name if isinstance(n, Op) else n) for root, n in
                _name_classes({r: [(k, op.name) for k, op in m] for r, m in op_classes.items()},
                              mods, key=lambda root, nm: (nm, ranks[root])).items()}
    new_ops = {root: Op(op_named[root], *ranks[root]) for root in op_classes}
    sig = Signature(
        [Sort(sort_name[r], kinds[r]) for r in sort_classes],
        new_ops.values(),
        name or f"{mods[1]}+{mods[2]}",
    )
    thetas = {}
    for k, phi in sides.items():
        thetas[k] = SignatureMorphism(
            phi.target,
            sig,
            {s: sort_name[uf.find(("sort", k, s))] for s in phi.target.sorts},
            {op: new_ops[uf.find(("op", k, op))] for op in phi.target.ops},
            f"theta{k}",
            source_module=phi.target_module,
            target_module=sig.name,
        )
    return TheorySquare(phi1, phi2, thetas[1], thetas[2])


def _name_classes(classes, mods, key):
    """Pick a name per class; qualify only where two classes would collide."""
    proposed = {}
    for root, members in classes.items():
        names = sorted({nm for _, nm in members})
        k0, _ = min(members)
        proposed[root] = (names[0] if len(names) == 1 else min(members)[1], {k for k, _ in members})
    buckets: dict = {}
    for root, (nm, ks) in proposed.items():
        buckets.setdefault(key(root, nm), []).append(root)
    out = {}
    for bucket in buckets.values():
        for root in bucket:
            nm, ks = proposed[root]
            if len(bucket) > 1 and len(ks) == 1:
                out[root] = f"{mods[next(iter(ks))]}.{nm}"
            else:
                out[root] = nm
    if len(set((key(r, n)) for r, n in out.items())) != len(out):
        raise PushoutError("could not give the pushout symbols distinct names")
    return out


def pushout_modules(phi1: SignatureMorphism, phi2: SignatureMorphism, M1: TheoryModule, M2: TheoryModule, name=""):
    """The pushout square and the module carrying both translated theories."""
    sq = pushout(phi1, phi2, name)
    sig = sq.apex
    eqs, rls = [], []
    assoc, comm = set(), set()
    for theta, M in ((sq.theta1, M1), (sq.theta2, M2)):
        for r in M.equations:
            tr = translate_rule(theta, r)
            if tr not in eqs:
                eqs.append(tr)
        for r in M.transitions:
            tr = translate_rule(theta, r)
            if tr not in rls:
                rls.append(tr)
        assoc |= {theta.op_of(op) for op in M.axioms.assoc}
        comm |= {theta.op_of(op) for op in M.axioms.comm}
    eqs = [Rule(r.kind, r.lhs, r.rhs, r.conditions, f"eq{i + 1}") for i, r in enumerate(eqs)]
    rls = [Rule(r.kind, r.lhs, r.rhs, r.conditions, f"rl{i + 1}") for i, r in enumerate(rls)]
    mod = TheoryModule(sig.name, sig, Axioms(assoc, comm), tuple(eqs), tuple(rls))
    return sq, mod


# -- amalgamation ---------------------------------------------------------------------------


def first_difference(A: FiniteAlgebra, B: FiniteAlgebra) -> Optional[str]:
    if A.signature != B.signature:
        return "signature"
    for s in sorted(A.signature.sorts):
        if set(A.carriers[s]) != set(B.carriers[s]):
            return f"carrier of {s}"
    for op in A.signature.ops:
        if A.tables[op] != B.tables[op]:
            return f"operation {op}"
    if (A.preorders is None) != (B.preorders is None):
        return "presence of preorders"
    if A.preorders is not None:
        for s in sorted(A.preorders):
            if A.preorders[s] != B.preorders[s]:
                return f"preorder on {s}"
    return None


def amalgamate_models(square: TheorySquare, M1: FiniteAlgebra, M2: FiniteAlgebra, name="") -> FiniteAlgebra:
    """The unique apex algebra whose reducts along the two injections are ``M1`` and ``M2``.

    Sorts without a carrier in the given algebras (typically the implicit
    Bool) are left out of the result, together with their operations.
    """
    diff = first_difference(reduct(M1, square.phi1, True), reduct(M2, square.phi2, True))
    if diff:
        raise AmalgamationError(f"the models disagree on the shared part: {diff}")
    apex = square.apex
    carriers, tables, pre = {}, {}, {}
    poa = M1.is_poa and M2.is_poa
    for theta, M in ((square.theta1, M1), (square.theta2, M2)):
        for s, s2 in theta.sort_map.items():
            if s not in M.carriers:
                continue
            if s2 in carriers and set(carriers[s2]) != set(M.carriers[s]):
                raise AmalgamationError(f"two sorts glued into {s2} have different carriers")
            carriers.setdefault(s2, M.carriers[s])
            if poa and s in M.preorders:
                if s2 in pre and pre[s2] != M.preorders[s]:
                    raise AmalgamationError(f"two preorders glued into {s2} differ")
                pre[s2] = M.preorders[s]
        for op, op2 in theta.op_map.items():
            if op not in M.tables:
                continue
            if op2 in tables and tables[op2] != M.tables[op]:
                raise AmalgamationError(f"two operations glued into {op2} differ")
            tables.setdefault(op2, M.tables[op])
    ops = [op for op in apex.ops if op.sort in carriers and all(x in carriers for x in op.arity)]
    apex = Signature([apex.sorts[s] for s in apex.sorts if s in carriers], ops, apex.name)
    missing = [str(op) for op in ops if op not in tables]
    if missing:
        raise AmalgamationError(f"operations {missing} are not covered by either side")
    out = FiniteAlgebra(apex, carriers, tables, pre if poa else None, name or f"{M1.name}+{M2.name}")
    for theta, M in ((square.theta1, M1), (square.theta2, M2)):
        back = reduct(out, theta, True)
        if not poa and M.is_poa:
            back = back.with_preorders(M.preorders)
        d = first_difference(back, M)
        if d:
            raise AmalgamationError(f"amalgamated model does not restrict back correctly: {d}")
    return out


HOLDS = "equal"
UNEQUAL = "unequal"
HYPOTHESIS_FAILURE = "hypothesis-failure"


@dataclass
class AmalgamationReport:
    status: str
    witness: Optional[tuple] = None
    relation: Optional[dict] = None
    union: Optional[dict] = None

    @property
    def ok(self) -> bool:
        return self.status == HOLDS


def check_rewrite_amalgamation(
    square: TheorySquare, Bp: FiniteAlgebra, Gamma1: Sequence[Rule], Gamma2: Sequence[Rule]
) -> AmalgamationReport:
    """Compare the free preorder of the combined transitions with the union of the component ones."""
    B1 = reduct(Bp, square.theta1)
    B2 = reduct(Bp, square.theta2)
    R1 = free_preorder(B1, Gamma1).relation
    R2 = free_preorder(B2, Gamma2).relation
    base = square.base
    for s in base.system_sorts:
        r1 = R1[square.phi1.sort_of(s)]
        r2 = R2[square.phi2.sort_of(s)]
        if r1 != r2:
            only1 = sorted(r1 - r2)
            if only1:
                return AmalgamationReport(HYPOTHESIS_FAILURE, (s, *only1[0], "side 1 only"))
            return AmalgamationReport(HYPOTHESIS_FAILURE, (s, *sorted(r2 - r1)[0], "side 2 only"))
    gamma = [translate_rule(square.theta1, r) for r in Gamma1] + [translate_rule(square.theta2, r) for r in Gamma2]
    Rp = free_preorder(Bp, gamma).relation
    union = {s: set() for s in square.apex.system_sorts}
    for theta, R in ((square.theta1, R1), (square.theta2, R2)):
        for s, rel in R.items():
            union[theta.sort_of(s)] |= rel
    union = {s: frozenset(v) for s, v in union.items()}
    for s in sorted(Rp):
        if Rp[s] != union[s]:
            extra = sorted(Rp[s] - union[s]) or sorted(union[s] - Rp[s])
            return AmalgamationReport(UNEQUAL, (s, *extra[0]), Rp, union)
    return AmalgamationReport(HOLDS, None, Rp, union)


# -- text format ----------------------------------------------------------------------------

_MORPH_RE = re.compile(r"^\s*morphism\s+(\S+)\s*:\s*(\S+)\s*->\s*(\S+)\s*\{(.*)\}\s*$", re.S)


def parse_morphism(text: str, db) -> SignatureMorphism:
    """``morphism NAME : M1 -> M2 { sort A |-> B ; op f |-> g ; }``; unlisted symbols map to themselves.

    ``op f @ Nat -> Nat |-> g`` selects one overload.
    """
    from .surface import strip_comments

    m = _MORPH_RE.match(strip_comments(text))
    if not m:
        raise ParseError("expected 'morphism NAME : M1 -> M2 { ... }'")
    name, a, b, body = m.groups()
    src, dst = db.get(a), db.get(b)
    sorts, ops = {}, {}
    for stmt in body.split(";"):
        stmt = stmt.strip()
        if not stmt:
            continue
        kw, _, rest = stmt.partition(" ")
        lhs, sep, rhs = rest.partition("|->")
        if not sep:
            raise ParseError(f"morphism {name}: expected '|->' in {stmt!r}")
        lhs, rhs = lhs.strip(), rhs.strip()
        if kw == "sort":
            if lhs not in src.signature.sorts:
                raise ParseError(f"morphism {name}: {a} has no sort {lhs}")
            sorts[lhs] = rhs
        elif kw == "op":
            opname, _, rank = lhs.partition("@")
            cands = src.signature.ops_named(opname.strip())
            if rank.strip():
                ar, _, res = rank.partition("->")
                cands = [o for o in cands if o.arity == tuple(ar.split()) and o.sort == res.strip()]
            if not cands:
                raise ParseError(f"morphism {name}: {a} has no operation {lhs}")
            for o in cands:
                ops[o] = rhs
        else:
            raise ParseError(f"morphism {name}: unknown statement {kw!r}")
    try:
        return SignatureMorphism.from_names(
            src.signature, dst.signature, sorts, ops, name, source_module=a, target_module=b
        )
    except SignatureError as exc:
        raise ParseError(f"morphism {name}: {exc}") from None


def format_morphism(phi: SignatureMorphism) -> str:
    lines = [f"morphism {phi.name or 'phi'} : {phi.source_module} -> {phi.target_module} {{"]
    for s in sorted(phi.sort_map):
        if phi.sort_map[s] != s:
            lines.append(f"  sort {s} |-> {phi.sort_map[s]} ;")
    for op in phi.source.ops:
        img = phi.op_map[op]
        if img.name != op.name:
            rank = ""
            if len(phi.source.ops_named(op.name)) > 1:
                rank = f" @ {' '.join(op.arity)}{' ' if op.arity else ''}-> {op.sort}"
            lines.append(f"  op {op.name}{rank} |-> {img.name} ;")
    lines.append("}")
    return "\n".join(lines) + "\n"
