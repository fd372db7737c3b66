"""Signatures, terms, substitutions, contexts, sentences, rules and theory modules.

Sorts are referred to by name everywhere; a :class:`Signature` records
whether each sort is a data sort or a system sort.  Terms are immutable
trees whose nodes carry fully ranked operation symbols, so overloading
is resolved once (by the parser) and never again.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import ContextError, SignatureError, SortError, SubstitutionError

DATA = "data"
SYSTEM = "system"

# Variables whose names start with this prefix are reserved; the parser
# never produces them, so a hole can not capture a user variable.
RESERVED_PREFIX = "%"


@dataclass(frozen=True, order=True)
class Sort:
    name: str
    kind: str = DATA

    def __post_init__(self):
        if self.kind not in (DATA, SYSTEM):
            raise SignatureError(f"unknown sort kind {self.kind!r}")


@dataclass(frozen=True, order=True)
class Op:
    """A ranked operation symbol ``name : arity -> sort``."""

    name: str
    arity: tuple[str, ...]
    sort: str

    def __post_init__(self):
        object.__setattr__(self, "arity", tuple(self.arity))

    @property
    def is_constant(self) -> bool:
        return not self.arity

    def __str__(self):
        args = " ".join(self.arity)
        return f"{self.name} : {args}{' ' if args else ''}-> {self.sort}"


class Signature:
    """Data sorts, system sorts and ranked operation symbols (overloading allowed)."""

    def __init__(self, sorts: Iterable[Sort] = (), ops: Iterable[Op] = (), name: str = ""):
        self.name = name
        self.sorts: dict[str, Sort] = {}
        for s in sorts:
            if s.name in self.sorts and self.sorts[s.name] != s:
                raise SignatureError(f"sort {s.name} declared as both data and system")
            self.sorts[s.name] = s
        seen = set()
        for op in ops:
            for srt in (*op.arity, op.sort):
                if srt not in self.sorts:
                    raise SignatureError(f"operation {op} mentions undeclared sort {srt}")
            seen.add(op)
        self.ops: tuple[Op, ...] = tuple(sorted(seen))
        self._by_name: dict[str, list[Op]] = {}
        for op in self.ops:
            self._by_name.setdefault(op.name, []).append(op)

    def __eq__(self, other):
        return isinstance(other, Signature) and self.sorts == other.sorts and self.ops == other.ops

    def __hash__(self):
        return hash((tuple(sorted(self.sorts.values())), self.ops))

    def __repr__(self):
        return f"Signature({self.name!r}, sorts={sorted(self.sorts)}, ops={len(self.ops)})"

    @property
    def data_sorts(self) -> list[str]:
        return sorted(s.name for s in self.sorts.values() if s.kind == DATA)

    @property
    def system_sorts(self) -> list[str]:
        return sorted(s.name for s in self.sorts.values() if s.kind == SYSTEM)

    def is_system(self, sort: str) -> bool:
        return self.sorts[sort].kind == SYSTEM

    def ops_named(self, name: str) -> list[Op]:
        return list(self._by_name.get(name, ()))

    def constants(self, sort: str) -> list[Op]:
        return [op for op in self.ops if op.is_constant and op.sort == sort]

    def ops_into(self, sort: str) -> list[Op]:
        return [op for op in self.ops if op.sort == sort]

    def __contains__(self, op) -> bool:
        return op in self._by_name.get(getattr(op, "name", None), ())

    def with_kinds(self, system: Iterable[str]) -> "Signature":
        system = set(system)
        sorts = [Sort(n, SYSTEM if n in system else DATA) for n in self.sorts]
        return Signature(sorts, self.ops, self.name)

    def extend(self, sorts: Iterable[Sort] = (), ops: Iterable[Op] = (), name=None) -> "Signature":
        return Signature([*self.sorts.values(), *sorts], [*self.ops, *ops], self.name if name is None else name)


class Var:
    __slots__ = ("name", "sort", "_hash")

    def __init__(self, name: str, sort: str):
        self.name = name
        self.sort = sort
        self._hash = hash(("var", name, sort))

    def __eq__(self, other):
        return self is other or (isinstance(other, Var) and self.name == other.name and self.sort == other.sort)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Var({self.name!r}, {self.sort!r})"

    def __str__(self):
        return self.name

    def __reduce__(self):
        return (Var, (self.name, self.sort))


class App:
    """Application of a ranked operation symbol to argument terms."""

    __slots__ = ("op", "args", "_hash", "_key", "_size")

    def __init__(self, op: Op, args: Sequence["Term"] = ()):
        self.op = op
        self.args = tuple(args)
        self._hash = hash((op, self.args))
        self._key = None
        self._size = None

    @property
    def sort(self) -> str:
        return self.op.sort

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, App)
            and self._hash == other._hash
            and self.op == other.op
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if not self.args:
            return self.op.name
        return f"{self.op.name}({', '.join(map(repr, self.args))})"

    def __reduce__(self):
        return (App, (self.op, self.args))


Term = Union[Var, App]
Substitution = Mapping[Var, Term]


def const(op: Op) -> App:
    return App(op, ())


def is_var(t) -> bool:
    return isinstance(t, Var)


def term_key(t: Term):
    """Total order on terms: variables first, then (name, rank, children) lexicographically."""
    if isinstance(t, Var):
        return (0, t.name, t.sort)
    k = t._key
    if k is None:
        k = (1, t.op.name, t.op.arity, t.op.sort, tuple(term_key(a) for a in t.args))
        t._key = k
    return k


def term_size(t: Term) -> int:
    """Number of applications of non-constant operations.

    Constants and variables are free, so a size bound limits the nesting
    of operations; the count is invariant under associativity and
    commutativity rearrangements.
    """
    if isinstance(t, Var):
        return 0
    s = t._size
    if s is None:
        s = (1 if t.args else 0) + sum(term_size(a) for a in t.args)
        t._size = s
    return s


def variables(t: Term) -> set[Var]:
    out: set[Var] = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, Var):
            out.add(u)
        else:
            stack.extend(u.args)
    return out


def is_ground(t: Term) -> bool:
    return not variables(t)


def subterm(t: Term, path: Sequence[int]) -> Term:
    for i in path:
        t = t.args[i]
    return t


def sort_of(t: Term, sig: Signature, _path=()) -> str:
    """Result sort of ``t``; raises :class:`SortError` naming the offending position."""
    if isinstance(t, Var):
        if t.sort not in sig.sorts:
            raise SortError(f"variable {t.name} has undeclared sort {t.sort}", _path)
        return t.sort
    if t.op not in sig:
        raise SortError(f"operation {t.op} is not in the signature", _path)
    if len(t.args) != len(t.op.arity):
        raise SortError(f"{t.op.name} expects {len(t.op.arity)} arguments, got {len(t.args)}", _path)
    for i, (a, want) in enumerate(zip(t.args, t.op.arity)):
        got = sort_of(a, sig, _path + (i + 1,))
        if got != want:
            where = ".".join(map(str, _path + (i + 1,)))
            raise SortError(
                f"argument {i + 1} of {t.op.name} (position {where}) has sort {got}, expected {want}",
                _path + (i + 1,),
            )
    return t.op.sort


def check_substitution(theta: Substitution) -> None:
    for x, u in theta.items():
        if u.sort != x.sort:
            raise SubstitutionError(f"{x.name}:{x.sort} mapped to a term of sort {u.sort}")


def apply_substitution(theta: Substitution, t: Term) -> Term:
    """Homomorphic extension of ``theta`` to terms; unmapped variables stay put."""
    check_substitution(theta)
    return _subst(theta, t)


def _subst(theta, t):
    if isinstance(t, Var):
        return theta.get(t, t)
    if not t.args:
        return t
    new = tuple(_subst(theta, a) for a in t.args)
    if all(a is b for a, b in zip(new, t.args)):
        return t
    return App(t.op, new)


def compose(theta: Substitution, theta2: Substitution) -> dict[Var, Term]:
    """The substitution equal to applying ``theta`` and then ``theta2``."""
    out = {x: _subst(theta2, u) for x, u in theta.items()}
    for y, u in theta2.items():
        out.setdefault(y, u)
    return out


def hole(sort: str) -> Var:
    return Var(RESERVED_PREFIX + "z", sort)


def is_hole(t) -> bool:
    return isinstance(t, Var) and t.name.startswith(RESERVED_PREFIX)


@dataclass(frozen=True)
class Context:
    """A term with exactly one occurrence of the hole variable, at ``path``."""

    term: Term
    path: tuple[int, ...]

    @property
    def hole_sort(self) -> str:
        return subterm(self.term, self.path).sort

    def plug(self, u: Term) -> Term:
        if u.sort != self.hole_sort:
            raise ContextError(f"cannot plug a {u.sort} term into a {self.hole_sort} hole")
        return _replace(self.term, self.path, u)

    def __str__(self):
        return f"{self.term!r}@{'.'.join(map(str, self.path)) or 'root'}"


def context_at(t: Term, path: Sequence[int]) -> Context:
    path = tuple(path)
    return Context(_replace(t, path, hole(subterm(t, path).sort)), path)


def _replace(t: Term, path, u: Term) -> Term:
    if not path:
        return u
    i = path[0]
    args = list(t.args)
    args[i] = _replace(args[i], path[1:], u)
    return App(t.op, args)


def positions(t: Term, sig: Signature, system_only: bool = False) -> list[tuple[Context, Term]]:
    """Every decomposition ``t = c[u]`` in pre-order of the hole path.

    With ``system_only`` the hole and every node above it must have a
    system sort, which is what transition rewriting requires.
    """
    out = []

    def walk(u, path):
        if system_only and not sig.is_system(u.sort):
            return
        out.append((context_at(t, path), u))
        if isinstance(u, App):
            for i, a in enumerate(u.args):
                walk(a, path + (i,))

    walk(t, ())
    return out


def replace_at(t: Term, c: Context, u: Term) -> Term:
    """Replace the subterm of ``t`` at the hole position of ``c`` by ``u``."""
    try:
        old = subterm(t, c.path)
    except (IndexError, AttributeError):
        raise ContextError(f"path {c.path} does not exist in the term") from None
    if old.sort != u.sort:
        raise ContextError(f"cannot put a {u.sort} term at a {old.sort} position")
    return _replace(t, c.path, u)


# -- sentences --------------------------------------------------------------


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term

    def __str__(self):
        return f"{self.lhs!r} = {self.rhs!r}"


@dataclass(frozen=True)
class Trans:
    lhs: Term
    rhs: Term

    def __str__(self):
        return f"{self.lhs!r} => {self.rhs!r}"


@dataclass(frozen=True)
class And:
    parts: tuple = ()


@dataclass(frozen=True)
class Or:
    parts: tuple = ()


@dataclass(frozen=True)
class Implies:
    premise: object
    conclusion: object


@dataclass(frozen=True)
class Not:
    body: object


@dataclass(frozen=True)
class Forall:
    vars: tuple
    body: object


@dataclass(frozen=True)
class Exists:
    vars: tuple
    body: object


Atom = Union[Eq, Trans]
Sentence = Union[Eq, Trans, And, Or, Implies, Not, Forall, Exists]


def sentence_free_vars(rho) -> set[Var]:
    if isinstance(rho, (Eq, Trans)):
        return variables(rho.lhs) | variables(rho.rhs)
    if isinstance(rho, (And, Or)):
        return set().union(*(sentence_free_vars(p) for p in rho.parts)) if rho.parts else set()
    if isinstance(rho, Implies):
        return sentence_free_vars(rho.premise) | sentence_free_vars(rho.conclusion)
    if isinstance(rho, Not):
        return sentence_free_vars(rho.body)
    if isinstance(rho, (Forall, Exists)):
        return sentence_free_vars(rho.body) - set(rho.vars)
    raise TypeError(f"not a sentence: {rho!r}")


def check_sentence(sig: Signature, rho) -> None:
    """Sort-check every atom; transition atoms must relate system-sorted terms."""
    if isinstance(rho, (Eq, Trans)):
        a, b = sort_of(rho.lhs, sig), sort_of(rho.rhs, sig)
        if a != b:
            raise SortError(f"atom {rho} relates sorts {a} and {b}")
        if isinstance(rho, Trans) and not sig.is_system(a):
            raise SortError(f"transition atom over data sort {a}")
    elif isinstance(rho, (And, Or)):
        for p in rho.parts:
            check_sentence(sig, p)
    elif isinstance(rho, Implies):
        check_sentence(sig, rho.premise)
        check_sentence(sig, rho.conclusion)
    elif isinstance(rho, Not):
        check_sentence(sig, rho.body)
    elif isinstance(rho, (Forall, Exists)):
        check_sentence(sig, rho.body)
    else:
        raise TypeError(f"not a sentence: {rho!r}")


# -- rules and modules -------------------------------------------------------

EQUATION = "eq"
TRANSITION = "rl"


@dataclass(frozen=True)
class Rule:
    """A conditional equation or transition ``forall X . H => lhs (=|=>) rhs``."""

    kind: str
    lhs: Term
    rhs: Term
    conditions: tuple = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if self.lhs.sort != self.rhs.sort:
            raise SortError(f"rule {self.label or ''} relates sorts {self.lhs.sort} and {self.rhs.sort}")
        if self.kind not in (EQUATION, TRANSITION):
            raise ValueError(f"rule kind must be {EQUATION!r} or {TRANSITION!r}")

    @property
    def variables(self) -> set[Var]:
        out = variables(self.lhs) | variables(self.rhs)
        for c in self.conditions:
            out |= variables(c.lhs) | variables(c.rhs)
        return out

    @property
    def eq_conditions(self) -> tuple:
        return tuple(c for c in self.conditions if isinstance(c, Eq))

    @property
    def tr_conditions(self) -> tuple:
        return tuple(c for c in self.conditions if isinstance(c, Trans))

    @property
    def is_executable(self) -> bool:
        return self.variables <= variables(self.lhs)

    def as_sentence(self):
        concl = Trans(self.lhs, self.rhs) if self.kind == TRANSITION else Eq(self.lhs, self.rhs)
        body = Implies(And(self.conditions), concl) if self.conditions else concl
        xs = tuple(sorted(self.variables, key=term_key))
        return Forall(xs, body) if xs else body

    def __str__(self):
        arrow = "=>" if self.kind == TRANSITION else "="
        s = f"{self.lhs!r} {arrow} {self.rhs!r}"
        if self.conditions:
            s += " if " + " /\\ ".join(map(str, self.conditions))
        return s


ASSOC = "assoc"
COMM = "comm"


@dataclass(frozen=True)
class Axioms:
    """Structural axioms: which binary operations are associative and/or commutative."""

    assoc: frozenset = frozenset()
    comm: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "assoc", frozenset(self.assoc))
        object.__setattr__(self, "comm", frozenset(self.comm))
        for op in self.assoc | self.comm:
            if len(op.arity) != 2 or op.arity[0] != op.arity[1] or op.arity[0] != op.sort:
                raise SignatureError(f"structural axioms need an operation s s -> s, not {op}")

    def flags(self, op: Op) -> frozenset:
        out = set()
        if op in self.assoc:
            out.add(ASSOC)
        if op in self.comm:
            out.add(COMM)
        return frozenset(out)

    def __bool__(self):
        return bool(self.assoc or self.comm)

    def union(self, other: "Axioms") -> "Axioms":
        return Axioms(self.assoc | other.assoc, self.comm | other.comm)

    def restrict(self, ops) -> "Axioms":
        ops = set(ops)
        return Axioms(self.assoc & ops, self.comm & ops)


NO_AXIOMS = Axioms()


@dataclass(frozen=True, eq=False)
class TheoryModule:
    """Signature, structural axioms E0, equations E1 and transitions Gamma."""

    name: str
    signature: Signature
    axioms: Axioms = NO_AXIOMS
    equations: tuple = ()
    transitions: tuple = ()
    variables: Mapping[str, Var] = field(default_factory=dict)
    protected_sorts: frozenset = frozenset()
    protected_ops: frozenset = frozenset()
    imports: tuple = ()

    def __post_init__(self):
        for r in self.equations:
            if r.kind != EQUATION:
                raise ValueError(f"{r} is not an equation")
        for r in self.transitions:
            if r.kind != TRANSITION:
                raise ValueError(f"{r} is not a transition")
            if not self.signature.is_system(r.lhs.sort):
                raise SortError(f"transition {r.label} rewrites data sort {r.lhs.sort}")

    @property
    def E0(self) -> Axioms:
        return self.axioms

    @property
    def E1(self) -> tuple:
        return self.equations

    @property
    def Gamma(self) -> tuple:
        return self.transitions

    def rule(self, label: str) -> Rule:
        for r in (*self.equations, *self.transitions):
            if r.label == label:
                return r
        raise KeyError(label)

    def __repr__(self):
        return (
            f"TheoryModule({self.name!r}, E0={len(self.axioms.assoc | self.axioms.comm)} ops, "
            f"E1={len(self.equations)}, Gamma={len(self.transitions)})"
        )


def enumerate_terms(sig: Signature, sort: str, size: int, variables_: Iterable[Var] = ()) -> Iterator[Term]:
    """All terms of ``sort`` with exactly ``size`` non-constant applications.

    Plain syntactic enumeration, no identification modulo axioms.
    """
    table = _TermTable(sig, tuple(variables_))
    yield from table.get(sort, size)


class _TermTable:
    def __init__(self, sig, vars_):
        self.sig = sig
        self.vars = vars_
        self.memo: dict = {}

    def get(self, sort, size):
        key = (sort, size)
        if key in self.memo:
            return self.memo[key]
        out = []
        if size == 0:
            out.extend(v for v in self.vars if v.sort == sort)
            out.extend(const(op) for op in self.sig.constants(sort))
        else:
            for op in self.sig.ops_into(sort):
                if op.is_constant:
                    continue
                for split in _compositions(size - 1, len(op.arity)):
                    pools = [self.get(s, k) for s, k in zip(op.arity, split)]
                    for args in itertools.product(*pools):
                        out.append(App(op, args))
        self.memo[key] = out
        return out


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest
