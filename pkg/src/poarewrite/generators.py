"""Seeded random signatures, algebras, rules, sentences and morphisms for property checks."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Optional

from .core import (
    DATA,
    SYSTEM,
    TRANSITION,
    And,
    App,
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
    Trans,
    Var,
    sentence_free_vars,
    term_key,
)
from .freeness import free_preorder
from .models import FiniteAlgebra, Homomorphism
from .modular import SignatureMorphism, TheorySquare, pushout


def rng_for(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def random_signature(
    rng: random.Random,
    n_sorts: int = 2,
    n_ops: int = 2,
    n_consts: int = 2,
    system_prob: float = 0.7,
    prefix: str = "",
    name: str = "SIG",
) -> Signature:
    """At least one system sort; ``n_ops`` unary or binary operations plus constants."""
    kinds = [SYSTEM if (i == 0 or rng.random() < system_prob) else DATA for i in range(n_sorts)]
    sorts = [Sort(f"{prefix}s{i}", k) for i, k in enumerate(kinds)]
    names = [s.name for s in sorts]
    ops = set()
    for i in range(n_consts):
        ops.add(Op(f"{prefix}c{i}", (), rng.choice(names)))
    for i in range(n_ops):
        arity = tuple(rng.choice(names) for _ in range(rng.choice((1, 2))))
        ops.add(Op(f"{prefix}f{i}", arity, rng.choice(names)))
    return Signature(sorts, ops, name)


def random_algebra(rng: random.Random, sig: Signature, max_carrier: int = 3, min_carrier: int = 1, name="A") -> FiniteAlgebra:
    carriers = {s: [str(i) for i in range(rng.randint(min_carrier, max_carrier))] for s in sig.sorts}
    tables = {
        op: {args: rng.choice(carriers[op.sort]) for args in itertools.product(*(carriers[s] for s in op.arity))}
        for op in sig.ops
    }
    return FiniteAlgebra(sig, carriers, tables, None, name)


def variables_for(sig: Signature, per_sort: int = 2) -> list[Var]:
    return [Var(f"x{i}_{s}", s) for s in sorted(sig.sorts) for i in range(per_sort)]


def random_term(rng: random.Random, sig: Signature, sort: str, depth: int, vars_=()) -> Optional[App]:
    leaves = [v for v in vars_ if v.sort == sort] + [App(op, ()) for op in sig.constants(sort)]
    builders = [op for op in sig.ops_into(sort) if op.arity]
    if depth <= 0 or not builders or (leaves and rng.random() < 0.4):
        return rng.choice(leaves) if leaves else None
    op = rng.choice(builders)
    args = []
    for s in op.arity:
        a = random_term(rng, sig, s, depth - 1, vars_)
        if a is None:
            return rng.choice(leaves) if leaves else None
        args.append(a)
    return App(op, tuple(args))


def random_rule(
    rng: random.Random,
    sig: Signature,
    depth: int = 2,
    cond_prob: float = 0.4,
    tr_cond_prob: float = 0.5,
    label: str = "",
) -> Optional[Rule]:
    """A transition over a random system sort; conditions may mention variables absent from the lhs."""
    vars_ = variables_for(sig)
    system = sig.system_sorts
    if not system:
        return None
    for _ in range(20):
        s = rng.choice(system)
        lhs = random_term(rng, sig, s, depth, vars_)
        rhs = random_term(rng, sig, s, depth, vars_)
        if lhs is None or rhs is None:
            continue
        conds = []
        while rng.random() < cond_prob and len(conds) < 2:
            cs = rng.choice(sorted(sig.sorts))
            a = random_term(rng, sig, cs, 1, vars_)
            b = random_term(rng, sig, cs, 1, vars_)
            if a is None or b is None:
                break
            if sig.is_system(cs) and rng.random() < tr_cond_prob:
                conds.append(Trans(a, b))
            else:
                conds.append(Eq(a, b))
        return Rule(TRANSITION, lhs, rhs, tuple(conds), label)
    return None


def random_rules(rng, sig, max_rules=2, **kw) -> list[Rule]:
    out = []
    for i in range(rng.randint(0, max_rules)):
        r = random_rule(rng, sig, label=f"rl{i + 1}", **kw)
        if r is not None:
            out.append(r)
    return out


def random_poa(rng, sig, max_carrier=3, name="A", n_rules=2) -> FiniteAlgebra:
    """Random tables with the free preorder of a few random ground-ish rules."""
    B = random_algebra(rng, sig, max_carrier, name=name)
    gamma = [r for r in (random_rule(rng, sig, depth=1, cond_prob=0.2) for _ in range(n_rules)) if r is not None]
    return B.with_preorders(free_preorder(B, gamma).relation)


def random_sentence(rng: random.Random, sig: Signature, depth: int = 3, vars_=None, transitions=True):
    vars_ = variables_for(sig) if vars_ is None else vars_
    if depth <= 0 or rng.random() < 0.25:
        return _random_atom(rng, sig, vars_, transitions)
    pick = rng.randrange(6)
    if pick == 0:
        return Not(random_sentence(rng, sig, depth - 1, vars_, transitions))
    if pick in (1, 2):
        cls = And if pick == 1 else Or
        return cls(tuple(random_sentence(rng, sig, depth - 1, vars_, transitions) for _ in range(rng.randint(0, 2) + 1)))
    if pick == 3:
        return Implies(
            random_sentence(rng, sig, depth - 1, vars_, transitions),
            random_sentence(rng, sig, depth - 1, vars_, transitions),
        )
    body = random_sentence(rng, sig, depth - 1, vars_, transitions)
    free = sorted(sentence_free_vars(body), key=term_key)
    xs = tuple(x for x in free if rng.random() < 0.7) or tuple(free[:1])
    return (Forall if pick == 4 else Exists)(xs, body)


def _random_atom(rng, sig, vars_, transitions):
    for _ in range(20):
        s = rng.choice(sorted(sig.sorts))
        a = random_term(rng, sig, s, 2, vars_)
        b = random_term(rng, sig, s, 2, vars_)
        if a is None or b is None:
            continue
        if transitions and sig.is_system(s) and rng.random() < 0.5:
            return Trans(a, b)
        return Eq(a, b)
    v = vars_[0]
    return Eq(v, v)


def random_morphism(rng: random.Random, source: Signature, extra_sorts: int = 1, extra_ops: int = 1, name="phi"):
    """A renaming of ``source`` into a larger signature, sometimes gluing two sorts or two operations."""
    sort_map = {s: f"t_{s}" for s in source.sorts}
    by_kind: dict = {}
    for s in sorted(source.sorts):
        by_kind.setdefault(source.sorts[s].kind, []).append(s)
    for kind, ss in by_kind.items():
        if len(ss) >= 2 and rng.random() < 0.3:
            a, b = rng.sample(ss, 2)
            sort_map[b] = sort_map[a]
    sorts = {t: source.sorts[s].kind for s, t in sort_map.items()}
    for i in range(extra_sorts):
        sorts[f"t_extra{i}"] = rng.choice((DATA, SYSTEM))
    op_map = {}
    targets = set()
    for op in source.ops:
        img = Op(f"t_{op.name}", tuple(sort_map[x] for x in op.arity), sort_map[op.sort])
        same = [o for o in targets if o.arity == img.arity and o.sort == img.sort]
        if same and rng.random() < 0.3:
            img = rng.choice(sorted(same))
        op_map[op] = img
        targets.add(img)
    names = sorted(sorts)
    for i in range(extra_ops):
        arity = tuple(rng.choice(names) for _ in range(rng.choice((0, 1, 2))))
        targets.add(Op(f"t_g{i}", arity, rng.choice(names)))
    target = Signature([Sort(n, k) for n, k in sorts.items()], targets, "TGT")
    return SignatureMorphism(source, target, sort_map, op_map, name)


# -- adjunction instances ----------------------------------------------------------------


@dataclass
class ExtensionInstance:
    B: FiniteAlgebra
    gamma: list
    A: FiniteAlgebra
    h: Homomorphism
    kind: str


def _congruence(rng, B: FiniteAlgebra, n_pairs=2):
    """Random congruence on ``B`` as a representative map per sort."""
    parent = {(s, x): (s, x) for s, c in B.carriers.items() for x in c}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            return True
        return False

    sorts = [s for s, c in B.carriers.items() if len(c) > 1]
    for _ in range(n_pairs):
        if not sorts:
            break
        s = rng.choice(sorts)
        a, b = rng.sample(list(B.carriers[s]), 2)
        union((s, a), (s, b))
    changed = True
    while changed:
        changed = False
        for op in B.signature.ops:
            rows = list(B.tables[op].items())
            for (a1, v1), (a2, v2) in itertools.combinations(rows, 2):
                if all(find((s, x)) == find((s, y)) for s, x, y in zip(op.arity, a1, a2)):
                    if union((op.sort, v1), (op.sort, v2)):
                        changed = True
    return {s: {x: find((s, x))[1] for x in c} for s, c in B.carriers.items()}


def random_extension_instance(rng: random.Random, max_carrier: int = 3) -> Optional[ExtensionInstance]:
    """B, Gamma, a preordered A satisfying Gamma and a homomorphism B -> A."""
    sig = random_signature(rng, rng.randint(1, 2), rng.randint(1, 2), rng.randint(1, 3))
    gamma = random_rules(rng, sig, 2)
    kind = rng.choice(("identity", "quotient", "inclusion"))
    extra = random_rules(rng, sig, 2)
    if kind == "identity":
        B = random_algebra(rng, sig, max_carrier)
        pre = free_preorder(B, gamma + extra).relation
        if rng.random() < 0.2:
            pre = {s: frozenset(itertools.product(B.carriers[s], B.carriers[s])) for s in sig.system_sorts}
        A = B.with_preorders(pre)
        h = Homomorphism({s: {x: x for x in c} for s, c in B.carriers.items()})
    elif kind == "quotient":
        B = random_algebra(rng, sig, max_carrier)
        rep = _congruence(rng, B)
        carriers = {s: sorted(set(m.values()), key=list(B.carriers[s]).index) for s, m in rep.items()}
        tables = {
            op: {tuple(rep[s][x] for s, x in zip(op.arity, args)): rep[op.sort][v] for args, v in B.tables[op].items()}
            for op in sig.ops
        }
        Q = FiniteAlgebra(sig, carriers, tables, None, "Q")
        A = Q.with_preorders(free_preorder(Q, gamma + extra).relation)
        h = Homomorphism(rep)
    else:
        C = random_algebra(rng, sig, max_carrier)
        # subalgebra generated by the constants and a few random seeds
        sub = {s: set() for s in sig.sorts}
        for s, c in C.carriers.items():
            if c and rng.random() < 0.5:
                sub[s].add(rng.choice(c))
        changed = True
        while changed:
            changed = False
            for op in sig.ops:
                for args in itertools.product(*(sorted(sub[x]) for x in op.arity)):
                    v = C.tables[op][args]
                    if v not in sub[op.sort]:
                        sub[op.sort].add(v)
                        changed = True
        carriers = {s: [x for x in C.carriers[s] if x in sub[s]] for s in sig.sorts}
        tables = {
            op: {a: v for a, v in C.tables[op].items() if all(x in sub[s] for s, x in zip(op.arity, a))}
            for op in sig.ops
        }
        B = FiniteAlgebra(sig, carriers, tables, None, "B")
        A = C.with_preorders(free_preorder(C, gamma + extra).relation)
        h = Homomorphism({s: {x: x for x in carriers[s]} for s in sig.sorts})
    return ExtensionInstance(B, gamma, A, h, kind)


# -- pushout squares ----------------------------------------------------------------------


@dataclass
class AmalgamationInstance:
    square: TheorySquare
    Bp: FiniteAlgebra
    gamma1: list
    gamma2: list


def _extend(rng, base: Signature, tag: str, name: str) -> Signature:
    sorts = list(base.sorts.values())
    if rng.random() < 0.7:
        sorts.append(Sort(f"{tag}p", rng.choice((SYSTEM, SYSTEM, DATA))))
    names = [s.name for s in sorts]
    ops = list(base.ops)
    for i in range(rng.randint(0, 2)):
        arity = tuple(rng.choice(names) for _ in range(rng.choice((0, 1, 1, 2))))
        ops.append(Op(f"{tag}g{i}", arity, rng.choice(names)))
    for s in names:
        if not any(o.sort == s and not o.arity for o in ops) and rng.random() < 0.7:
            ops.append(Op(f"{tag}k_{s}", (), s))
    return Signature(sorts, ops, name)


def random_amalgamation_instance(rng: random.Random, max_carrier: int = 3, mirror_prob: float = 0.5) -> AmalgamationInstance:
    """Two extensions of a small base signature, their pushout, an apex algebra and transitions on each side.

    With probability ``mirror_prob`` the side-2 transitions repeat the
    side-1 transitions that live entirely in the shared part, which tends
    to make the shared-reduct hypothesis hold non-trivially.
    """
    base = random_signature(rng, rng.randint(1, 2), rng.randint(0, 1), rng.randint(1, 2), name="BASE")
    S1 = _extend(rng, base, "a", "M1")
    S2 = _extend(rng, base, "b", "M2")
    phi1 = SignatureMorphism.inclusion(base, S1, "phi1")
    phi2 = SignatureMorphism.inclusion(base, S2, "phi2")
    phi1.target_module, phi2.target_module = "M1", "M2"
    sq = pushout(phi1, phi2, "APEX")
    Bp = random_algebra(rng, sq.apex, max_carrier, name="Bp")
    g1 = random_rules(rng, S1, 2, cond_prob=0.25)
    g2 = random_rules(rng, S2, 2, cond_prob=0.25)
    if rng.random() < mirror_prob:
        shared = [r for r in g1 if _within(r, base)]
        g2 = g2 + [Rule(r.kind, r.lhs, r.rhs, r.conditions, f"m{r.label}") for r in shared]
    return AmalgamationInstance(sq, Bp, g1, g2)


def _within(r: Rule, sig: Signature) -> bool:
    def ok(t):
        if isinstance(t, Var):
            return t.sort in sig.sorts
        return t.op in sig and all(ok(a) for a in t.args)

    return all(ok(t) for t in (r.lhs, r.rhs, *(x for c in r.conditions for x in (c.lhs, c.rhs))))
