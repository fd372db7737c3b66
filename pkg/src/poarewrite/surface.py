"""Parser and printer for the Maude-style module language.

Terms are parsed with an all-parses chart over token spans against the
mixfix patterns of the declared operations (``_<_``, ``__``, ``[__]``,
``s_``, ...).  No precedences exist: a string with more than one
well-sorted reading is rejected and the candidates are listed, so the
user disambiguates with parentheses.  Operations named without
underscores use prefix syntax ``f(t1, ..., tn)``.  An operation named
``_`` is a coercion and is inserted silently where a term of its
argument sort stands for a term of its result sort.
"""

from __future__ import annotations

import itertools
import re
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .core import (
    ASSOC,
    COMM,
    DATA,
    EQUATION,
    RESERVED_PREFIX,
    SYSTEM,
    TRANSITION,
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
    const,
    term_key,
)
from .engine import assoc_form
from .errors import AmbiguousParseError, ParseError, PoaError

SLOT = object()
SPECIAL = "()[],"
_TOKEN_RE = re.compile(r"[()\[\],]|[^\s()\[\],]+")

BOOL = "Bool"
TRUE = Op("true", (), BOOL)
FALSE = Op("false", (), BOOL)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def mixfix_pattern(op: Op) -> list:
    """Token pattern of an operation; ``SLOT`` marks an argument place."""
    name = op.name
    if "_" not in name:
        toks = tokenize(name)
        if not op.arity:
            return toks
        pat = toks + ["("]
        for i in range(len(op.arity)):
            if i:
                pat.append(",")
            pat.append(SLOT)
        return pat + [")"]
    pat = []
    for piece in re.split(r"(_)", name):
        if piece == "_":
            pat.append(SLOT)
        elif piece:
            pat.extend(tokenize(piece))
    if sum(1 for p in pat if p is SLOT) != len(op.arity):
        raise ParseError(f"operation {name} has {len(op.arity)} arguments but a different number of underscores")
    return pat


def is_coercion(op: Op) -> bool:
    return op.name == "_" and len(op.arity) == 1


# -- term grammar ---------------------------------------------------------------


class TermGrammar:
    """Parsing tables derived from one signature and its structural axioms."""

    def __init__(self, sig: Signature, E0: Axioms = Axioms()):
        self.sig = sig
        self.E0 = E0
        self.patterns = []
        self.constants: dict[str, list[Op]] = {}
        self.coercions: dict[tuple[str, str], list[tuple[Op, ...]]] = {}
        for op in sig.ops:
            if is_coercion(op):
                continue
            pat = mixfix_pattern(op)
            if not op.arity:
                self.constants.setdefault(" ".join(pat), []).append(op)
            else:
                self.patterns.append((op, pat))
        self._coercion_chains([op for op in sig.ops if is_coercion(op)])
        self.numeral_ops = []
        for zero in sig.ops_named("0"):
            if zero.is_constant:
                for succ in sig.ops_named("s_"):
                    if succ.arity == (zero.sort,) and succ.sort == zero.sort:
                        self.numeral_ops.append((zero, succ))

    def _coercion_chains(self, coercions):
        chains: dict[tuple[str, str], list[tuple[Op, ...]]] = {}
        frontier = [(c,) for c in coercions]
        while frontier:
            nxt = []
            for chain in frontier:
                src, dst = chain[0].arity[0], chain[-1].sort
                if src == dst or len(chain) > len(coercions):
                    continue
                chains.setdefault((src, dst), []).append(chain)
                for c in coercions:
                    if c.arity[0] == dst and c not in chain:
                        nxt.append(chain + (c,))
            frontier = nxt
        # Only unambiguous chains are inserted implicitly.
        self.coercions = {k: v[0] for k, v in chains.items() if len(v) == 1}

    def numeral(self, tok: str) -> list[Term]:
        if not tok.isdigit():
            return []
        out = []
        for zero, succ in self.numeral_ops:
            t = const(zero)
            for _ in range(int(tok)):
                t = App(succ, (t,))
            out.append(t)
        return out


class _Chart:
    def __init__(self, grammar: TermGrammar, tokens: list[str], vars_: Mapping[str, Var]):
        self.g = grammar
        self.toks = tokens
        self.vars = vars_
        self.memo: dict = {}
        self.close = self._match_parens()

    def _match_parens(self):
        close = {}
        stack = []
        for i, t in enumerate(self.toks):
            if t == "(":
                stack.append(i)
            elif t == ")" and stack:
                close[stack.pop()] = i
        return close

    def parses(self, i: int, j: int) -> dict[str, dict[Term, bool]]:
        """sort -> {term: is_direct} for the token span [i, j)."""
        key = (i, j)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        self.memo[key] = {}
        direct: dict[str, set] = {}

        def add(t):
            t = assoc_form(t, self.g.E0)
            direct.setdefault(t.sort, set()).add(t)

        toks = self.toks
        if j - i == 1:
            for t in self._atom(toks[i]):
                add(t)
        coerced: dict[str, set] = {}
        if toks[i] == "(" and self.close.get(i) == j - 1 and j - i >= 3:
            # parentheses keep whether the inside was read directly or through a coercion
            for srt, ts in self.parses(i + 1, j - 1).items():
                for t, is_direct in ts.items():
                    if is_direct:
                        add(t)
                    else:
                        coerced.setdefault(srt, set()).add(t)
        for op, pat in self.g.patterns:
            if len(pat) > j - i:
                continue
            first, last = pat[0], pat[-1]
            if first is not SLOT and toks[i] != first:
                continue
            if last is not SLOT and toks[j - 1] != last:
                continue
            for spans in self._fit(pat, 0, i, j):
                pools = []
                for (a, b), want in zip(spans, op.arity):
                    pool = self.parses(a, b).get(want)
                    if not pool:
                        break
                    pools.append(sorted(pool, key=term_key))
                else:
                    for args in itertools.product(*pools):
                        add(App(op, args))
        out: dict[str, dict[Term, bool]] = {s: {t: True for t in ts} for s, ts in direct.items()}
        for (src, dst), chain in self.g.coercions.items():
            for t in direct.get(src, ()):
                u = t
                for c in chain:
                    u = App(c, (u,))
                out.setdefault(dst, {}).setdefault(u, False)
        for srt, ts in coerced.items():
            for t in ts:
                out.setdefault(srt, {}).setdefault(t, False)
        self.memo[key] = out
        return out

    def _fit(self, pat, k, p, j):
        """Slot spans for pattern elements pat[k:] over tokens [p, j)."""
        if k == len(pat):
            if p == j:
                yield []
            return
        if j - p < len(pat) - k:
            return
        el = pat[k]
        if el is not SLOT:
            if self.toks[p] == el:
                yield from self._fit(pat, k + 1, p + 1, j)
            return
        remaining = len(pat) - k - 1
        for q in range(p + 1, j - remaining + 1):
            if k + 1 < len(pat) and pat[k + 1] is not SLOT and (q >= j or self.toks[q] != pat[k + 1]):
                continue
            if k + 1 == len(pat) and q != j:
                continue
            for rest in self._fit(pat, k + 1, q, j):
                yield [(p, q)] + rest

    def _atom(self, tok: str) -> list[Term]:
        if tok.startswith(RESERVED_PREFIX):
            raise ParseError(f"identifier {tok!r} uses the reserved prefix {RESERVED_PREFIX!r}")
        out = []
        if tok in self.vars:
            out.append(self.vars[tok])
        elif ":" in tok and not tok.startswith(":"):
            name, _, srt = tok.partition(":")
            if srt in self.g.sig.sorts:
                out.append(Var(name, srt))
        out.extend(const(op) for op in self.g.constants.get(tok, ()))
        if not self.g.constants.get(tok):
            out.extend(self.g.numeral(tok))
        return out


def _grammar_for(mod_or_sig, E0=None) -> TermGrammar:
    if isinstance(mod_or_sig, TheoryModule):
        cached = getattr(mod_or_sig, "_grammar", None)
        if cached is None:
            cached = TermGrammar(mod_or_sig.signature, mod_or_sig.axioms)
            object.__setattr__(mod_or_sig, "_grammar", cached)
        return cached
    if isinstance(mod_or_sig, TermGrammar):
        return mod_or_sig
    return TermGrammar(mod_or_sig, E0 or Axioms())


def _span_parses(tokens, grammar, vars_):
    if not tokens:
        raise ParseError("empty term")
    return _Chart(grammar, tokens, vars_).parses(0, len(tokens))


def parse_term(
    text,
    mod,
    vars: Optional[Mapping[str, Var] | Iterable[Var]] = None,
    sort: Optional[str] = None,
) -> Term:
    """Unique well-sorted reading of ``text``; ``sort`` forces the expected sort."""
    grammar = _grammar_for(mod)
    tokens = tokenize(text) if isinstance(text, str) else list(text)
    vmap = _var_map(mod, vars)
    found = _span_parses(tokens, grammar, vmap)
    src = " ".join(tokens)
    if sort is not None:
        cands = sorted(found.get(sort, {}), key=term_key)
    else:
        cands = sorted((t for ts in found.values() for t, d in ts.items() if d), key=term_key)
    if not cands:
        raise ParseError(f"no parse for {src!r}" + (f" at sort {sort}" if sort else ""))
    if len(cands) > 1:
        shown = "; ".join(f"{format_term(c, parens='full')} : {c.sort}" for c in cands[:10])
        raise AmbiguousParseError(f"ambiguous term {src!r}: {shown}", cands)
    return cands[0]


def _var_map(mod, vars_) -> dict[str, Var]:
    out: dict[str, Var] = {}
    if isinstance(mod, TheoryModule):
        out.update(mod.variables)
    if vars_ is None:
        return out
    if isinstance(vars_, Mapping):
        out.update(vars_)
    else:
        out.update({v.name: v for v in vars_})
    return out


def parse_pair(lhs_toks, rhs_toks, grammar, vmap, what="statement"):
    """Parse two sides at a common sort; at least one side must be a direct (non-coerced) parse."""
    left = _span_parses(lhs_toks, grammar, vmap)
    right = _span_parses(rhs_toks, grammar, vmap)
    options = []
    for srt in sorted(set(left) & set(right)):
        l_direct = any(left[srt].values())
        r_direct = any(right[srt].values())
        if not (l_direct or r_direct):
            continue
        options.append(srt)
    src = f"{' '.join(lhs_toks)} / {' '.join(rhs_toks)}"
    if not options:
        raise ParseError(f"no well-sorted parse for {what} {src!r}")
    # prefer the sort at which both sides parse without a top coercion
    both = [s for s in options if any(left[s].values()) and any(right[s].values())]
    if len(both) == 1:
        options = both
    if len(options) > 1:
        raise AmbiguousParseError(f"{what} {src!r} parses at several sorts: {', '.join(options)}", options)
    srt = options[0]
    ls, rs = sorted(left[srt], key=term_key), sorted(right[srt], key=term_key)
    if len(ls) != 1 or len(rs) != 1:
        cands = [format_term(t, parens="full") for t in (ls if len(ls) != 1 else rs)]
        raise AmbiguousParseError(f"ambiguous {what} {src!r}: {'; '.join(cands)}", cands)
    return ls[0], rs[0]


# -- printing -------------------------------------------------------------------


def _numeral_value(t, grammar):
    if grammar is None or not grammar.numeral_ops:
        return None
    k = 0
    while isinstance(t, App) and t.op.name == "s_" and len(t.args) == 1:
        k += 1
        t = t.args[0]
    if isinstance(t, App) and t.op.name == "0" and not t.args and any(z == t.op for z, _ in grammar.numeral_ops):
        if str(k) in grammar.constants and k:
            return None
        return k
    return None


def _render(t, grammar, numerals, E0, full):
    """Token list plus whether the rendering is open (an argument slot) at each end."""
    if isinstance(t, Var):
        return [t.name], False, False
    if numerals:
        k = _numeral_value(t, grammar)
        if k is not None:
            return [str(k)], False, False
    op = t.op
    if is_coercion(op):
        return _render(t.args[0], grammar, numerals, E0, full)
    pat = mixfix_pattern(op)
    if not t.args:
        return list(pat), False, False
    out = []
    slot = 0
    call_syntax = "_" not in op.name
    for k, el in enumerate(pat):
        if el is not SLOT:
            out.append(el)
            continue
        arg = t.args[slot]
        slot += 1
        toks, lo, ro = _render(arg, grammar, numerals, E0, full)
        same_assoc = isinstance(arg, App) and arg.op == op and op in E0.assoc
        if call_syntax:
            wrap = False
        elif full:
            wrap = isinstance(arg, App) and bool(arg.args) and not is_coercion(arg.op) and len(toks) > 1
        else:
            wrap = (lo and k > 0) or (ro and k < len(pat) - 1)
            if same_assoc:
                wrap = False
        out.extend(["("] + toks + [")"] if wrap else toks)
    return out, pat[0] is SLOT, pat[-1] is SLOT


def _join(tokens):
    s = ""
    prev = None
    for tok in tokens:
        if prev is None:
            s = tok
        elif prev in "([" and len(prev) == 1 or tok in ")],":
            s += tok
        elif tok == "(" and prev not in ("(", ",") and _is_call_name(prev):
            s += tok
        else:
            s += " " + tok
        prev = tok
    return s


def _is_call_name(tok):
    return tok[:1].isalpha() or tok[:1] in "_'"


def format_term(t: Term, mod=None, numerals: Optional[bool] = None, parens: str = "auto") -> str:
    """Render a term in mixfix syntax.

    Parentheses are inserted where an argument could otherwise swallow
    neighbouring tokens.  Given a module, redundant parentheses are then
    dropped as long as the text still parses back to the same term, and
    ``s``/``0`` chains are printed as decimal numerals.
    """
    grammar = _grammar_for(mod) if mod is not None else None
    E0 = grammar.E0 if grammar is not None else Axioms()
    if numerals is None:
        numerals = grammar is not None and bool(grammar.numeral_ops)
    toks, _, _ = _render(t, grammar, numerals, E0, parens == "full")
    if grammar is not None and parens == "auto":
        toks = _minimize_parens(toks, t, mod, grammar)
    return _join(toks)


def _minimize_parens(toks, t, mod, grammar):
    target = assoc_form(t, grammar.E0)
    vmap = {v.name: v for v in _vars_of(t)}

    def ok(candidate):
        try:
            return parse_term(candidate, grammar, vmap, sort=t.sort) == target
        except PoaError:
            return False

    if not ok(toks):
        return toks
    i = 0
    while i < len(toks):
        if toks[i] == "(" and not (i > 0 and _is_call_name(toks[i - 1]) and _call_paren(toks, i, grammar)):
            depth = 0
            for j in range(i, len(toks)):
                depth += toks[j] == "("
                depth -= toks[j] == ")"
                if depth == 0:
                    break
            cand = toks[:i] + toks[i + 1:j] + toks[j + 1:]
            if ok(cand):
                toks = cand
                continue
        i += 1
    return toks


def _call_paren(toks, i, grammar):
    return any(p[0] == toks[i - 1] and len(p) > 1 and p[1] == "(" for _, p in grammar.patterns)


def _vars_of(t):
    from .core import variables

    return variables(t)


# -- sentences ------------------------------------------------------------------

_CONNECTIVES = ("/\\", "\\/", "->")


def parse_sentence(text: str, mod, vars_: Optional[Mapping[str, Var]] = None):
    """First-order sentence: ``forall x:s y:s . body``, ``exists``, ``~``, ``/\\``, ``\\/``, ``->``, ``=``, ``=>``."""
    grammar = _grammar_for(mod)
    tokens = tokenize(text)
    vmap = _var_map(mod, vars_)
    rho, _ = _sentence(tokens, grammar, vmap)
    return rho


def _sentence(toks, grammar, vmap):
    if not toks:
        raise ParseError("empty sentence")
    if toks[0] in ("forall", "exists", "all", "ex"):
        try:
            dot = toks.index(".")
        except ValueError:
            raise ParseError("quantifier without '.'") from None
        xs = []
        inner = dict(vmap)
        for decl in toks[1:dot]:
            name, _, srt = decl.partition(":")
            if not srt or srt not in grammar.sig.sorts:
                raise ParseError(f"bad quantified variable {decl!r}; write name:Sort")
            v = Var(name, srt)
            xs.append(v)
            inner[name] = v
        body, _ = _sentence(toks[dot + 1:], grammar, inner)
        q = Forall if toks[0] in ("forall", "all") else Exists
        return q(tuple(xs), body), None
    # implication (right associative), then disjunction, then conjunction
    for conn, build in (("->", None), ("\\/", Or), ("/\\", And)):
        parts = _split_top(toks, conn)
        if len(parts) > 1:
            subs = [_sentence(p, grammar, vmap)[0] for p in parts]
            if conn == "->":
                out = subs[-1]
                for s in reversed(subs[:-1]):
                    out = Implies(s, out)
                return out, None
            return build(tuple(subs)), None
    if toks[0] == "~":
        return Not(_sentence(toks[1:], grammar, vmap)[0]), None
    if toks[0] == "(" and _closing(toks, 0) == len(toks) - 1:
        inner = toks[1:-1]
        if _has_top(inner, ("=", "=>", *_CONNECTIVES)) or (inner and inner[0] in ("forall", "exists", "~")):
            return _sentence(inner, grammar, vmap)
    return _atom(toks, grammar, vmap), None


def _atom(toks, grammar, vmap, allow_bool=False):
    for rel, build in (("=>", Trans), ("=", Eq)):
        parts = _split_top(toks, rel)
        if len(parts) == 2:
            lhs, rhs = parse_pair(parts[0], parts[1], grammar, vmap, "atom")
            return build(lhs, rhs)
        if len(parts) > 2:
            raise ParseError(f"several {rel!r} in one atom: {' '.join(toks)}")
    if allow_bool or True:
        t = _parse_at(toks, grammar, vmap, BOOL)
        return Eq(t, const(_true_of(grammar)))


def _true_of(grammar):
    ops = [op for op in grammar.constants.get("true", ()) if op.sort == BOOL]
    if not ops:
        raise ParseError("Boolean condition used but the module has no true : -> Bool")
    return ops[0]


def _parse_at(toks, grammar, vmap, srt):
    found = _span_parses(toks, grammar, vmap).get(srt, {})
    if len(found) != 1:
        if not found:
            raise ParseError(f"no parse of {' '.join(toks)!r} at sort {srt}")
        raise AmbiguousParseError(f"ambiguous {' '.join(toks)!r}", sorted(found, key=term_key))
    return next(iter(found))


def _closing(toks, i):
    depth = 0
    for j in range(i, len(toks)):
        if toks[j] in "([":
            depth += 1
        elif toks[j] in ")]":
            depth -= 1
            if depth == 0:
                return j
    return -1


def _split_top(toks, sep):
    parts, cur, depth = [], [], 0
    for t in toks:
        if t in ("(", "["):
            depth += 1
        elif t in (")", "]"):
            depth -= 1
        if t == sep and depth == 0:
            parts.append(cur)
            cur = []
        else:
            cur.append(t)
    parts.append(cur)
    return parts


def _has_top(toks, seps):
    return any(len(_split_top(toks, s)) > 1 for s in seps)


# -- modules --------------------------------------------------------------------


def bool_module() -> TheoryModule:
    sig = Signature([Sort(BOOL)], [TRUE, FALSE], name="BOOL")
    return TheoryModule("BOOL", sig)


class ModuleDatabase:
    """Registry used to resolve ``protecting`` imports."""

    def __init__(self):
        self._mods: dict[str, TheoryModule] = {"BOOL": bool_module()}
        self._lock = threading.Lock()

    def register(self, mod: TheoryModule) -> None:
        with self._lock:
            self._mods[mod.name] = mod

    def get(self, name: str) -> TheoryModule:
        try:
            return self._mods[name]
        except KeyError:
            raise ParseError(f"unknown module {name!r}; load the file that defines it first") from None

    def __contains__(self, name):
        return name in self._mods

    def names(self):
        return sorted(self._mods)


_COMMENT_RE = re.compile(r"(---|\*\*\*).*?$", re.M)
_STMT_END = re.compile(r"\s\.(?=\s|$)")
_KEYWORDS = {"protecting", "including", "extending", "sort", "sorts", "op", "ops", "var", "vars", "eq", "ceq", "rl", "crl"}


def bundled(name: str) -> str:
    """Path of one of the module files shipped in ``poarewrite/modules``."""
    from importlib.resources import files

    return str(files("poarewrite") / "modules" / name)


def load_bundled(name: str, db: Optional[ModuleDatabase] = None) -> Document:
    with open(bundled(name), encoding="utf-8") as fh:
        return parse_document(fh.read(), db)


def strip_comments(text: str) -> str:
    return _COMMENT_RE.sub("", text)


def parse_module(text: str, db: Optional[ModuleDatabase] = None) -> TheoryModule:
    """Parse a single ``mod ... endm`` block, registering it in ``db``."""
    mods = parse_modules(text, db)
    if len(mods) != 1:
        raise ParseError(f"expected one module, found {len(mods)}")
    return mods[0]


_MOD_RE = re.compile(r"\b(?:mod|fmod|th)\s+(\S+)\s+is\b(.*?)\bendm\b", re.S)


def parse_modules(text: str, db: Optional[ModuleDatabase] = None) -> list[TheoryModule]:
    db = db if db is not None else ModuleDatabase()
    text = strip_comments(text)
    out = []
    for m in _MOD_RE.finditer(text):
        mod = _ModuleBuilder(m.group(1), db).build(m.group(2))
        db.register(mod)
        out.append(mod)
    return out


class _ModuleBuilder:
    def __init__(self, name, db):
        self.name = name
        self.db = db
        self.sorts: dict[str, None] = {}
        self.ops: list[Op] = []
        self.assoc: set = set()
        self.comm: set = set()
        self.eqs: list[Rule] = []
        self.rls: list[Rule] = []
        self.vars: dict[str, Var] = {}
        self.protected_sorts: set = set()
        self.protected_ops: set = set()
        self.imports: list[str] = []
        self._grammar = None
        self._import(self.db.get("BOOL"), protect=True, record=False)

    def _import(self, mod, protect=True, record=True):
        if record:
            self.imports.append(mod.name)
        for s in mod.signature.sorts:
            self.sorts.setdefault(s)
        for op in mod.signature.ops:
            if op not in self.ops:
                self.ops.append(op)
        self.assoc |= mod.axioms.assoc
        self.comm |= mod.axioms.comm
        for r in mod.equations:
            if r not in self.eqs:
                self.eqs.append(r)
        for r in mod.transitions:
            if r not in self.rls:
                self.rls.append(r)
        if protect:
            self.protected_sorts |= set(mod.signature.sorts)
            self.protected_ops |= set(mod.signature.ops)

    def grammar(self):
        if self._grammar is None:
            sig = Signature([Sort(s) for s in self.sorts], self.ops, self.name)
            self._grammar = TermGrammar(sig, Axioms(self.assoc, self.comm))
        return self._grammar

    def build(self, body: str) -> TheoryModule:
        for stmt in _STMT_END.split(body):
            stmt = stmt.strip()
            if stmt:
                self._statement(stmt)
        system = {r.lhs.sort for r in self.rls}
        for r in (*self.rls, *self.eqs):
            system |= {c.lhs.sort for c in r.tr_conditions}
        sig = Signature(
            [Sort(s, SYSTEM if s in system else DATA) for s in self.sorts], self.ops, self.name
        )
        eqs = _relabel(self.eqs, EQUATION)
        rls = _relabel(self.rls, TRANSITION)
        return TheoryModule(
            self.name,
            sig,
            Axioms(self.assoc, self.comm),
            tuple(eqs),
            tuple(rls),
            dict(self.vars),
            frozenset(self.protected_sorts),
            frozenset(self.protected_ops),
            tuple(self.imports),
        )

    def _statement(self, stmt):
        kw, _, rest = stmt.partition(" ")
        kw = kw.strip()
        rest = rest.strip()
        if kw not in _KEYWORDS:
            raise ParseError(f"{self.name}: unknown declaration {kw!r} in {stmt!r}")
        if kw in ("protecting", "including", "extending"):
            self._import(self.db.get(rest), protect=(kw == "protecting"))
        elif kw in ("sort", "sorts"):
            for s in rest.split():
                self.sorts.setdefault(s)
            self._grammar = None
        elif kw in ("op", "ops"):
            self._op_decl(kw, rest)
        elif kw in ("var", "vars"):
            names, sep, srt = rest.partition(":")
            srt = srt.strip()
            if not sep or srt not in self.sorts:
                raise ParseError(f"{self.name}: bad variable declaration {stmt!r}")
            for n in names.split():
                if n.startswith(RESERVED_PREFIX):
                    raise ParseError(f"variable name {n!r} uses the reserved prefix")
                old = self.vars.get(n)
                if old is not None and old.sort != srt:
                    raise ParseError(f"{self.name}: variable {n} redeclared with sort {srt} (was {old.sort})")
                self.vars[n] = Var(n, srt)
        else:
            self._rule(kw, rest)

    def _op_decl(self, kw, rest):
        m = re.match(r"^(.*?)\s:\s*(.*?)->\s*(\S+)\s*(\[(.*)\])?\s*$", rest, re.S)
        if not m:
            raise ParseError(f"{self.name}: bad operation declaration {kw} {rest!r}")
        names = m.group(1).split() if kw == "ops" else [m.group(1).strip()]
        arity = tuple(m.group(2).split())
        result = m.group(3)
        attrs = (m.group(5) or "").split()
        for s in (*arity, result):
            if s not in self.sorts:
                raise ParseError(f"{self.name}: unknown sort {s!r} in declaration of {' '.join(names)}")
        for a in attrs:
            if a not in (ASSOC, COMM):
                raise ParseError(f"{self.name}: unsupported attribute {a!r} (only assoc and comm)")
        for n in names:
            op = Op(n, arity, result)
            mixfix_pattern(op)
            if op not in self.ops:
                self.ops.append(op)
            if ASSOC in attrs:
                self.assoc.add(op)
            if COMM in attrs:
                self.comm.add(op)
        self._grammar = None
        try:
            Axioms(self.assoc, self.comm)
        except PoaError as exc:
            raise ParseError(f"{self.name}: {exc}") from None

    def _rule(self, kw, rest):
        toks = tokenize(rest)
        label = ""
        if len(toks) > 4 and toks[0] == "[" and toks[2] == "]" and toks[3] == ":":
            label, toks = toks[1], toks[4:]
        conditional = kw in ("ceq", "crl")
        conds = ()
        if conditional:
            parts = _split_top(toks, "if")
            if len(parts) != 2:
                raise ParseError(f"{self.name}: {kw} needs exactly one 'if': {rest!r}")
            toks, ctoks = parts
            conds = self._conditions(ctoks)
        elif "if" in _split_top(toks, "if")[0] or len(_split_top(toks, "if")) > 1:
            raise ParseError(f"{self.name}: unconditional {kw} with a condition; use c{kw}")
        rel = "=" if kw in ("eq", "ceq") else "=>"
        sides = _split_top(toks, rel)
        if len(sides) != 2:
            raise ParseError(f"{self.name}: expected one {rel!r} in {kw} {rest!r}")
        lhs, rhs = parse_pair(sides[0], sides[1], self.grammar(), self.vars, kw)
        kind = EQUATION if rel == "=" else TRANSITION
        r = Rule(kind, lhs, rhs, conds, label)
        (self.eqs if kind == EQUATION else self.rls).append(r)

    def _conditions(self, toks):
        atoms = []
        for part in _split_top(toks, "/\\"):
            atoms.append(_atom(part, self.grammar(), self.vars))
        return tuple(atoms)


def _relabel(rules, prefix):
    out = []
    n = 0
    used = {r.label for r in rules if r.label}
    for r in rules:
        if r.label and not r.label.startswith("%"):
            out.append(r)
            continue
        n += 1
        while f"{prefix}{n}" in used:
            n += 1
        out.append(Rule(r.kind, r.lhs, r.rhs, r.conditions, f"{prefix}{n}"))
    return out


def format_rule(r: Rule, mod=None) -> str:
    kw = ("c" if r.conditions else "") + ("eq" if r.kind == EQUATION else "rl")
    arrow = "=" if r.kind == EQUATION else "=>"
    s = f"{kw} {format_term(r.lhs, mod)} {arrow} {format_term(r.rhs, mod)}"
    if r.conditions:
        conds = []
        for c in r.conditions:
            a = "=" if isinstance(c, Eq) else "=>"
            conds.append(f"{format_term(c.lhs, mod)} {a} {format_term(c.rhs, mod)}")
        s += " if " + " /\\ ".join(conds)
    return s + " ."


def format_module(mod: TheoryModule) -> str:
    """Self-contained source text for ``mod`` (imports are inlined)."""
    sig = mod.signature
    lines = [f"mod {mod.name} is"]
    sorts = [s for s in sorted(sig.sorts) if s != BOOL]
    if sorts:
        lines.append(f"  {'sorts' if len(sorts) > 1 else 'sort'} {' '.join(sorts)} .")
    for op in sig.ops:
        if op in (TRUE, FALSE):
            continue
        attrs = sorted(mod.axioms.flags(op))
        attr = f" [{' '.join(attrs)}]" if attrs else ""
        lines.append(f"  op {op.name} : {' '.join(op.arity)}{' ' if op.arity else ''}-> {op.sort}{attr} .")
    rule_vars = {}
    for r in (*mod.equations, *mod.transitions):
        for v in r.variables:
            rule_vars.setdefault(v.name, v)
    for v in sorted(rule_vars.values(), key=lambda v: (v.sort, v.name)):
        lines.append(f"  var {v.name} : {v.sort} .")
    for r in (*mod.equations, *mod.transitions):
        lines.append("  " + format_rule(r, mod))
    lines.append("endm")
    return "\n".join(lines) + "\n"


# -- documents ------------------------------------------------------------------


@dataclass
class Document:
    modules: list = field(default_factory=list)
    morphisms: list = field(default_factory=list)
    algebras: list = field(default_factory=list)

    def module(self, name=None):
        if name is None:
            if not self.modules:
                raise ParseError("the file defines no module")
            return self.modules[-1]
        for m in self.modules:
            if m.name == name:
                return m
        raise ParseError(f"module {name!r} not found")


_BLOCK_RE = re.compile(r"\b(morphism|algebra)\b[^{]*\{.*?\}", re.S)


def parse_document(text: str, db: Optional[ModuleDatabase] = None) -> Document:
    """Modules, morphism blocks and algebra blocks, in file order."""
    db = db if db is not None else ModuleDatabase()
    text = strip_comments(text)
    doc = Document()
    items = [(m.start(), "mod", m) for m in _MOD_RE.finditer(text)]
    items += [(m.start(), m.group(1), m) for m in _BLOCK_RE.finditer(text)]
    for _, kind, m in sorted(items, key=lambda x: x[0]):
        if kind == "mod":
            mod = _ModuleBuilder(m.group(1), db).build(m.group(2))
            db.register(mod)
            doc.modules.append(mod)
        elif kind == "morphism":
            from .modular import parse_morphism

            doc.morphisms.append(parse_morphism(m.group(0), db))
        else:
            from .models import parse_algebra

            doc.algebras.append(parse_algebra(m.group(0), db))
    return doc
