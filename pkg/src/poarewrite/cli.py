"""Command-line driver: ``poarewrite <command> ...``.

Every command builds one structured result; ``--format json`` prints it
as JSON and the default text format prints the same fields for humans.
Exit status: 0 success, 1 counterexample or false, 2 usage or parse
error, 3 budget exhausted or inconclusive.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import coherence, engine, freeness, modular
from .core import Var, term_key
from .errors import (
    AmalgamationError,
    BudgetExhausted,
    ParseError,
    PoaError,
)
from .models import format_algebra, format_preorder, satisfies
from .surface import BOOL, FALSE, TRUE, ModuleDatabase, format_module, format_term, parse_document, parse_sentence, parse_term

EXIT_OK, EXIT_FALSE, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class _Loader:
    def __init__(self, preload=()):
        self.db = ModuleDatabase()
        self.docs = {}
        for p in preload:
            self.load(p)

    def load(self, path):
        path = str(path)
        if path not in self.docs:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ParseError(f"cannot read {path}: {exc.strerror}") from None
            self.docs[path] = parse_document(text, self.db)
        return self.docs[path]

    def module(self, path, name=None):
        doc = self.load(path)
        if name is not None:
            return self.db.get(name)
        return doc.module()


# -- rendering helpers --------------------------------------------------------------------


def _path(ctx) -> str:
    return ".".join(str(i + 1) for i in ctx.path) or "root"


def _subst(theta, mod) -> dict:
    return {f"{v.name}": format_term(t, mod) for v, t in sorted(dict(theta).items(), key=lambda kv: term_key(kv[0]))}


def _trace(trace, mod) -> list:
    out = []
    prev = trace.start
    for st in trace.steps:
        to = st.normalized if st.normalized is not None else st.result
        out.append(
            {
                "from": format_term(prev, mod),
                "rule": st.rule,
                "path": _path(st.context),
                "substitution": _subst(st.substitution, mod),
                "to": format_term(to, mod),
            }
        )
        prev = to
    return out


def _trace_lines(steps, indent="  ") -> list:
    lines = []
    for s in steps:
        sub = ", ".join(f"{k} := {v}" for k, v in s["substitution"].items())
        lines.append(f"{indent}{s['from']} --[{s['rule']}@{s['path']}, {{{sub}}}]--> {s['to']}")
    return lines


# -- commands -----------------------------------------------------------------------------


def cmd_reduce(args, L):
    mod = L.module(args.module_file, args.module)
    t = parse_term(args.term, mod)
    rw = engine.Rewriter(mod, _limits(args))
    nf = rw.normalize(t)
    res = {"command": "reduce", "result": format_term(nf, mod)}
    return res, EXIT_OK, [res["result"]]


def cmd_search(args, L):
    mod = L.module(args.module_file, args.module)
    t = parse_term(args.term, mod)
    rw = engine.Rewriter(mod, _limits(args))
    goal = None
    if args.goal is not None:
        goal = parse_term(args.goal, mod, sort=None if args.anywhere else t.sort)
    r = rw.search(t, goal=goal, terminal=args.terminal, max_depth=args.depth, anywhere=args.anywhere)
    sols = [
        {"term": format_term(u, mod), "depth": len(tr), "trace": _trace(tr, mod)} for u, tr in r.solutions
    ]
    res = {
        "command": "search",
        "start": format_term(t, mod),
        "goal": "terminal" if args.terminal else (args.goal if args.goal is not None else "any"),
        "solutions": sols,
        "states": r.states,
        "depth_reached": r.depth_reached,
        "complete": r.complete,
    }
    lines = [f"search from {res['start']}, goal: {res['goal']}"]
    for i, s in enumerate(sols, 1):
        lines.append(f"solution {i}: {s['term']} (depth {s['depth']})")
        lines.extend(_trace_lines(s["trace"]))
    if not sols:
        lines.append("no solution")
    lines.append(f"states: {r.states}, depth reached: {r.depth_reached}, complete: {str(r.complete).lower()}")
    return res, (EXIT_OK if r.complete else EXIT_BUDGET), lines


def cmd_step(args, L):
    mod = L.module(args.module_file, args.module)
    t = parse_term(args.term, mod)
    rw = engine.Rewriter(mod, _limits(args))
    steps = rw.one_step(t)
    items = [
        {
            "from": format_term(rw.canonical(t), mod),
            "rule": st.rule,
            "path": _path(st.context),
            "substitution": _subst(st.substitution, mod),
            "to": format_term(st.result, mod),
        }
        for st in steps
    ]
    res = {"command": "step", "term": format_term(t, mod), "successors": items, "skipped": len(rw.skipped)}
    lines = [f"successors of {res['term']}:"] + (_trace_lines(items) or ["  none"])
    lines.append(f"skipped: {len(rw.skipped)}")
    return res, (EXIT_BUDGET if rw.skipped else EXIT_OK), lines


def _algebra(L, path, name=None):
    doc = L.load(path)
    if not doc.algebras:
        raise ParseError(f"{path} defines no algebra")
    if name is None:
        return doc.algebras[-1]
    for a in doc.algebras:
        if a.name == name:
            return a
    raise ParseError(f"{path} has no algebra {name}")


def cmd_free_preorder(args, L):
    mod = L.module(args.module_file, args.module)
    A = _algebra(L, args.algebra_file, args.algebra)
    B = A.without_preorders() if A.is_poa else A
    fp = freeness.free_preorder(B, list(mod.transitions))
    stages = []
    for k, st in enumerate(fp.trace.stages):
        stages.append({s: _pairs(st[s], B.carriers[s]) for s in sorted(st)})
    res = {
        "command": "free-preorder",
        "algebra": A.name,
        "module": mod.name,
        "stage": fp.stage,
        "preorder": {s: _pairs(fp.relation[s], B.carriers[s]) for s in sorted(fp.relation)},
        "stages": stages,
    }
    lines = [f"--- free preorder of {A.name} under the transitions of {mod.name}, stable at stage {fp.stage}"]
    for k, st in enumerate(stages):
        lines.append(f"--- stage {k}: " + "; ".join(f"{s}: {' '.join(f'({a},{b})' for a, b in ps)}" for s, ps in st.items()))
    for s in sorted(fp.relation):
        lines.append(format_preorder(fp.relation[s], B.carriers[s], s))
    return res, EXIT_OK, lines


def _pairs(rel, carrier):
    pos = {x: i for i, x in enumerate(carrier)}
    return [[a, b] for a, b in sorted(rel, key=lambda p: (pos[p[0]], pos[p[1]])) if a != b]


def cmd_satisfies(args, L):
    A = _algebra(L, args.algebra_file, args.algebra)
    # the algebra's signature carries the name of the module it was read against
    mod = L.db.get(args.module or A.signature.name)
    rho = parse_sentence(args.sentence, mod)
    ok = satisfies(A, rho)
    res = {"command": "satisfies", "algebra": A.name, "sentence": args.sentence, "holds": ok}
    lines = [f"algebra: {A.name}", f"sentence: {args.sentence}", f"holds: {str(ok).lower()}"]
    return res, (EXIT_OK if ok else EXIT_FALSE), lines


def cmd_check_coherence(args, L):
    mod = L.module(args.module_file, args.module)
    rep = coherence.check_coherence(mod, args.size, args.depth, _limits(args))
    res = {
        "command": "check-coherence",
        "module": mod.name,
        "status": rep.status,
        "checked": rep.checked,
        "bounds": rep.bounds,
    }
    lines = [f"module: {mod.name}", f"status: {rep.status}", f"checked: {rep.checked}", f"bounds: size {rep.bounds['size']}, depth {rep.bounds['depth']}"]
    if rep.reason:
        res["reason"] = rep.reason
        lines.append(f"reason: {rep.reason}")
    c = rep.counterexample
    if c is not None:
        cx = {
            "t": format_term(c.source, mod),
            "t_prime": format_term(c.target, mod),
            "rule": c.rule,
            "path": _path(c.context),
            "substitution": _subst(c.substitution, mod),
            "nf_t": format_term(c.source_nf, mod),
            "nf_t_prime": format_term(c.target_nf, mod),
            "frontier": [format_term(u, mod) for u in c.frontier],
            "exhaustive": c.exhaustive,
        }
        res["counterexample"] = cx
        sub = ", ".join(f"{k} := {v}" for k, v in cx["substitution"].items())
        lines += [
            f"t: {cx['t']}",
            f"t': {cx['t_prime']}",
            f"step: {cx['t']} --[{cx['rule']}@{cx['path']}, {{{sub}}}]--> {cx['t_prime']}",
            f"nf(t): {cx['nf_t']}",
            f"nf(t'): {cx['nf_t_prime']}",
            f"frontier from nf(t): {' ; '.join(cx['frontier'])}",
            f"exhaustive: {str(c.exhaustive).lower()}",
        ]
    code = {coherence.OK: EXIT_OK, coherence.COUNTEREXAMPLE: EXIT_FALSE}.get(rep.status, EXIT_BUDGET)
    return res, code, lines


def cmd_check_protection(args, L):
    mod = L.module(args.module_file, args.module)
    overrides = {}
    for spec in args.normal_forms or ():
        sort, _, names = spec.partition("=")
        overrides[sort] = [parse_term(n, mod, sort=sort) for n in names.split(",") if n]
    rep = coherence.check_protection(mod, args.size, overrides or None, _limits(args))
    sorts = {}
    lines = [f"module: {mod.name}", f"bound: {rep.bound}"]
    for s, p in rep.sorts.items():
        sorts[s] = {
            "normal_forms": [format_term(c, mod) for c in p.normal_forms],
            "checked": p.checked,
            "junk": [[format_term(t, mod), format_term(u, mod)] for t, u in p.junk],
            "junk_total": p.junk_total,
            "confusion": [[format_term(a, mod), format_term(b, mod)] for a, b in p.confusion],
        }
        d = sorts[s]
        lines.append(f"sort {s}: normal forms {', '.join(d['normal_forms'])}; checked {d['checked']}")
        lines.append(f"  junk_total: {d['junk_total']}")
        for t, u in d["junk"]:
            lines.append(f"  junk: {t} (normal form {u})")
        for a, b in d["confusion"]:
            lines.append(f"  confusion: {a} and {b}")
    res = {"command": "check-protection", "module": mod.name, "bound": rep.bound, "sorts": sorts,
           "out_of_fragment": rep.out_of_fragment, "ok": rep.ok}
    if rep.out_of_fragment:
        lines.append(f"out of fragment: {', '.join(rep.out_of_fragment)}")
    lines.append(f"ok: {str(rep.ok).lower()}")
    return res, (EXIT_OK if rep.ok else EXIT_FALSE), lines


def _morphisms(L, paths):
    out = []
    for p in paths:
        doc = L.load(p)
        if not doc.morphisms:
            raise ParseError(f"{p} defines no morphism")
        out.extend(doc.morphisms if len(paths) == 1 else doc.morphisms[:1])
    return out


def cmd_pushout(args, L):
    phis = _morphisms(L, [args.morph1, args.morph2])
    phi1, phi2 = phis[0], phis[1]
    sq, mod = modular.pushout_modules(phi1, phi2, L.db.get(phi1.target_module), L.db.get(phi2.target_module), args.name)
    text = format_module(mod)
    t1 = modular.format_morphism(_named(sq.theta1, "theta1"))
    t2 = modular.format_morphism(_named(sq.theta2, "theta2"))
    # Bool is implicit in every module and is left out of both renderings
    res = {"command": "pushout", "module": mod.name,
           "sorts": sorted(s for s in mod.signature.sorts if s != BOOL),
           "ops": [str(o) for o in mod.signature.ops if o not in (TRUE, FALSE)],
           "text": text + "\n" + t1 + "\n" + t2}
    return res, EXIT_OK, [res["text"].rstrip("\n")]


def _named(phi, name):
    phi.name = name
    return phi


def cmd_amalgamate(args, L):
    phis = _morphisms(L, [args.square])
    if len(phis) < 2:
        raise ParseError(f"{args.square} must define the two morphisms of the span")
    sq = modular.pushout(phis[0], phis[1], args.name)
    M1 = _algebra(L, args.alg1)
    M2 = _algebra(L, args.alg2)
    try:
        M = modular.amalgamate_models(sq, M1, M2)
    except AmalgamationError as exc:
        res = {"command": "amalgamate", "ok": False, "error": str(exc)}
        return res, EXIT_FALSE, ["ok: false", f"error: {exc}"]
    text = format_algebra(M, sq.apex.name)
    res = {"command": "amalgamate", "ok": True, "algebra": text}
    return res, EXIT_OK, ["ok: true", text.rstrip("\n")]


def _limits(args):
    return engine.EngineLimits(
        max_normalization_steps=args.max_steps,
        max_search_depth=getattr(args, "depth", None) or engine.DEFAULT_LIMITS.max_search_depth,
        max_condition_depth=args.condition_depth,
    )


# -- entry point -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--load", action="append", default=[], metavar="FILE", help="load modules from FILE first")
    common.add_argument("--module", help="module to use when a file defines several (default: the last one)")
    common.add_argument("--max-steps", type=int, default=100_000, help="normalization step budget")
    common.add_argument("--condition-depth", type=int, default=4, help="search depth for transition conditions")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="poarewrite", description="Rewriting over preordered algebras.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("reduce", parents=[common], help="equational normal form")
    s.add_argument("module_file")
    s.add_argument("term")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("search", parents=[common], help="breadth-first search over normalize/step/normalize")
    s.add_argument("module_file")
    s.add_argument("term")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--goal", help="pattern the reached states must match")
    g.add_argument("--terminal", action="store_true", help="report states without successors")
    s.add_argument("--depth", type=int, default=12)
    s.add_argument("--anywhere", action="store_true", help="match the goal at any position")
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("step", parents=[common], help="all one-step transition successors")
    s.add_argument("module_file")
    s.add_argument("term")
    s.set_defaults(func=cmd_step)

    s = sub.add_parser("free-preorder", parents=[common], help="least preorder on a finite algebra")
    s.add_argument("algebra_file")
    s.add_argument("module_file")
    s.add_argument("--algebra")
    s.set_defaults(func=cmd_free_preorder)

    s = sub.add_parser("satisfies", parents=[common], help="evaluate a sentence in a finite algebra")
    s.add_argument("algebra_file")
    s.add_argument("sentence")
    s.add_argument("--algebra")
    s.set_defaults(func=cmd_satisfies)

    s = sub.add_parser("check-coherence", parents=[common], help="bounded coherence check")
    s.add_argument("module_file")
    s.add_argument("--size", type=int, default=8)
    s.add_argument("--depth", type=int, default=6)
    s.set_defaults(func=cmd_check_coherence)

    s = sub.add_parser("check-protection", parents=[common], help="bounded no-junk / no-confusion check")
    s.add_argument("module_file")
    s.add_argument("--size", type=int, default=6)
    s.add_argument("--normal-forms", action="append", metavar="SORT=c1,c2", help="designated normal forms of SORT")
    s.set_defaults(func=cmd_check_protection)

    s = sub.add_parser("pushout", parents=[common], help="pushout of two morphisms with a common source")
    s.add_argument("morph1")
    s.add_argument("morph2")
    s.add_argument("--name", default="")
    s.set_defaults(func=cmd_pushout)

    s = sub.add_parser("amalgamate", parents=[common], help="amalgamate two models over a pushout square")
    s.add_argument("square", help="file with the two morphisms of the span")
    s.add_argument("alg1")
    s.add_argument("alg2")
    s.add_argument("--name", default="")
    s.set_defaults(func=cmd_amalgamate)
    return p


def run(argv=None) -> tuple[int, str]:
    """Run one invocation; returns (exit status, printed output)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_USAGE), ""
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    fmt = args.format
    try:
        L = _Loader(args.load)
        res, code, lines = args.func(args, L)
    except BudgetExhausted as exc:
        res, code = {"command": args.command, "error": "budget", "message": str(exc)}, EXIT_BUDGET
        lines = [f"budget error: {exc}"]
    except PoaError as exc:
        res, code = {"command": args.command, "error": "input", "message": str(exc)}, EXIT_USAGE
        lines = [f"input error: {exc}"]
    res["exit"] = code
    out = json.dumps(res, indent=2, sort_keys=True) if fmt == "json" else "\n".join(lines)
    return code, out


def main(argv=None) -> int:
    code, out = run(argv)
    if out:
        print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
