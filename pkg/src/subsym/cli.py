"""Command-line front end.

Exit codes: 0 every requested check holds, 1 a check fails, 2 usage error,
3 parse error in a system file or expression.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import sympy as sp

from . import corpus
from .conservation import (NonFunctionFluxes, NotAConservationLaw, NotASubsymmetry, RankDeficient,
                           deform, inverse_deform, is_trivial, telegraph_catalog, verify_cl)
from .decoupling import (Ansatz, DecouplingCertificate, catalog_map, decouple_pipeline,
                         detect_decouplable, is_decoupled)
from .expr import ParseError, SubsymError, to_text
from .fields import evaluate_on, flow_truncated, truncate
from .fileformat import _bracketed, _parse_field, loads, parse_multipliers
from .invariance import (check_subsymmetry, check_subsystem_symmetry, check_symmetry, classify,
                         determining_equations)

SCHEMA = "subsym-report/1"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PARSE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Report:
    def __init__(self, command, argv):
        self.data = {"schema": SCHEMA, "command": command, "argv": list(argv), "inputs": {},
                     "verdicts": [], "results": {}}
        self.lines = []
        self.failed = False
        self.json_path = None

    def verdict(self, name, ok, detail=None):
        self.data["verdicts"].append({"check": name, "holds": bool(ok), **({"detail": detail} if detail else {})})
        self.lines.append(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
        if not ok:
            self.failed = True

    def say(self, text):
        self.lines.append(text)


# ---------------------------------------------------------------------------
# inputs


def _load_system(spec):
    if spec.startswith("corpus:"):
        id_ = spec.split(":", 1)[1]
        try:
            raw = corpus.text(id_)
        except corpus.UnknownEntry as exc:
            raise UsageError(str(exc)) from None
        return corpus.load(id_), raw
    if not os.path.exists(spec):
        raise UsageError(f"no such system file: {spec}")
    with open(spec, encoding="utf-8") as fh:
        raw = fh.read()
    return loads(raw, source=spec), raw


def _field(entry, args):
    if getattr(args, "field", None):
        if args.field in entry.fields:
            return entry.fields[args.field]
        return _parse_field(args.field, entry.ctx)
    raise UsageError("a field is required (--field NAME, or --field 'char [...]' / 'point xi=[...] eta=[...]')")


def _sub(entry, spec):
    if spec is None:
        raise UsageError("a sub-system is required (--sub NAME or inline multipliers like 'v*D2 - sin(u)*D1')")
    if spec in entry.subsystems or spec in entry.system.names:
        return corpus.subsystem(entry, spec)
    return parse_multipliers(spec, entry.system)


def _fluxes(entry, spec):
    if spec in entry.laws:
        return entry.laws[spec]
    fluxes = tuple(entry.ctx.parse(c) for c in _bracketed(spec, "fluxes"))
    if len(fluxes) != entry.ctx.p:
        raise UsageError(f"need {entry.ctx.p} fluxes")
    return fluxes


def _texts(exprs):
    return [to_text(e) for e in exprs]


# ---------------------------------------------------------------------------
# commands


def cmd_check(kind):
    def run(args, entry, rep):
        f = _field(entry, args)
        if kind == "sym":
            r = check_symmetry(f, entry.system)
        else:
            ss = _sub(entry, args.sub)
            r = (check_subsystem_symmetry if args.subsystem else check_subsymmetry)(f, ss)
        rep.data["results"] = r.as_dict(entry.system.names)
        rep.verdict(f"{'symmetry' if kind == 'sym' else 'sub-symmetry'} of {args.field}", r.holds)
        for res in r.residuals:
            rep.say(f"  residual: {to_text(res)}")
        for c in r.side_conditions:
            rep.say(f"  assuming {to_text(c)} != 0")
    return run


def cmd_classify(args, entry, rep):
    tag = classify(_field(entry, args), _sub(entry, args.sub))
    rep.data["results"] = {"classification": tag}
    rep.say(f"classification: {tag}")
    rep.verdict("classification computed", True)


def cmd_determine(args, entry, rep):
    ctx = entry.ctx
    if args.unknowns:
        ops = {}
        for w in args.unknowns.split():
            name, _, arity = w.partition("/")
            ops[name] = int(arity)
        ctx = ctx.extend(opaque=ops)
    f = _parse_field(args.field, ctx) if args.field not in entry.fields else entry.fields[args.field]
    ss = _sub(entry, args.sub)
    lam_args = None
    if args.lam_args:
        lam_args = [sp.Symbol(s.strip()) for s in args.lam_args.split(",")]
    ds = determining_equations(f, ss, mode=args.mode, lam_args=lam_args, use_lambda=args.lam)
    rep.data["results"] = {"equations": _texts(ds.equations), "split": _texts(ds.split)}
    rep.say(f"{len(ds)} determining equation(s):")
    for e in ds.equations:
        rep.say(f"  {to_text(e)} = 0")
    rep.verdict("determining system derived", True)


def cmd_decouple(args, entry, rep):
    sys_ = entry.system
    if args.beta_order not in (None, 0):
        raise UsageError("only multipliers depending on (x, u) are supported (--beta-order 0)")
    if args.sub:
        ss = _sub(entry, args.sub)
        betas = corpus.scalar_betas(ss)
        free = args.free or entry.ctx.deps[0]
        if not args.map:
            ok, bad = is_decoupled(ss, free)
            rep.data["results"] = {"decoupled": ok, "offending": _texts(bad)}
            rep.verdict(f"decoupled in {free}", ok, None if ok else "depends on " + ", ".join(_texts(bad)))
            return
        T = entry.maps.get(args.map) or catalog_map(args.map, entry.ctx)
        f = _field(entry, args) if args.field else None
        cert = DecouplingCertificate(betas, field=f)
        comp = corpus.scalar_betas(_sub(entry, args.complement)) if args.complement else None
        res = decouple_pipeline(sys_, cert, T, complement=comp, free_var=args.free)
        rep.data["results"] = {"system": _texts(res.system.equations),
                               "certificate": res.certificate.as_dict(),
                               "side_conditions": _texts(res.side_conditions)}
        rep.say("transformed system:")
        for e in res.system.equations:
            rep.say(f"  {to_text(e)} = 0")
        if f is not None:
            rep.verdict("straightening map", bool(res.certificate.status.get("straightening")))
        rep.verdict(f"decoupled in {res.certificate.free_var}", res.certificate.status["decoupled"])
        return
    if not (args.xi and args.eta):
        raise UsageError("decouple needs --sub, or an ansatz via --xi/--eta/--constants/--beta1")
    consts = [sp.Symbol(c.strip()) for c in (args.constants or "").split(",") if c.strip()]
    ctx = entry.ctx.extend(params=[str(c) for c in consts if str(c) not in entry.ctx.params])
    xi = [ctx.parse(c) for c in _bracketed(args.xi, "xi")]
    eta = [ctx.parse(c) for c in _bracketed(args.eta, "eta")]
    beta1 = ctx.parse(args.beta1) if args.beta1 else sp.S.Zero
    lam_args = [sp.Symbol(s.strip()) for s in args.ansatz_args.split(",")] if args.ansatz_args else None
    sys2 = type(sys_)(ctx, sys_.equations, sys_.leading, sys_.names)
    det = detect_decouplable(sys2, Ansatz(tuple(xi), tuple(eta), tuple(consts), beta1, lam_args))
    rep.data["results"] = {"certificates": [c.as_dict() for c in det.certificates],
                           "branches": det.branches}
    for name, b in det.branches.items():
        rep.say(f"branch {name}: {b['status'] if isinstance(b, dict) else b}")
    for c in det.certificates:
        d = c.as_dict()
        rep.say(f"  betas {d['betas']}  field {d['field']}")
    rep.verdict("decouplable sub-system found", bool(det.certificates))


def cmd_verify_cl(args, entry, rep):
    try:
        cl = verify_cl(_fluxes(entry, args.cl), entry.system)
    except NotAConservationLaw as exc:
        rep.data["results"] = {"residual": to_text(exc.residual)}
        rep.verdict("conservation law", False, f"residual {to_text(exc.residual)}")
        return
    rep.data["results"] = cl.as_dict()
    rep.say("characteristic: " + ", ".join(f"{k}: {v}" for k, v in cl.as_dict()["characteristic"].items()))
    rep.say(f"trivial: {is_trivial(cl)}")
    rep.verdict("conservation law", True)


def cmd_deform(args, entry, rep):
    cl = verify_cl(_fluxes(entry, args.cl), entry.system)
    f = _field(entry, args)
    ss = _sub(entry, args.sub) if args.sub else None
    try:
        out = deform(f, cl, ss)
    except NotASubsymmetry as exc:
        rep.data["results"] = {"refused": str(exc)}
        rep.verdict("deformation", False, str(exc))
        return
    except NotAConservationLaw as exc:
        rep.verdict("deformation", False, f"residual {to_text(exc.residual)}")
        return
    rep.data["results"] = out.as_dict()
    rep.say("fluxes: " + ", ".join(_texts(out.fluxes)))
    rep.say(f"trivial: {is_trivial(out)}")
    rep.verdict("deformed fluxes form a conservation law", True)


def cmd_inverse(args, entry, rep):
    src, dst = _fluxes(entry, args.source), _fluxes(entry, args.target)
    try:
        inv = inverse_deform(src, dst, entry.system)
    except RankDeficient as exc:
        rep.data["results"] = {"error": "RankDeficient", "detail": str(exc)}
        rep.verdict("inverse deformation", False, f"RankDeficient: {exc}")
        return
    except NonFunctionFluxes as exc:
        rep.data["results"] = {"error": "NonFunctionFluxes", "detail": str(exc)}
        rep.verdict("inverse deformation", False, f"NonFunctionFluxes: {exc}")
        return
    rep.data["results"] = {"field": _texts(inv.field.alpha), "jacobian": to_text(inv.jacobian_det)}
    rep.say("field: " + " + ".join(f"({to_text(a)})*d/d{u}" for a, u in zip(inv.field.alpha, entry.ctx.deps)))
    rep.verdict("inverse deformation", True)


def cmd_flow(args, entry, rep):
    f = _field(entry, args)
    sol = [entry.ctx.parse(c) for c in _bracketed(args.solution, "solution")]
    u, eps = flow_truncated(f, sol, order=args.order)
    rows = []
    for i, e in enumerate(entry.system.equations):
        r = truncate(evaluate_on(e, entry.ctx, u), eps, args.order)
        rows.append(to_text(sp.expand(r)))
        rep.say(f"{entry.system.names[i]} on flowed solution: {rows[-1]} + O(eps^{args.order + 1})")
    rep.data["results"] = {"flow": _texts(u), "residuals": rows}
    rep.verdict("flow computed", True)


def cmd_telegraph(args, entry, rep):
    for c in telegraph_catalog(include_corrected=args.corrected):
        ok = c.verified
        detail = None if ok else ("not a conservation law" if c.law is None else "field mismatch")
        rep.verdict(f"{c.entry}:{c.name}", ok, detail)
        rep.data["results"][f"{c.entry}:{c.name}"] = {
            "F": to_text(c.F), "G": to_text(c.G), "fluxes": _texts(c.fluxes),
            "field": _texts(c.field.alpha), "law": c.law is not None, "deforms": c.deforms,
            "inverse_matches": c.inverse_matches, "residual": to_text(c.residual)}


def cmd_corpus(args, entry, rep):
    if args.action == "list":
        for i in corpus.list_ids():
            rep.say(f"{i:20s} {corpus.load(i).meta.get('title', '')}")
        rep.data["results"] = {"ids": corpus.list_ids()}
        return
    if not args.id:
        raise UsageError(f"corpus {args.action} needs an id")
    ids = corpus.list_ids() if args.id == "all" else [args.id]
    for i in ids:
        if i not in corpus.IDS:
            raise UsageError(f"unknown corpus id {i!r}")
        if args.action == "show":
            rep.say(corpus.text(i))
            continue
        for o in corpus.verify_entry(i):
            rep.verdict(f"{i}: {o.expectation}", o.ok, None if o.ok else f"got {o.actual}")


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="subsym", description="Sub-symmetry toolkit for differential systems.")
    sub = p.add_subparsers(dest="command")

    def common(sp_, system=True):
        if system:
            sp_.add_argument("--system", required=True, help="corpus:<id> or a .subsym file")
        sp_.add_argument("--json", metavar="PATH", help="write a JSON report to PATH ('-' for stdout)")
        sp_.add_argument("--max-order", type=int, help="truncation order (also SUBSYM_MAX_ORDER)")
        return sp_

    s = common(sub.add_parser("check-sym", help="symmetry check"))
    s.add_argument("--field", required=True)
    s.set_defaults(func=cmd_check("sym"))
    for name, helptext in (("check-subsym", "sub-symmetry check"),):
        s = common(sub.add_parser(name, help=helptext))
        s.add_argument("--field", required=True)
        s.add_argument("--sub", required=True)
        s.add_argument("--subsystem", action="store_true",
                       help="restrict on the sub-system alone (sub-system symmetry)")
        s.set_defaults(func=cmd_check("subsym"))
    s = common(sub.add_parser("classify", help="symmetry / sub-system symmetry / sub-symmetry tag"))
    s.add_argument("--field", required=True)
    s.add_argument("--sub", required=True)
    s.set_defaults(func=cmd_classify)
    s = common(sub.add_parser("determine", help="determining equations for a field template"))
    s.add_argument("--field", required=True)
    s.add_argument("--sub", required=True)
    s.add_argument("--mode", choices=("subsymmetry", "subsystem"), default="subsymmetry")
    s.add_argument("--unknowns", help="unknown functions with arity, e.g. 'xi/3 eta/3'")
    s.add_argument("--lam", action="store_true", help="multiply by an arbitrary function lam")
    s.add_argument("--lam-args", help="comma separated arguments of lam (default: all x and u)")
    s.set_defaults(func=cmd_determine)
    s = common(sub.add_parser("decouple", help="decoupling tests, detection and the transform pipeline"))
    s.add_argument("--sub")
    s.add_argument("--free", help="the only dependent variable the combination may involve")
    s.add_argument("--map", help="map name from the system file or a catalog name")
    s.add_argument("--field")
    s.add_argument("--complement")
    s.add_argument("--xi")
    s.add_argument("--eta")
    s.add_argument("--constants")
    s.add_argument("--beta1")
    s.add_argument("--ansatz-args")
    s.add_argument("--beta-order", type=int)
    s.set_defaults(func=cmd_decouple)
    s = common(sub.add_parser("verify-cl", help="verify a conservation law"))
    s.add_argument("--cl", required=True, help="law name or '[F1, F2, ...]'")
    s.set_defaults(func=cmd_verify_cl)
    s = common(sub.add_parser("deform", help="deform a conservation law by a sub-symmetry"))
    s.add_argument("--cl", required=True)
    s.add_argument("--field", required=True)
    s.add_argument("--sub")
    s.set_defaults(func=cmd_deform)
    s = common(sub.add_parser("inverse-deform", help="field deforming one law into another"))
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.set_defaults(func=cmd_inverse)
    s = common(sub.add_parser("flow", help="truncated flow of a field on an explicit solution"))
    s.add_argument("--field", required=True)
    s.add_argument("--solution", required=True, help="'[expr, ...]' one per dependent variable")
    s.add_argument("--order", type=int, default=2)
    s.set_defaults(func=cmd_flow)
    s = common(sub.add_parser("telegraph-demo", help="run the telegraph catalog"), system=False)
    s.add_argument("--corrected", action="store_true", help="include the corrected tan(u) pair")
    s.set_defaults(func=cmd_telegraph)
    s = common(sub.add_parser("corpus", help="list, show or verify built-in systems"), system=False)
    s.add_argument("action", choices=("list", "show", "verify"))
    s.add_argument("id", nargs="?")
    s.set_defaults(func=cmd_corpus)
    return p


def run(argv=None):
    """Execute a command; returns (exit code, Report)."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_USAGE), None
    if not getattr(args, "command", None):
        parser.print_help()
        return EXIT_USAGE, None
    if args.max_order:
        os.environ["SUBSYM_MAX_ORDER"] = str(args.max_order)
    rep = Report(args.command, argv)
    rep.json_path = args.json
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        entry = None
        if getattr(args, "system", None):
            entry, raw = _load_system(args.system)
            rep.data["inputs"] = {"system": args.system, "id": entry.id,
                                  "sha256": hashlib.sha256(raw.encode()).hexdigest()}
        args.func(args, entry, rep)
        code = EXIT_FAIL if rep.failed else EXIT_OK
    except UsageError as exc:
        rep.say(f"usage error: {exc}")
        code = EXIT_USAGE
    except ParseError as exc:
        rep.say(f"parse error: {exc}")
        code = EXIT_PARSE
    except (SubsymError, KeyError, ValueError) as exc:
        rep.say(f"error: {exc}")
        code = EXIT_FAIL
    rep.data["timing_s"] = round(time.perf_counter() - t0, 4)
    rep.data["exit_code"] = code
    rep.data["lines"] = rep.lines
    return code, rep


def main(argv=None):
    code, rep = run(argv)
    if rep is not None:
        args_json = rep.json_path
        if args_json == "-":
            print(json.dumps(rep.data, indent=2))
        else:
            print("\n".join(rep.lines))
            if args_json:
                with open(args_json, "w", encoding="utf-8") as fh:
                    json.dump(rep.data, fh, indent=2)
    return code


if __name__ == "__main__":
    sys.exit(main())
