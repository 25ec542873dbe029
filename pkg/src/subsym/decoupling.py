"""Decoupled sub-systems: tests, detection through sub-system symmetries, straightening maps."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import sympy as sp

from .expr import SubsymError, is_zero, normalize, numerator, to_text
from .fields import PointField
from .invariance import (NonlinearUnknown, _split_by_variables, determining_equations,
                         solve_linear_params)
from .jet import JetContext
from .systems import DiffSystem, PointMap, SubSystem, make_monic, transform_expressions


@dataclass
class DecouplingCertificate:
    betas: tuple
    free_var: str | None = None
    field: object = None
    map: PointMap | None = None
    factor: object = sp.S.One
    status: dict = dc_field(default_factory=dict)

    def as_dict(self):
        out = {"betas": [to_text(b) for b in self.betas], "free_var": self.free_var,
               "factor": to_text(self.factor), "status": dict(self.status)}
        if isinstance(self.field, PointField):
            out["field"] = {"xi": [to_text(c) for c in self.field.xi],
                            "eta": [to_text(c) for c in self.field.eta]}
        elif self.field is not None:
            out["field"] = {"char": [to_text(c) for c in self.field.alpha]}
        return out


def is_decoupled(ss, free_var, factor=1):
    """True iff factor * (sub-system) has no jets of the dependent variables other than ``free_var``.

    ``ss`` is a SubSystem, a DiffSystem or a list of expressions together
    with a context. Returns (verdict, offending jets).
    """
    factor = sp.sympify(factor)
    if is_zero(factor):
        raise ValueError("the factor must be nonzero")
    if isinstance(ss, SubSystem):
        ctx, exprs = ss.ctx, ss.evaluate()
    elif isinstance(ss, DiffSystem):
        ctx, exprs = ss.ctx, list(ss.equations)
    else:
        ctx, exprs = ss
    keep = ctx.dep_index(free_var)
    offending = []
    for e in exprs:
        fe = factor * e
        for s, (a, _) in ctx.jets_in(fe).items():
            if a != keep and not is_zero(sp.diff(fe, s)):
                offending.append(s)
    return not offending, offending


def verify_straightening(T: PointMap, f: PointField):
    """X Xbar^i = 0, X Ubar^a = delta^{a, last} and a nonzero Jacobian.

    Returns (verdict, details) where details lists the failing components.
    """
    src = T.src
    n_x, n_u = src.p, src.q
    details = []
    for k, comp in enumerate(T.forward):
        target = 1 if k == n_x + n_u - 1 else 0
        if not is_zero(f.act(comp) - target):
            details.append(f"component {k}: X applied gives {to_text(f.act(comp))}, expected {target}")
    det = T.jacobian_det()
    if is_zero(det):
        details.append("Jacobian determinant vanishes")
    return not details, details


@dataclass
class Ansatz:
    """Point-field template lam*(xi, eta) with unknown constants, and the beta^1 expression."""

    xi: tuple
    eta: tuple
    constants: tuple = ()
    beta1: object = None
    lam_args: tuple | None = None
    candidates: tuple = ()
    cases: tuple = ("beta2=0", "beta2=1")


@dataclass
class Detection:
    certificates: list
    branches: dict


def _solve_constants(eqs, constants, params):
    """Solutions for unknown constants: linear solver first, polynomial solve as fallback."""
    try:
        sol = solve_linear_params(eqs, constants=constants, params=params)
    except NonlinearUnknown:
        sol = None
    if sol is not None:
        if not sol.consistent:
            return [], sol.certificate
        return [sol.assignments], []
    allowed = set(constants) | set(params)
    split = []
    for e in eqs:
        for g in _split_by_variables(numerator(e), allowed):
            g = normalize(g)
            if g != 0 and g not in split:
                split.append(g)
    return sp.solve(split, list(constants), dict=True), []


def _leading_for(sys: DiffSystem, betas):
    """Lead of the equation with unit multiplier; keeps the case split nonsingular."""
    for i in reversed(range(len(betas))):
        if sp.sympify(betas[i]) == 1:
            return (sys.leading[i],)
    return None


def _instances(solution, constants):
    """One concrete assignment per remaining free constant."""
    full = {c: solution.get(c, c) for c in constants}
    free = sorted(set().union(*[sp.sympify(v).free_symbols for v in full.values()]) & set(constants),
                  key=str)
    if not free:
        return [full]
    out = []
    for c in free:
        pick = {d: (1 if d == c else 0) for d in free}
        out.append({k: sp.sympify(v).subs(pick) for k, v in full.items()})
    return out


def _normalized(betas, f: PointField):
    """Clear denominators of the betas and the field, make the last nonzero component positive."""
    ctx = f.ctx
    den = sp.lcm([sp.fraction(sp.together(b))[1] for b in betas])
    betas = tuple(normalize(b * den) for b in betas)
    comps = list(f.xi) + list(f.eta)
    fden = sp.lcm([sp.fraction(sp.together(c))[1] for c in comps])
    comps = [normalize(c * fden) for c in comps]
    nonzero = [c for c in comps if c != 0]
    if nonzero and sp.expand(nonzero[-1]).could_extract_minus_sign():
        comps = [-c for c in comps]
    return betas, PointField(tuple(comps[:ctx.p]), tuple(comps[ctx.p:]), ctx)


def certify(sys: DiffSystem, betas, f, lam_args=None):
    """Field f is a sub-system symmetry of beta^i Delta_i for an arbitrary lam multiple."""
    ss = SubSystem.combination(sys, list(betas))
    ds = determining_equations(f, ss, mode="subsystem", lam_args=lam_args,
                               leading=_leading_for(sys, betas))
    return ds.empty, ds


def detect_decouplable(sys: DiffSystem, ansatz: Ansatz) -> Detection:
    """Search for decouplable sub-systems beta^1 Delta_1 + beta^2 Delta_2 (two equations).

    Each case of the beta split is solved for the ansatz constants; every
    candidate solution is then re-certified with symbolic lam before it is
    reported. Branches with only the zero field are reported as pruned.
    """
    if len(sys) != 2:
        raise SubsymError("decoupling detection handles two-equation systems")
    ctx = sys.ctx
    constants = tuple(sp.sympify(c) for c in ansatz.constants)
    params = tuple(sp.Symbol(p) for p in ctx.params if sp.Symbol(p) not in constants)
    sys_params = set().union(*[e.free_symbols for e in sys.equations]) & set(constants)
    template = PointField(ansatz.xi, ansatz.eta, ctx)
    certs, branches = [], {}
    for case in ansatz.cases:
        betas = (sp.S.One, sp.S.Zero) if case == "beta2=0" else (sp.sympify(ansatz.beta1), sp.S.One)
        ss = SubSystem.combination(sys, list(betas))
        ds = determining_equations(template, ss, mode="subsystem", lam_args=ansatz.lam_args,
                                   leading=_leading_for(sys, betas))
        sols, obstruction = _solve_constants(ds.equations, constants, params) if not ds.empty \
            else ([{}], [])
        found = []
        for sol in sols:
            for inst in _instances(sol, constants):
                f = template
                b = tuple(normalize(sp.sympify(x).subs(inst)) for x in betas)
                f = PointField(tuple(normalize(c.subs(inst)) for c in template.xi),
                               tuple(normalize(c.subs(inst)) for c in template.eta), ctx)
                if all(c == 0 for c in f.xi + f.eta) or all(x == 0 for x in b):
                    continue
                if any(x.free_symbols & set(constants) for x in b + f.xi + f.eta):
                    continue
                fixed = {c: v for c, v in inst.items() if c in sys_params}
                try:
                    target = sys
                    if fixed:
                        target = DiffSystem(ctx, tuple(normalize(e.subs(fixed)) for e in sys.equations),
                                            sys.leading, sys.names)
                    ok, _ = certify(target, b, f, ansatz.lam_args)
                except SubsymError:
                    ok = False
                if not ok:
                    continue
                b, f = _normalized(b, f)
                if any(_same(b, f, c.betas, c.field) for c in found):
                    continue
                status = {"sub-system symmetry": True, "source": case}
                if fixed:
                    status["parameters"] = {str(c): to_text(v) for c, v in fixed.items()}
                found.append(DecouplingCertificate(b, None, f, status=status))
        branches[case] = {
            "equations": len(ds),
            "status": "solutions" if found else "pruned",
            "obstruction": [to_text(o) for o in obstruction],
        }
        certs.extend(found)
    for betas, f in ansatz.candidates:
        ok, ds = certify(sys, betas, f, ansatz.lam_args)
        if ok:
            certs.append(DecouplingCertificate(tuple(sp.sympify(b) for b in betas), None, f,
                                               status={"sub-system symmetry": True,
                                                       "source": "candidate"}))
        branches.setdefault("candidates", []).append(ok)
    return Detection(certs, branches)


def _same(b1, f1, b2, f2):
    """Proportional betas and proportional fields."""
    def prop(u, v):
        u, v = [sp.sympify(a) for a in u], [sp.sympify(a) for a in v]
        return all(is_zero(u[i] * v[j] - u[j] * v[i]) for i in range(len(u)) for j in range(len(u)))
    return prop(b1, b2) and prop(list(f1.xi) + list(f1.eta), list(f2.xi) + list(f2.eta))


@dataclass
class PipelineResult:
    system: DiffSystem
    certificate: DecouplingCertificate
    side_conditions: list


def decouple_pipeline(sys: DiffSystem, cert: DecouplingCertificate, T: PointMap, complement=None,
                      free_var=None) -> PipelineResult:
    """Transform the decoupled combination and a complement, normalize, re-check decoupledness.

    ``complement`` are the multipliers of the second equation of the new
    system (default: the first parent equation whose multiplier is zero in
    ``cert``, or the first one). The free variable defaults to the first
    barred dependent variable.
    """
    betas = [sp.sympify(b) for b in cert.betas]
    if complement is None:
        k = next((i for i, b in enumerate(betas) if b == 0), 0)
        complement = [1 if i == k else 0 for i in range(len(betas))]
    rows = []
    for bs in (betas, complement):
        rows.append(normalize(sum((b * e for b, e in zip(bs, sys.equations)), sp.S.Zero)))
    straight = None
    if isinstance(cert.field, PointField):
        straight, _ = verify_straightening(T, cert.field)
    res = transform_expressions(rows, T)
    out = DiffSystem(T.dst, tuple(res.equations), _carried_leading(sys, res.equations, T))
    monic = make_monic(out)
    free = free_var or T.dst.deps[0]
    ok, _ = is_decoupled((monic.ctx, [monic.equations[0]]), free)
    status = dict(cert.status)
    status.update({"straightening": straight, "decoupled": ok})
    new = DecouplingCertificate(tuple(betas), free, cert.field, T, cert.factor, status)
    return PipelineResult(monic, new, list(res.side_conditions))


def _carried_leading(sys, equations, T):
    """Row i solves for barred variable i with the parent's leading multi-index, when possible."""
    dst = T.dst
    out = []
    for i, e in enumerate(equations):
        J = sys.leading[i][1] if i < len(sys.leading) else None
        pick = None
        if J is not None and i < dst.q:
            s = dst.jet(i, J)
            c = sp.diff(e, s)
            if c != 0 and not c.has(s) and not is_zero(c):
                pick = s
        out.append(pick)
    return tuple(out) if all(p is not None for p in out) else None


# ---------------------------------------------------------------------------
# catalog of straightening maps


def polar_map(src: JetContext, names=("r", "theta")) -> PointMap:
    """(t, x, y) -> (t, r, theta) for a context with one independent and two dependent variables."""
    t = src.x[0]
    x, y = src.u
    dst = JetContext.create(src.indep, names, params=src.params, opaque=dict(src.opaque))
    r, th = dst.u
    forward = (t, sp.sqrt(x ** 2 + y ** 2), sp.atan2(y, x))
    inverse = (dst.x[0], r * sp.cos(th), r * sp.sin(th))
    return PointMap(src, dst, forward, inverse)


def shear_map(src: JetContext, k, names=("ubar", "vbar")) -> PointMap:
    """(u, v) -> (v - k u, u), straightening d_u + k d_v."""
    u, v = src.u
    k = sp.sympify(k)
    dst = JetContext.create(src.indep, names, params=src.params, opaque=dict(src.opaque))
    ub, vb = dst.u
    forward = tuple(src.x) + (v - k * u, u)
    inverse = tuple(dst.x) + (vb, ub + k * vb)
    return PointMap(src, dst, forward, inverse)


def identity_map(src: JetContext) -> PointMap:
    """(x, u) -> (x, u); the second dependent variable is the translated one."""
    dst = JetContext.create(src.indep, src.deps, params=src.params, opaque=dict(src.opaque))
    return PointMap(src, dst, tuple(src.x + src.u), tuple(dst.x + dst.u))


CATALOG = {"polar": polar_map, "shear": shear_map, "identity": identity_map}


def catalog_map(name, src, **kw) -> PointMap:
    try:
        return CATALOG[name](src, **kw)
    except KeyError:
        raise SubsymError(f"unknown catalog map {name!r}; known: {', '.join(CATALOG)}") from None
