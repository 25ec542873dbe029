"""Conservation laws: verification, triviality, deformation and the inverse problem."""
from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .expr import SubsymError, is_zero, normalize, opaque, to_text
from .fields import EvoField, apply, as_evo
from .invariance import DeterminingSystem, check_subsymmetry
from .jet import JetContext, adjoint_apply, total_derivative, total_derivative_multi, total_derivative_raw
from .systems import DiffSystem, SubSystem, decompose_on_ideal


class NotAConservationLaw(SubsymError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"divergence does not vanish on solutions: {to_text(residual)}")


class RankDeficient(SubsymError):
    pass


class NonFunctionFluxes(SubsymError):
    pass


class NotASubsymmetry(SubsymError):
    def __init__(self, report):
        self.report = report
        super().__init__("field is not a sub-symmetry of the law's sub-system; "
                         "the deformed divergence need not vanish on solutions")


def divergence(fluxes, ctx: JetContext, raw=False):
    total = sum((total_derivative_raw(F, i, ctx) for i, F in enumerate(fluxes)), sp.S.Zero)
    return total if raw else normalize(total)


@dataclass(eq=False)
class ConsLaw:
    fluxes: tuple
    system: DiffSystem
    gamma: dict = field(default_factory=dict)
    characteristic: dict = field(default_factory=dict)

    @property
    def ctx(self):
        return self.system.ctx

    def divergence(self):
        return divergence(self.fluxes, self.ctx)

    def subsystem(self) -> SubSystem:
        """Sub-system whose evaluation is the divergence (multipliers from the decomposition)."""
        if not self.gamma:
            raise SubsymError("trivial decomposition: the divergence vanishes identically")
        return SubSystem(self.system, ({k: v for k, v in self.gamma.items()},))

    def as_dict(self):
        return {
            "fluxes": [to_text(F) for F in self.fluxes],
            "characteristic": {self.system.names[i]: to_text(c) for i, c in self.characteristic.items()},
            "trivial": is_trivial(self),
        }


def verify_cl(fluxes, sys: DiffSystem) -> ConsLaw:
    """Check that the divergence vanishes on solutions and attach the characteristic."""
    fluxes = tuple(normalize(sp.sympify(F)) for F in fluxes)
    if len(fluxes) != sys.ctx.p:
        raise ValueError(f"need {sys.ctx.p} fluxes")
    div = divergence(fluxes, sys.ctx)
    r = sys.restrict(div)
    if not is_zero(r):
        raise NotAConservationLaw(r)
    dec = decompose_on_ideal(div, sys)
    char = adjoint_apply(dec.gamma, sys.ctx, n_equations=len(sys))
    return ConsLaw(fluxes, sys, dec.gamma, char)


def is_trivial(cl: ConsLaw) -> bool:
    """True iff every characteristic component vanishes on solutions."""
    return all(is_zero(cl.system.restrict(c)) for c in cl.characteristic.values())


def same_law(a: ConsLaw, b: ConsLaw) -> bool:
    """Equality of conservation laws: equal characteristics on solutions."""
    keys = set(a.characteristic) | set(b.characteristic)
    return all(is_zero(a.system.restrict(a.characteristic.get(k, 0) - b.characteristic.get(k, 0)))
               for k in keys)


def apply_to_fluxes(f, fluxes):
    return tuple(apply(f, F) for F in fluxes)


def deform(f, cl: ConsLaw, ss: SubSystem | None = None, check=True) -> ConsLaw:
    """New law with fluxes X F^i; refuses fields that are not sub-symmetries of ``ss``."""
    f = as_evo(f)
    if all(a == 0 for a in f.alpha):
        return verify_cl(tuple(0 for _ in cl.fluxes), cl.system)
    if check:
        if ss is None:
            ss = cl.subsystem()
        rep = check_subsymmetry(f, ss, want_gamma=False)
        if not rep.holds:
            raise NotASubsymmetry(rep)
    return verify_cl(apply_to_fluxes(f, cl.fluxes), cl.system)


def _order0(fluxes, ctx):
    for F in fluxes:
        for _, J in ctx.jets_in(F).values():
            if J.order > 0:
                return False
    return True


def flux_jacobian(fluxes, ctx):
    return sp.Matrix([[normalize(sp.diff(F, u)) for u in ctx.u] for F in fluxes])


@dataclass
class InverseDeformation:
    field: EvoField
    jacobian_det: object
    source: tuple
    target: tuple

    def gauge(self, R):
        return gauge_field(self.source, R, self.field.ctx)

    def with_gauge(self, R):
        return self.field + self.gauge(R)


def _solve_for_field(fluxes, targets, ctx):
    J = flux_jacobian(fluxes, ctx)
    p, q = J.shape
    if p == 2 and q == 2:
        det = normalize(J.det())
        if is_zero(det):
            raise RankDeficient("flux Jacobian determinant vanishes")
        (A1u1, A1u2), (A2u1, A2u2) = J.tolist()
        P1, P2 = targets
        alpha = (normalize((A2u2 * P1 - A1u2 * P2) / det), normalize((A1u1 * P2 - A2u1 * P1) / det))
        return alpha, det
    rank = J.rank(iszerofunc=is_zero, simplify=normalize)
    if rank < p:
        raise RankDeficient(f"rank of the flux Jacobian is {rank}, below the number of fluxes {p}")
    sol, params = J.gauss_jordan_solve(sp.Matrix(targets))
    sol = sol.subs({s: 0 for s in params})
    det = normalize((J * J.T).det())
    return tuple(normalize(a) for a in sol), det


def inverse_deform(source, target, sys_or_ctx) -> InverseDeformation:
    """Sub-symmetry of the source law that deforms it to the target fluxes."""
    ctx = sys_or_ctx.ctx if isinstance(sys_or_ctx, DiffSystem) else sys_or_ctx
    source = tuple(normalize(sp.sympify(F)) for F in source)
    target = tuple(normalize(sp.sympify(P)) for P in target)
    if not _order0(source, ctx):
        raise NonFunctionFluxes("source fluxes depend on derivatives; use frechet_system")
    alpha, det = _solve_for_field(source, target, ctx)
    return InverseDeformation(EvoField(alpha, ctx), det, source, target)


def gauge_field(source, R, ctx) -> EvoField:
    """Field deforming the source law by the trivial fluxes (-D_2 R, D_1 R)."""
    if ctx.p != 2:
        raise ValueError("gauge fields are defined for two independent variables")
    R = sp.sympify(R)
    P = (-total_derivative(R, 1, ctx), total_derivative(R, 0, ctx))
    alpha, _ = _solve_for_field(tuple(sp.sympify(F) for F in source), P, ctx)
    return EvoField(alpha, ctx)


def frechet(A, a, gamma, ctx):
    """Frechet derivative of A with respect to u^a applied to gamma."""
    out = sp.S.Zero
    for s, (b, J) in ctx.jets_in(A).items():
        if b != a:
            continue
        d = sp.diff(A, s)
        if d != 0:
            out += d * total_derivative_multi(gamma, J, ctx, raw=True)
    return out


def frechet_system(source, target, ctx, unknowns=("alpha", "beta"), gauge="R") -> DeterminingSystem:
    """Deformation equations D_u(A^1)alpha + ... = P^1 - D_2 R, ... = P^2 + D_1 R.

    alpha, beta and R are formal functions of the independent variables. When
    the fluxes depend on (x, u) only and their Jacobian is rank deficient,
    the left-nullspace compatibility conditions are appended.
    """
    if ctx.p != 2:
        raise ValueError("the deformation system is written for two independent variables")
    source = [sp.sympify(A) for A in source]
    target = [sp.sympify(P) for P in target]
    fs = [opaque(n)(*ctx.x) for n in unknowns[:ctx.q]]
    R = opaque(gauge)(*ctx.x)
    rhs = [target[0] - total_derivative_raw(R, 1, ctx), target[1] + total_derivative_raw(R, 0, ctx)]
    eqs = []
    for A, r in zip(source, rhs):
        lhs = sum((frechet(A, a, fs[a], ctx) for a in range(ctx.q)), sp.S.Zero)
        eqs.append(normalize(lhs - r))
    if _order0(source, ctx):
        J = flux_jacobian(source, ctx)
        for y in J.T.nullspace(simplify=normalize):
            cond = normalize(sum((y[i] * rhs[i] for i in range(len(rhs))), sp.S.Zero))
            if cond != 0:
                eqs.append(cond)
    return DeterminingSystem(eqs, [])


# ---------------------------------------------------------------------------
# telegraph catalog

TELEGRAPH_CASES = (
    ("telegraph-tanu", [("L1p", "X1p"), ("L1m", "X1m"), ("L2p", "X2p"), ("L2m", "X2m")]),
    ("telegraph-Gu", [("L", "X")]),
    ("telegraph-exp", [("L", "X")]),
    ("telegraph-Ginv", [("L", "X")]),
)
TELEGRAPH_CORRECTED = ("telegraph-tanu", [("C1", "Cp"), ("C2", "Cm")])


@dataclass
class TelegraphCase:
    entry: str
    name: str
    F: object
    G: object
    fluxes: tuple
    field: EvoField
    law: ConsLaw | None
    residual: object = 0
    deforms: bool = False
    inverse_matches: bool = False

    @property
    def verified(self):
        return self.law is not None and self.deforms and self.inverse_matches


def _telegraph_FG(sys):
    ctx = sys.ctx
    d2 = sys.equations[1]
    ux = ctx.jet(0, (1,))
    F = normalize(-sp.diff(d2, ux))
    G = normalize(-(d2 - ctx.jet(1, (0,)) + F * ux))
    return F, G


def telegraph_catalog(include_corrected=False):
    """Listed telegraph laws with their generating fields, each run through the checks.

    Every case records whether the fluxes form a conservation law, whether the
    field deforms the law u_t - v_x = 0 into it, and whether inverse_deform
    returns the listed field.
    """
    from . import corpus

    groups = list(TELEGRAPH_CASES) + ([TELEGRAPH_CORRECTED] if include_corrected else [])
    out = []
    for entry_id, pairs in groups:
        entry = corpus.load(entry_id)
        sys = entry.system
        F, G = _telegraph_FG(sys)
        source = verify_cl(entry.laws["A"], sys)
        for law_name, field_name in pairs:
            fluxes = entry.laws[law_name]
            f = as_evo(entry.fields[field_name])
            case = TelegraphCase(entry_id, law_name, F, G, fluxes, f, None)
            try:
                case.law = verify_cl(fluxes, sys)
            except NotAConservationLaw as exc:
                case.residual = exc.residual
            deformed = apply_to_fluxes(f, source.fluxes)
            if case.law is not None:
                try:
                    case.deforms = same_law(verify_cl(deformed, sys), case.law)
                except NotAConservationLaw:
                    case.deforms = False
            inv = inverse_deform(source.fluxes, fluxes, sys).field
            case.inverse_matches = all(is_zero(a - b) for a, b in zip(inv.alpha, f.alpha))
            out.append(case)
    return out
