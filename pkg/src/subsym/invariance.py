"""Symmetry, sub-symmetry and sub-system symmetry checks; determining equations."""
from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp
from sympy.core.function import AppliedUndef

from .expr import (SubsymError, UnsupportedForm, denominators, is_zero, normalize, numerator, opaque,
                   opaque_info, substitute_function, to_text)
from .fields import PointField, apply, apply_raw, as_evo, canonicalize
from .systems import DiffSystem, SubSystem, decompose_on_ideal

SYMMETRY = "Symmetry"
SUBSYSTEM_SYMMETRY = "SubsystemSymmetry"
OTHER_SUBSYMMETRY = "OtherSubsymmetry"
NOT_SUBSYMMETRY = "NotSubsymmetry"


@dataclass
class InvarianceReport:
    holds: bool
    residuals: list
    gamma: list = None  # one {(i, MultiIndex): Expr} per checked expression, or None
    classification: str = None
    side_conditions: list = field(default_factory=list)
    note: str = ""

    @property
    def verdict(self):
        return "holds" if self.holds else "fails"

    def as_dict(self, names=None):
        def gtab(g):
            return [{"equation": (names[i] if names else i + 1), "operator": list(I), "coefficient": to_text(c)}
                    for (i, I), c in g.items()]
        return {
            "verdict": self.verdict,
            "residuals": [to_text(r) for r in self.residuals],
            "gamma": None if self.gamma is None else [gtab(g) if g is not None else None for g in self.gamma],
            "classification": self.classification,
            "side_conditions": [f"{to_text(s)} != 0" for s in self.side_conditions],
            "note": self.note,
        }


def _collect_conditions(exprs):
    out = []
    for e in exprs:
        for d in denominators(e):
            if d not in out:
                out.append(d)
    return out


def _check(f, exprs, restrict_sys: DiffSystem, want_gamma=True):
    f = as_evo(f)
    residuals, gammas, note = [], [], ""
    for e in exprs:
        xe = apply(f, e)
        r = restrict_sys.restrict(xe)
        residuals.append(r)
        if want_gamma:
            try:
                gammas.append(decompose_on_ideal(xe, restrict_sys).gamma)
            except UnsupportedForm as exc:
                gammas.append(None)
                note = str(exc)
    holds = all(is_zero(r) for r in residuals)
    return InvarianceReport(holds, residuals, gammas if want_gamma else None,
                            side_conditions=_collect_conditions(residuals), note=note)


def check_symmetry(f, sys: DiffSystem, want_gamma=True) -> InvarianceReport:
    """X Delta_i vanishes on solutions for every equation."""
    rep = _check(f, sys.equations, sys, want_gamma)
    rep.classification = SYMMETRY if rep.holds else None
    return rep


def check_subsymmetry(f, ss: SubSystem, want_gamma=True) -> InvarianceReport:
    """X(Xi Delta) vanishes on solutions of the full system."""
    return _check(f, ss.evaluate(), ss.parent, want_gamma)


def check_subsystem_symmetry(f, ss: SubSystem, want_gamma=True) -> InvarianceReport:
    """X(Xi Delta) vanishes on solutions of the sub-system alone."""
    return _check(f, ss.evaluate(), ss.as_system(), want_gamma)


def classify(f, ss: SubSystem) -> str:
    if check_symmetry(f, ss.parent, want_gamma=False).holds:
        return SYMMETRY
    if check_subsystem_symmetry(f, ss, want_gamma=False).holds:
        return SUBSYSTEM_SYMMETRY
    if check_subsymmetry(f, ss, want_gamma=False).holds:
        return OTHER_SUBSYMMETRY
    return NOT_SUBSYMMETRY


def case_flags(f, sys: DiffSystem, first=0):
    """(R, b, r) for a two-equation system with sub-system Delta_first.

    b is the coefficient of the other equation in the decomposition of
    X Delta_first, R is X Delta_other restricted to solutions, and r is the
    residual of X Delta_first (nonzero means no sub-symmetry at all).
    """
    if len(sys) != 2:
        raise ValueError("case flags are defined for two-equation systems")
    other = 1 - first
    f = as_evo(f)
    dec = decompose_on_ideal(apply(f, sys.equations[first]), sys)
    b = sum((c for (i, I), c in dec.gamma.items() if i == other), sp.S.Zero)
    R = sys.restrict(apply(f, sys.equations[other]))
    return normalize(R), normalize(b), dec.residual


def case_from_flags(R, b, r=0):
    if not is_zero(r):
        return NOT_SUBSYMMETRY
    if is_zero(R):
        return SYMMETRY
    if is_zero(b):
        return SUBSYSTEM_SYMMETRY
    return OTHER_SUBSYMMETRY


# ---------------------------------------------------------------------------
# determining equations


@dataclass
class DeterminingSystem:
    equations: list
    split: list
    lam: object = None
    stage1: "DeterminingSystem" = None

    def __len__(self):
        return len(self.equations)

    @property
    def empty(self):
        return len(self.equations) == 0

    def substitute(self, solution):
        """Plug in unknowns: ``solution`` maps a function name or symbol to a value.

        Function values are given as (args, expr) pairs or sympy Lambdas.
        """
        funcs, plain = {}, {}
        for k, v in solution.items():
            if isinstance(v, tuple):
                args, body = v
                v = sp.Lambda(tuple(args), body)
            if isinstance(k, str):
                k = opaque(k)
            info = opaque_info(k) if not isinstance(k, AppliedUndef) else None
            if info is not None:
                funcs[info[0]] = v
            else:
                plain[k] = v
        out = []
        for e in self.equations:
            for name, lam in funcs.items():
                e = substitute_function(e, name, lam)
            out.append(normalize(e.subs(plain).doit()))
        return out

    def is_satisfied_by(self, solution):
        return all(is_zero(e) for e in self.substitute(solution))

    def __repr__(self):
        return "DeterminingSystem([" + ", ".join(to_text(e) for e in self.equations) + "])"


def _lam_atoms(e, names):
    mapping = {}
    for a in e.atoms(AppliedUndef):
        info = opaque_info(a)
        if info and info[0] in names:
            base, slots = info
            label = base + ("_" + "".join(str(a.args[k - 1]) for k in slots) if slots else "")
            mapping[a] = sp.Symbol(f"[{label}]")
    return mapping


def _protected_symbols(e):
    """Symbols that appear inside function applications or non-integer powers."""
    out = set()
    for a in e.atoms(sp.Function, sp.Derivative, sp.Subs):
        out |= a.free_symbols
    for p in e.atoms(sp.Pow):
        if not p.exp.is_Integer:
            out |= p.base.free_symbols
    return out


def split_coefficients(e, coords):
    """Coefficients of ``e`` as a polynomial in ``coords`` (dropping zeros)."""
    if not coords:
        return [e] if e != 0 else []
    try:
        poly = sp.Poly(e, *coords)
    except sp.PolynomialError as exc:
        raise UnsupportedForm(f"not polynomial in split coordinates: {exc}")
    return [c for c in poly.coeffs() if c != 0]


def determining_equations(template, ss: SubSystem, mode="subsymmetry", lam_args=None,
                          lam_name="lam", use_lambda=True, leading=None) -> DeterminingSystem:
    """Coefficient equations of the (sub-)symmetry condition.

    ``template`` is a point or evolutionary field whose coefficients may
    contain unknown functions. With ``use_lambda`` the field is multiplied by
    an arbitrary function lam(lam_args) (default: all of x and u), and
    coefficients of lam and each of its derivatives are split apart.
    """
    ctx = ss.ctx
    lam = None
    if use_lambda:
        args = lam_args if lam_args is not None else ctx.x + ctx.u
        lam = opaque(lam_name)(*args)
        if isinstance(template, PointField):
            f = canonicalize(template.scaled(lam))
        else:
            f = as_evo(template).scaled(lam)
    else:
        f = as_evo(template)
    restrict_sys = ss.parent if mode == "subsymmetry" else ss.as_system(leading)
    eqs = []
    split_all = []
    for e in ss.evaluate():
        r = restrict_sys.restrict(apply_raw(f, e))
        num = numerator(r)
        mapping = _lam_atoms(num, {lam_name}) if use_lambda else {}
        num = num.xreplace(mapping)
        protected = _protected_symbols(num)
        coords = [s for s in num.free_symbols
                  if ctx.jet_info(s) is not None and s not in protected]
        coords = sorted(coords, key=str) + sorted(mapping.values(), key=str)
        coords = [c for c in coords if c in num.free_symbols]
        for c in split_coefficients(num, coords):
            c = normalize(c)
            if c != 0 and not any(is_zero(c - o) or is_zero(c + o) for o in eqs):
                eqs.append(c)
        for c in coords:
            if c not in split_all:
                split_all.append(c)
    return DeterminingSystem(eqs, split_all, lam)


def determining_equations_two_stage(template, ss, mode="subsymmetry", lam_name="lam"):
    """Stage 1 with lam(x), stage 2 with lam(x, u); returns the stage-2 system."""
    ctx = ss.ctx
    first = determining_equations(template, ss, mode, lam_args=ctx.x, lam_name=lam_name)
    second = determining_equations(template, ss, mode, lam_args=ctx.x + ctx.u, lam_name=lam_name)
    second.stage1 = first
    return second


def beta_cases(unknown_beta):
    """The two normalizations for two-equation sub-systems: (1, 0) and (beta1, 1)."""
    return [("beta2=0", (sp.S.One, sp.S.Zero)), ("beta2=1", (sp.sympify(unknown_beta), sp.S.One))]


# ---------------------------------------------------------------------------
# linear solving


class NonlinearUnknown(SubsymError):
    pass


@dataclass
class LinearSolution:
    consistent: bool
    assignments: dict = field(default_factory=dict)
    free: list = field(default_factory=list)
    certificate: list = field(default_factory=list)
    equations: list = field(default_factory=list)
    pivots: list = field(default_factory=list)

    def basis(self):
        """Particular solution plus one assignment per free parameter."""
        return [{k: normalize(v.subs({p: (1 if p == q else 0) for p in self.free}))
                 for k, v in self.assignments.items()} for q in self.free]


def _unknown_atoms(e, fnames):
    """Applications of unknown functions and of their slot derivatives."""
    out = set()
    for a in e.atoms(AppliedUndef):
        info = opaque_info(a)
        if info and info[0] in fnames:
            out.add(a)
    return out


def _linear_parts(e, atoms):
    e = sp.expand(e)
    coeffs = {}
    rest = e
    for a in atoms:
        c = sp.diff(e, a)
        if any(sp.diff(c, b) != 0 for b in atoms):
            raise NonlinearUnknown(f"nonlinear occurrence of {to_text(a)}")
        coeffs[a] = c
    rest = sp.expand(e - sum((c * a for a, c in coeffs.items()), sp.S.Zero))
    return coeffs, rest


def _split_by_variables(e, allowed):
    """Group terms by their factor that depends on symbols outside ``allowed``."""
    e = sp.expand(e)
    groups = {}
    for term in sp.Add.make_args(e):
        inner, outer = [], []
        for fac in sp.Mul.make_args(term):
            (inner if fac.free_symbols <= allowed else outer).append(fac)
        key = sp.Mul(*outer)
        groups[key] = groups.get(key, 0) + sp.Mul(*inner)
    return [g for g in groups.values() if g != 0]


def solve_linear_params(ds, constants=(), functions=None, params=()) -> LinearSolution:
    """Solve equations linear in unknown constants and functions.

    ``constants`` are unknown constant symbols. ``functions`` maps an unknown
    function name to its argument symbols, or to None for an unknown that may
    depend on everything (such unknowns are eliminated first). ``params`` are
    symbols treated as constants of the coefficient field. Derivatives of
    unknown functions are treated as independent unknowns, so a reported
    inconsistency is a genuine obstruction.
    """
    eqs = [numerator(e) for e in (ds.equations if isinstance(ds, DeterminingSystem) else ds)]
    eqs = [e for e in eqs if e != 0]
    functions = dict(functions or {})
    constants = [sp.sympify(c) for c in constants]
    params = set(sp.sympify(p) for p in params)

    # eliminate unknowns that may depend on everything
    full = {n for n, a in functions.items() if a is None}
    if full:
        atoms = sorted(set().union(*[_unknown_atoms(e, full) for e in eqs]), key=sp.default_sort_key)
        if atoms:
            A = sp.Matrix([[_linear_parts(e, atoms)[0][a] for a in atoms] for e in eqs])
            null = A.T.nullspace()
            eqs = [numerator(sum((y[k] * eqs[k] for k in range(len(eqs))), sp.S.Zero)) for y in null]
            eqs = [e for e in eqs if e != 0]
        functions = {n: a for n, a in functions.items() if a is not None}

    allowed = set(params) | set(constants)
    for args in functions.values():
        allowed |= {sp.sympify(a) for a in args}
    split = []
    for e in eqs:
        for g in _split_by_variables(e, allowed):
            g = normalize(g)
            if g != 0 and g not in split:
                split.append(g)

    atoms = list(constants)
    fatoms = set()
    for e in split:
        fatoms |= _unknown_atoms(e, set(functions))
    atoms += sorted(fatoms, key=sp.default_sort_key)
    rows, rhs = [], []
    for e in split:
        coeffs, rest = _linear_parts(e, atoms)
        rows.append([coeffs[a] for a in atoms])
        rhs.append(-rest)
    if not rows:
        return LinearSolution(True, {a: a for a in atoms}, list(atoms), equations=split)
    A = sp.Matrix(rows) if atoms else sp.zeros(len(rows), 0)
    b = sp.Matrix(rhs)
    aug = A.row_join(b)
    rref, pivcols = aug.rref(simplify=lambda x: normalize(x), iszerofunc=lambda x: is_zero(x))
    n = len(atoms)
    if n in pivcols:
        # a row 0 = nonzero: find the certificate as a left-null combination
        null = A.T.nullspace(simplify=lambda x: normalize(x)) if atoms else \
            [sp.Matrix([1 if k == j else 0 for k in range(len(rows))]) for j in range(len(rows))]
        cert = []
        for y in null:
            val = normalize((y.T * b)[0])
            if not is_zero(val):
                combo = normalize(sum((y[k] * split[k] for k in range(len(split))), sp.S.Zero))
                cert = [combo]
                break
        if not cert:
            k = list(pivcols).index(n)
            cert = [normalize(rref[k, n])]
        return LinearSolution(False, certificate=cert, equations=split)
    free = [atoms[j] for j in range(n) if j not in pivcols]
    assignments = {}
    for k, j in enumerate(pivcols):
        val = rref[k, n] - sum((rref[k, m] * atoms[m] for m in range(n) if m not in pivcols), sp.S.Zero)
        assignments[atoms[j]] = normalize(val)
    for a in free:
        assignments[a] = a
    pivots = []
    for e in split:
        for d in denominators(e):
            if d not in pivots:
                pivots.append(d)
    return LinearSolution(True, assignments, free, equations=split, pivots=pivots)
