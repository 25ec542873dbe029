"""Differential systems, sub-systems, on-shell restriction and point transformations."""
from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .expr import SubsymError, UnsupportedForm, denominators, is_zero, normalize, to_text
from .jet import EMPTY, JetContext, MultiIndex, TruncationOverflow, total_derivative_multi, total_derivative_raw


class SystemError_(SubsymError):
    pass


class ReductionError(SubsymError):
    pass


class SingularJacobian(SubsymError):
    pass


def _lead_key(ctx, a, J):
    # ties: variable order, then lexicographic direction names
    return (-J.order, a, tuple(ctx.indep[j] for j in J))


def choose_leading(eq, i, ctx: JetContext):
    """Default leading derivative of equation ``i``.

    Highest-order jet of the index-matched dependent variable (any variable
    if that one is absent); ties broken by variable order then direction
    names. Only jets entering linearly with nonzero coefficient qualify.
    """
    jets = ctx.jets_in(eq)
    pools = []
    if i < ctx.q:
        pools.append({s: v for s, v in jets.items() if v[0] == i})
    pools.append(jets)
    for pool in pools:
        cands = sorted(pool.items(), key=lambda kv: _lead_key(ctx, *kv[1]))
        for s, (a, J) in cands:
            c = sp.diff(eq, s)
            if c != 0 and not c.has(s) and not is_zero(c):
                return (a, J)
    raise SystemError_(f"no jet can be solved for in {to_text(eq)}")


@dataclass(frozen=True, eq=False)
class DiffSystem:
    """Equations with designated leading derivatives and solved forms."""

    ctx: JetContext
    equations: tuple
    leading: tuple = None
    names: tuple = None
    maximal_rank: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        eqs = tuple(sp.sympify(e) for e in self.equations)
        object.__setattr__(self, "equations", eqs)
        if self.names is None:
            object.__setattr__(self, "names", tuple(f"D{i + 1}" for i in range(len(eqs))))
        leads = list(self.leading) if self.leading is not None else [None] * len(eqs)
        resolved = []
        for i, (eq, lead) in enumerate(zip(eqs, leads)):
            if lead is None:
                lead = choose_leading(eq, i, self.ctx)
            elif isinstance(lead, sp.Symbol):
                info = self.ctx.jet_info(lead)
                if info is None:
                    raise SystemError_(f"{lead} is not a jet coordinate")
                lead = info
            else:
                lead = (self.ctx.dep_index(lead[0]), MultiIndex(self.ctx.direction(j) for j in lead[1]))
            resolved.append(lead)
        if len(set(resolved)) != len(resolved):
            raise SystemError_("leading derivatives must be pairwise distinct")
        object.__setattr__(self, "leading", tuple(resolved))
        coeffs, rhs = [], []
        for eq, (a, J) in zip(eqs, resolved):
            s = self.ctx.jet(a, J)
            c = sp.diff(eq, s)
            if c.has(s) or is_zero(c):
                raise SystemError_(f"equation {to_text(eq)} is not linear in {s}")
            coeffs.append(normalize(c))
            rhs.append(normalize(s - eq / c))
        object.__setattr__(self, "lead_coeffs", tuple(coeffs))
        object.__setattr__(self, "rhs", tuple(rhs))
        order = max([self.ctx.order_of(e) for e in eqs] + [0])
        if not self.ctx.pinned and self.ctx.max_order < order + 4:
            object.__setattr__(self, "ctx", self.ctx.with_order(order + 4))

    @classmethod
    def from_text(cls, ctx, equations, leading=None, names=None):
        eqs = [ctx.parse(e) if isinstance(e, str) else e for e in equations]
        leads = None
        if leading is not None:
            leads = [ctx.parse(l) if isinstance(l, str) else l for l in leading]
        return cls(ctx, tuple(eqs), None if leads is None else tuple(leads), names)

    def __len__(self):
        return len(self.equations)

    def lead_symbol(self, i):
        a, J = self.leading[i]
        return self.ctx.jet(a, J)

    @property
    def order(self):
        return max(self.ctx.order_of(e) for e in self.equations)

    # -- restriction ---------------------------------------------------------
    def rule_for(self, a, K):
        for i, (b, J) in enumerate(self.leading):
            if b == a and K.contains(J):
                return i
        return None

    def is_leading(self, sym):
        info = self.ctx.jet_info(sym)
        return info is not None and self.rule_for(*info) is not None

    def reduced_jet(self, a, K, _stack=None):
        key = ("red", a, K)
        if key in self._cache:
            return self._cache[key]
        i = self.rule_for(a, K)
        if i is None:
            return self.ctx.jet(a, K)
        if self.ctx.pinned and K.order > self.ctx.max_order:
            raise TruncationOverflow(f"prolongation order {K.order} exceeds {self.ctx.max_order}")
        stack = _stack if _stack is not None else set()
        if key in stack:
            raise ReductionError(f"substitution does not terminate at {self.ctx.jet_name(a, K)}")
        stack.add(key)
        b, J = self.leading[i]
        if K == J:
            val = self._restrict(self.rhs[i], stack)
        else:
            j = K.minus(J)[-1]
            lower = self.reduced_jet(a, K.minus((j,)), stack)
            val = self._restrict(total_derivative_raw(lower, j, self.ctx), stack)
        stack.discard(key)
        self._cache[key] = val
        return val

    def _restrict(self, e, stack):
        e = sp.sympify(e)
        mapping = {}
        for s, (a, K) in self.ctx.jets_in(e).items():
            if self.rule_for(a, K) is not None:
                mapping[s] = self.reduced_jet(a, K, stack)
        if mapping:
            e = e.xreplace(mapping)
        return normalize(e)

    def restrict(self, e):
        """Substitute leading derivatives and all their prolongations."""
        return self._restrict(e, set())

    def prolonged_equation(self, i, I):
        key = ("pro", i, I)
        if key not in self._cache:
            self._cache[key] = total_derivative_multi(self.equations[i], I, self.ctx, raw=True)
        return self._cache[key]

    def __repr__(self):
        return "DiffSystem(" + "; ".join(to_text(e) for e in self.equations) + ")"


def restrict(e, sys: DiffSystem):
    return sys.restrict(e)


@dataclass
class Decomposition:
    gamma: dict  # (equation index, MultiIndex) -> Expr
    residual: object

    def reassemble(self, sys):
        total = self.residual
        for (i, I), g in self.gamma.items():
            total += g * sys.prolonged_equation(i, I)
        return total


def decompose_on_ideal(e, sys: DiffSystem, max_steps=500) -> Decomposition:
    """Write e = sum Gamma^{iI} D_I Delta_i + r with r free of leading jets."""
    ctx = sys.ctx
    gamma = {}
    r = normalize(e)
    for _ in range(max_steps):
        leads = []
        for s, (a, K) in ctx.jets_in(r).items():
            i = sys.rule_for(a, K)
            if i is not None:
                leads.append((K.order, a, K, s, i))
        if not leads:
            break
        leads.sort(key=lambda t: (-t[0], t[1], tuple(t[2])))
        _, a, K, s, i = leads[0]
        I = K.minus(sys.leading[i][1])
        DI = sp.expand(sys.prolonged_equation(i, I))
        c = sp.diff(DI, s)
        if c.has(s):
            raise UnsupportedForm(f"prolonged equation is nonlinear in {s}")
        rho = normalize(-(DI - c * s) / c)
        num, den = sp.fraction(sp.together(r))
        if den.has(s):
            raise UnsupportedForm(f"denominator depends on leading jet {s}")
        try:
            poly = sp.Poly(sp.expand(num), s)
        except sp.PolynomialError:
            raise UnsupportedForm(f"expression is not polynomial in leading jet {s}")
        coeffs = poly.all_coeffs()[::-1]  # coeffs[k] multiplies s^k
        quotient = sp.S.Zero
        for k, rk in enumerate(coeffs):
            if k == 0 or rk == 0:
                continue
            quotient += rk * sum((s ** m * rho ** (k - 1 - m) for m in range(k)), sp.S.Zero)
        key = (i, I)
        gamma[key] = gamma.get(key, 0) + quotient / (c * den)
        r = normalize(sum((rk * rho ** k for k, rk in enumerate(coeffs)), sp.S.Zero) / den)
    else:
        raise ReductionError("decomposition did not terminate")
    gamma = {k: normalize(v) for k, v in gamma.items()}
    gamma = {k: v for k, v in sorted(gamma.items(), key=lambda kv: (kv[0][0], kv[0][1])) if v != 0}
    return Decomposition(gamma, r)


@dataclass(frozen=True, eq=False)
class SubSystem:
    """Operator-valued multipliers: one map {(b, MultiIndex): coeff} per sub-equation."""

    parent: DiffSystem
    multipliers: tuple
    maximal_rank: bool = True

    def __post_init__(self):
        norm = []
        for m in self.multipliers:
            d = {}
            for (b, J), c in m.items():
                c = sp.sympify(c)
                if c != 0:
                    d[(b, MultiIndex(J))] = c
            norm.append(d)
        if not any(norm):
            raise SystemError_("sub-system multipliers are all zero")
        object.__setattr__(self, "multipliers", tuple(norm))
        object.__setattr__(self, "_cache", {})

    @classmethod
    def combination(cls, parent, betas):
        """Scalar multipliers beta^i for a single sub-equation."""
        return cls(parent, ({(b, EMPTY): c for b, c in enumerate(betas)},))

    @property
    def ctx(self):
        return self.parent.ctx

    def evaluate(self, raw=False):
        if "eval" not in self._cache:
            out = []
            for m in self.multipliers:
                total = sp.S.Zero
                for (b, J), c in m.items():
                    total += c * self.parent.prolonged_equation(b, J)
                out.append(total)
            self._cache["eval"] = out
        vals = self._cache["eval"]
        return list(vals) if raw else [normalize(v) for v in vals]

    def as_system(self, leading=None):
        key = ("sys", leading)
        if key not in self._cache:
            self._cache[key] = DiffSystem(self.ctx, tuple(self.evaluate()), leading)
        return self._cache[key]

    def order(self):
        return max((J.order for m in self.multipliers for (_, J) in m), default=0)

    def __repr__(self):
        parts = []
        for m in self.multipliers:
            terms = []
            for (b, J), c in m.items():
                op = "".join(f"D{self.ctx.indep[j]}*" for j in J)
                terms.append(f"({to_text(c)})*{op}{self.parent.names[b]}")
            parts.append(" + ".join(terms))
        return "SubSystem(" + "; ".join(parts) + ")"


def eval_subsystem(ss: SubSystem):
    return ss.evaluate()


@dataclass(frozen=True, eq=False)
class PointMap:
    """Invertible point map (x, u) -> (xbar, ubar) with explicit inverse.

    ``forward`` lists Xbar^i then Ubar^a as expressions in ``src`` symbols;
    ``inverse`` lists X^i then U^a as expressions in ``dst`` symbols.
    """

    src: JetContext
    dst: JetContext
    forward: tuple
    inverse: tuple

    def __post_init__(self):
        n = self.src.p + self.src.q
        if len(self.forward) != n or len(self.inverse) != n:
            raise ValueError(f"point map needs {n} forward and {n} inverse components")
        object.__setattr__(self, "forward", tuple(sp.sympify(c) for c in self.forward))
        object.__setattr__(self, "inverse", tuple(sp.sympify(c) for c in self.inverse))

    def inverted(self):
        return PointMap(self.dst, self.src, self.inverse, self.forward)

    def roundtrip_residuals(self):
        """Forward composed with inverse minus identity, per component."""
        sub = dict(zip(self.dst.x + self.dst.u, self.forward))
        out = []
        for c, v in zip(self.inverse, self.src.x + self.src.u):
            out.append(normalize(c.subs(sub, simultaneous=True) - v))
        return out

    def jacobian_det(self):
        vars_ = self.src.x + self.src.u
        m = sp.Matrix([[sp.diff(f, v) for v in vars_] for f in self.forward])
        return normalize(m.det())


def _subst(e, mapping):
    e = sp.sympify(e)
    from .expr import Int
    if e.has(Int):
        return e.subs(mapping, simultaneous=True)
    return e.xreplace(mapping)


@dataclass
class Transformed:
    equations: list
    side_conditions: list


def transform_expressions(exprs, T: PointMap) -> Transformed:
    """Rewrite differential expressions in barred variables via the chain rule."""
    src, dst = T.src, T.dst
    p = src.p
    Xs = T.inverse[:p]
    Us = T.inverse[p:]
    M = sp.Matrix(p, p, lambda i, j: normalize(total_derivative_raw(Xs[i], j, dst)))
    det = normalize(M.det())
    if is_zero(det):
        raise SingularJacobian("independent-variable Jacobian of the inverse map vanishes")
    Minv = M.inv(method="ADJ").applyfunc(normalize)
    cache = {}

    def value(a, K):
        key = (a, K)
        if key in cache:
            return cache[key]
        if not K:
            val = Us[a]
        else:
            i = K[-1]
            lower = value(a, K.minus((i,)))
            val = normalize(sum((Minv[j, i] * total_derivative_raw(lower, j, dst) for j in range(p)),
                                sp.S.Zero))
        cache[key] = val
        return val

    out = []
    for e in exprs:
        e = sp.sympify(e)
        mapping = {x: X for x, X in zip(src.x, Xs)}
        for s, (a, K) in src.jets_in(e).items():
            mapping[s] = value(a, K)
        out.append(normalize(_subst(e, mapping)))
    conds = [] if det.is_Number else [det]
    for e in out:
        conds.extend(d for d in denominators(e) if d not in conds)
    return Transformed(out, conds)


def transform_system(sys, T: PointMap, leading=None) -> DiffSystem:
    """Equations of ``sys`` (a DiffSystem or list of expressions) in barred variables."""
    exprs = sys.equations if isinstance(sys, DiffSystem) else list(sys)
    res = transform_expressions(exprs, T)
    out = DiffSystem(T.dst, tuple(res.equations), leading)
    object.__setattr__(out, "side_conditions", res.side_conditions)
    return out


def make_monic(sys: DiffSystem) -> DiffSystem:
    """Divide each equation by the coefficient of its leading derivative."""
    eqs = [normalize(e / c) for e, c in zip(sys.equations, sys.lead_coeffs)]
    return DiffSystem(sys.ctx, tuple(eqs), tuple(sys.leading), sys.names)
