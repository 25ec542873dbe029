"""Evolutionary vector fields: prolonged action, commutators and truncated flows."""
from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from .expr import SubsymError, normalize, to_text
from .jet import JetContext, MultiIndex, total_derivative_raw


@dataclass(frozen=True, eq=False)
class EvoField:
    """Characteristics alpha^a, one per dependent variable."""

    alpha: tuple
    ctx: JetContext

    def __post_init__(self):
        if len(self.alpha) != self.ctx.q:
            raise ValueError(f"need {self.ctx.q} characteristics, got {len(self.alpha)}")
        object.__setattr__(self, "alpha", tuple(sp.sympify(a) for a in self.alpha))
        object.__setattr__(self, "_prolonged", {})

    @classmethod
    def zero(cls, ctx):
        return cls((0,) * ctx.q, ctx)

    def prolonged(self, a, J):
        """D_J alpha^a, computed on demand and memoized along the way."""
        J = MultiIndex(J)
        key = (a, J)
        cache = self._prolonged
        if key in cache:
            return cache[key]
        if not J:
            val = self.alpha[a]
        else:
            j = J[-1]
            val = normalize(total_derivative_raw(self.prolonged(a, J.minus((j,))), j, self.ctx))
        cache[key] = val
        return val

    def scaled(self, c):
        return EvoField(tuple(c * a for a in self.alpha), self.ctx)

    def __add__(self, other):
        return EvoField(tuple(a + b for a, b in zip(self.alpha, other.alpha)), self.ctx)

    def __sub__(self, other):
        return EvoField(tuple(a - b for a, b in zip(self.alpha, other.alpha)), self.ctx)

    def __neg__(self):
        return self.scaled(-1)

    def __repr__(self):
        parts = ", ".join(f"{d}: {to_text(a)}" for d, a in zip(self.ctx.deps, self.alpha))
        return f"EvoField({parts})"


@dataclass(frozen=True, eq=False)
class PointField:
    """Point-form generator xi^i d/dx_i + eta^a d/du^a with (x, u) coefficients."""

    xi: tuple
    eta: tuple
    ctx: JetContext

    def __post_init__(self):
        xi = tuple(sp.sympify(c) for c in self.xi)
        eta = tuple(sp.sympify(c) for c in self.eta)
        if len(xi) != self.ctx.p or len(eta) != self.ctx.q:
            raise ValueError("point field needs one xi per independent and one eta per dependent variable")
        for c in xi + eta:
            for _, J in self.ctx.jets_in(c).values():
                if J.order > 0:
                    raise ValueError(f"point field coefficient depends on derivatives: {to_text(c)}")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)

    def scaled(self, c):
        return PointField(tuple(c * a for a in self.xi), tuple(c * a for a in self.eta), self.ctx)

    def act(self, e):
        """Ordinary action on a function of (x, u)."""
        ctx = self.ctx
        out = sum((xi * sp.diff(e, x) for xi, x in zip(self.xi, ctx.x)), sp.S.Zero)
        out += sum((eta * sp.diff(e, u) for eta, u in zip(self.eta, ctx.u)), sp.S.Zero)
        return normalize(out)


def canonicalize(f: PointField) -> EvoField:
    """alpha^a = eta^a - xi^i u^a_i."""
    ctx = f.ctx
    alpha = []
    for a in range(ctx.q):
        val = f.eta[a] - sum((f.xi[i] * ctx.jet(a, (i,)) for i in range(ctx.p)), sp.S.Zero)
        alpha.append(normalize(val))
    return EvoField(tuple(alpha), ctx)


def as_evo(f) -> EvoField:
    return canonicalize(f) if isinstance(f, PointField) else f


def apply_raw(f, e):
    f = as_evo(f)
    e = sp.sympify(e)
    out = sp.S.Zero
    for s, (a, J) in f.ctx.jets_in(e).items():
        d = sp.diff(e, s)
        if d != 0:
            out += f.prolonged(a, J) * d
    return out


def apply(f, e):
    """Prolonged action sum_{a,J} (D_J alpha^a) de/du^a_J, normalized."""
    return normalize(apply_raw(f, e))


def commutator(f, g) -> EvoField:
    """[f, g] with characteristics f(beta^a) - g(alpha^a)."""
    f, g = as_evo(f), as_evo(g)
    return EvoField(tuple(normalize(apply_raw(f, b) - apply_raw(g, a))
                          for a, b in zip(f.alpha, g.alpha)), f.ctx)


class FlowError(SubsymError):
    pass


def _substitute_solution(e, ctx, u0):
    """Replace each jet u^a_J by the corresponding derivative of u0[a]."""
    mapping = {}
    for s, (a, J) in ctx.jets_in(e).items():
        val = u0[a]
        for j in J:
            val = sp.diff(val, ctx.x[j])
        mapping[s] = val
    return sp.sympify(e).subs(mapping, simultaneous=True)


def flow_truncated(f, u0, order=3, eps=None):
    """Taylor polynomial of exp(eps X) u evaluated on the explicit solution ``u0``.

    ``u0`` is a sequence of expressions in the independent variables, one per
    dependent variable. Returns (list of per-variable polynomials, eps).
    """
    f = as_evo(f)
    ctx = f.ctx
    eps = eps if eps is not None else sp.Symbol("epsilon")
    u0 = [sp.sympify(v) for v in u0]
    if len(u0) != ctx.q:
        raise FlowError("need one solution component per dependent variable")
    for v in u0:
        if ctx.jets_in(v):
            raise FlowError(f"solution must be explicit in the independent variables: {to_text(v)}")
    if ctx.pinned and order > ctx.max_order:
        raise FlowError(f"flow order {order} exceeds maximum order {ctx.max_order}")
    result = []
    for a in range(ctx.q):
        term = ctx.u[a]
        total = sp.S.Zero
        for k in range(order + 1):
            total += eps ** k / sp.factorial(k) * normalize(_substitute_solution(term, ctx, u0))
            if k < order:
                term = apply(f, term)
        result.append(sp.expand(total))
    return result, eps


def evaluate_on(e, ctx, values):
    """Evaluate a differential expression on explicit functions of x."""
    return normalize(_substitute_solution(e, ctx, [sp.sympify(v) for v in values]))


def truncate(e, eps, order):
    """Drop powers of ``eps`` above ``order``."""
    e = sp.expand(e)
    return sp.Add(*[t for t in sp.Add.make_args(e) if sp.degree(t, eps) <= order])
