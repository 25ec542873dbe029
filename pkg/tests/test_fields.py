import pytest
import sympy as sp
from hypothesis import given, settings

from oracles import FunctionSpace
from subsym import EvoField, JetContext, PointField, apply, canonicalize, commutator, flow_truncated, is_zero
from subsym import total_derivative
from subsym.fields import FlowError, evaluate_on, truncate

from strategies import CTX, evo_fields, expressions

FS = FunctionSpace(CTX)


def evo(alpha):
    return EvoField(tuple(alpha), CTX)


@settings(max_examples=100)
@given(evo_fields(), expressions(max_leaves=6))
def test_commutation_identity(alpha, e):
    f = evo(alpha)
    for j in (0, 1):
        assert is_zero(apply(f, total_derivative(e, j, CTX)) - total_derivative(apply(f, e), j, CTX))


@settings(max_examples=40)
@given(evo_fields(), expressions(max_leaves=5))
def test_apply_matches_variation_oracle(alpha, e):
    assert is_zero(apply(evo(alpha), e) - FS.evolution(alpha, e))


@settings(max_examples=60)
@given(evo_fields(), expressions(max_leaves=4), expressions(max_leaves=4))
def test_apply_is_a_derivation(alpha, a, b):
    f = evo(alpha)
    assert is_zero(apply(f, a * b) - apply(f, a) * b - a * apply(f, b))


def test_canonical_point_action_on_functions_of_x_u():
    c = JetContext.create(["x", "t"], ["u", "v"])
    pf = PointField((c.parse("x*u"), c.parse("t")), (c.parse("v^2"), c.parse("sin(x)")), c)
    g = c.parse("u^2*v + x*t")
    horizontal = sum(xi * total_derivative(g, i, c) for i, xi in enumerate(pf.xi))
    assert is_zero(apply(canonicalize(pf), g) - (pf.act(g) - horizontal))


class TestCanonicalize:
    def test_translation(self):
        c = JetContext.create(["t", "x"], ["u", "v"])
        f = canonicalize(PointField((1, 0), (0, 0), c))
        assert f.alpha == (-c.parse("u_t"), -c.parse("v_t"))

    def test_vertical(self):
        c = JetContext.create(["t", "x"], ["u", "v"])
        assert canonicalize(PointField((0, 0), (0, 1), c)).alpha == (0, 1)

    def test_derivative_coefficients_rejected(self):
        with pytest.raises(ValueError):
            PointField((CTX.parse("u_x"), 0), (0, 0), CTX)


def test_apply_on_trivial_system_field():
    c = JetContext.create(["x", "y", "z"], ["u"])
    f = EvoField((c.parse("y + x*u_y"),), c)
    assert is_zero(apply(f, c.parse("u_x")) - c.parse("u_y + x*u_xy"))


def test_apply_zero_field():
    assert apply(EvoField.zero(CTX), CTX.parse("u*v_xt + sin(u)")) == 0


class TestCommutator:
    def test_scalar_bilinear_case(self):
        c = JetContext.create(["x"], ["u"])
        br = commutator(EvoField((c.parse("u"),), c), EvoField((1,), c))
        assert br.alpha == (-1,)

    def test_self_bracket(self):
        f = evo((CTX.parse("u*v_x"), CTX.parse("sin(u)")))
        assert all(a == 0 for a in commutator(f, f).alpha)

    @settings(max_examples=25)
    @given(evo_fields(), evo_fields())
    def test_antisymmetric(self, a, b):
        f, g = evo(a), evo(b)
        assert all(is_zero(p + q) for p, q in zip(commutator(f, g).alpha, commutator(g, f).alpha))


class TestFlow:
    def test_trivial_system_flow(self):
        c = JetContext.create(["x", "y", "z"], ["u"])
        f = EvoField((c.parse("y + x*u_y"),), c)
        u, eps = flow_truncated(f, [sp.Integer(0)], order=2)
        d1 = truncate(evaluate_on(c.parse("u_x"), c, u), eps, 2)
        d2 = truncate(evaluate_on(c.parse("u_y"), c, u), eps, 2)
        assert is_zero(d1 - eps**2 / 2) and is_zero(d2 - eps)

    def test_translation_flow_is_taylor_shift(self):
        c = JetContext.create(["x"], ["u"])
        f = EvoField((-c.parse("u_x"),), c)
        x = c.x[0]
        u, eps = flow_truncated(f, [x**3], order=3)
        assert is_zero(u[0] - sp.expand((x - eps) ** 3))

    def test_flow_needs_explicit_solution(self):
        c = JetContext.create(["x"], ["u"])
        with pytest.raises((FlowError, ValueError)):
            flow_truncated(EvoField((1,), c), [c.parse("u")], order=1)
