
import pytest
import sympy as sp
from hypothesis import given, settings

from oracles import FunctionSpace
from subsym import JetContext, TruncationOverflow, adjoint_apply, diff_partial, is_zero, total_derivative
from subsym.jet import EMPTY, MultiIndex, total_derivative_multi

from strategies import CTX, expressions

FS = FunctionSpace(CTX)


class TestMultiIndex:
    def test_sorted_and_order(self):
        J = MultiIndex((1, 0, 1))
        assert J == (0, 1, 1) and J.order == 3

    def test_add_and_contains(self):
        J = MultiIndex((0,)).add(1)
        assert J == (0, 1)
        assert J.contains(MultiIndex((1,))) and not J.contains(MultiIndex((1, 1)))

    def test_minus(self):
        assert MultiIndex((0, 1, 1)).minus(MultiIndex((1,))) == (0, 1)


class TestContext:
    def test_jet_symbols_are_shared(self):
        assert CTX.jet("u", ("x", "t")) is CTX.jet(0, (1, 0))
        assert CTX.jet_info(CTX.parse("v_tt")) == (1, MultiIndex((1, 1)))

    def test_non_jets(self):
        assert CTX.jet_info(sp.Symbol("x")) is None

    def test_names_must_be_distinct(self):
        with pytest.raises(ValueError):
            JetContext.create(["x"], ["x"])

    def test_pinned_order(self):
        c = JetContext.create(["x"], ["u"], max_order=2, pinned=True)
        with pytest.raises(TruncationOverflow):
            c.jet("u", (0, 0, 0))

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("SUBSYM_MAX_ORDER", "3")
        c = JetContext.create(["x"], ["u"])
        assert c.max_order == 3 and c.pinned
        monkeypatch.delenv("SUBSYM_MAX_ORDER")
        assert JetContext.create(["x"], ["u"]).max_order == 6

    def test_order_of(self):
        assert CTX.order_of(CTX.parse("u*v_xt + u_x")) == 2


class TestTotalDerivative:
    def test_cos_u(self):
        c = JetContext.create(["t", "x"], ["u", "v"])
        assert is_zero(total_derivative(c.parse("cos(u)"), "x", c) + c.parse("sin(u)*u_x"))

    def test_multi_empty_is_identity(self):
        e = CTX.parse("u*v_x")
        assert total_derivative_multi(e, EMPTY, CTX) == e

    def test_opaque_chain_rule(self):
        c = JetContext.create(["x", "t"], ["u"], opaque={"F": 2})
        got = total_derivative(c.parse("F(u^2, x)"), "x", c)
        assert is_zero(got - c.parse("2*u*u_x*F_{1}(u^2, x) + F_{2}(u^2, x)"))


@settings(max_examples=100)
@given(expressions())
def test_total_derivatives_commute(e):
    assert is_zero(total_derivative(total_derivative(e, 0, CTX), 1, CTX)
                   - total_derivative(total_derivative(e, 1, CTX), 0, CTX))


@settings(max_examples=60)
@given(expressions())
def test_total_derivative_matches_function_oracle(e):
    for j in (0, 1):
        assert is_zero(total_derivative(e, j, CTX) - FS.total_derivative(e, j))


@settings(max_examples=60)
@given(expressions(max_leaves=5), expressions(max_leaves=5))
def test_leibniz(a, b):
    lhs = total_derivative(a * b, 0, CTX)
    rhs = total_derivative(a, 0, CTX) * b + a * total_derivative(b, 0, CTX)
    assert is_zero(lhs - rhs)


def test_commutes_with_partial_in_parameters():
    c = JetContext.create(["x", "t"], ["u"], params=["k"])
    e = c.parse("k^2*u*u_x + sin(k*u)")
    k = c.parse("k")
    assert is_zero(total_derivative(diff_partial(e, k), 0, c) - diff_partial(total_derivative(e, 0, c), k))


def test_adjoint_order_zero_is_identity():
    c = JetContext.create(["x"], ["u"])
    assert adjoint_apply({(0, EMPTY): c.parse("u^2")}, c, 1)[0] == c.parse("u^2")


def test_adjoint_integration_by_parts():
    # (-D_x)(u) + (-D_x)^2 (u^2) per equation
    c = JetContext.create(["x"], ["u"])
    got = adjoint_apply({(0, MultiIndex((0,))): c.parse("u"), (0, MultiIndex((0, 0))): c.parse("u^2")}, c, 1)
    assert is_zero(got[0] - c.parse("-u_x + 2*u_x^2 + 2*u*u_xx"))
