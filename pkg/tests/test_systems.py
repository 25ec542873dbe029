import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from subsym import (DiffSystem, JetContext, PointMap, SubSystem, decompose_on_ideal, is_zero, make_monic,
                    normalize, restrict, total_derivative, transform_system)
from subsym import corpus
from subsym.decoupling import polar_map, shear_map
from subsym.fields import apply, as_evo
from subsym.jet import MultiIndex
from subsym.systems import SingularJacobian, SystemError_

from strategies import polynomials

HEAT = corpus.load("heat")


class TestDiffSystem:
    def test_leading_and_rhs(self):
        s = HEAT.system
        assert s.lead_symbol(0) == HEAT.ctx.parse("u_t")
        assert is_zero(s.rhs[1] - HEAT.ctx.parse("u*v_xx"))

    def test_order_raised_for_prolongation(self):
        c = JetContext.create(["x", "t"], ["u"], max_order=2)
        s = DiffSystem.from_text(c, ["u_t - u_xx"])
        assert s.ctx.max_order >= 6

    def test_duplicate_leading_rejected(self):
        c = JetContext.create(["x", "t"], ["u", "v"])
        with pytest.raises(SystemError_):
            DiffSystem.from_text(c, ["u_t - v", "u_t + v_x"], leading=["u_t", "u_t"])

    def test_nonlinear_leading_rejected(self):
        c = JetContext.create(["x", "t"], ["u"])
        with pytest.raises(SystemError_):
            DiffSystem.from_text(c, ["u_t^2 - u"], leading=["u_t"])

    def test_restrict_prolonged_leading(self):
        c = HEAT.ctx
        # u_tx on solutions is u_xxx
        assert restrict(c.parse("u_xt"), HEAT.system) == c.parse("u_xxx")
        assert restrict(c.parse("v_tt"), HEAT.system) != 0


class TestDecomposition:
    def test_trivial_system_example(self):
        e = corpus.load("trivial-xy")
        c, s = e.ctx, e.system
        f = e.fields["W"]
        d1 = decompose_on_ideal(apply(f, s.equations[0]), s)
        assert d1.residual == 0
        assert d1.gamma == {(0, MultiIndex((1,))): c.parse("x"), (1, MultiIndex(())): 1}
        d2 = decompose_on_ideal(apply(f, s.equations[1]), s)
        assert is_zero(d2.residual - 1)
        assert d2.gamma == {(1, MultiIndex((1,))): c.parse("x")}

    def test_reassembles_on_corpus(self):
        for id_ in ("heat", "sine-gordon", "euler1d", "telegraph-Gu"):
            e = corpus.load(id_)
            for name, f in e.fields.items():
                for eq in e.system.equations:
                    expr = apply(as_evo(f), eq)
                    d = decompose_on_ideal(expr, e.system)
                    assert is_zero(d.reassemble(e.system) - expr), (id_, name)


@settings(max_examples=40)
@given(polynomials(HEAT.ctx, ["u", "v", "u_x", "v_x", "x"], 4),
       polynomials(HEAT.ctx, ["u", "v", "u_x", "x", "t"], 4),
       st.one_of(st.just(sp.S.Zero), polynomials(HEAT.ctx, ["u", "v_x", "u_xx", "x"], 3)))
def test_restrict_zero_iff_no_residual(a, b, r):
    s = HEAT.system
    e = a * s.equations[0] + b * total_derivative(s.equations[1], "x", s.ctx) + r
    d = decompose_on_ideal(e, s)
    assert (restrict(e, s) == 0) == (d.residual == 0)
    assert is_zero(d.reassemble(s) - e)


class TestPointMaps:
    def test_polar_round_trip(self):
        e = corpus.load("dyn-polar")
        T = polar_map(e.ctx)
        assert all(r == 0 for r in T.roundtrip_residuals())

    def test_shear_jacobian(self):
        e = corpus.load("reaction-diffusion")
        T = shear_map(e.ctx, e.ctx.parse("k"))
        assert T.jacobian_det() == -1

    def test_transform_and_back(self):
        e = corpus.load("reaction-diffusion")
        T = shear_map(e.ctx, e.ctx.parse("k"))
        there = transform_system(e.system, T, leading=[T.dst.parse("vbar_xx"), T.dst.parse("ubar_xx")])
        back = transform_system(there, T.inverted(), leading=[e.ctx.parse("u_xx"), e.ctx.parse("v_xx")])
        for a, b in zip(back.equations, e.system.equations):
            q = normalize(a / b)
            assert q != 0 and not any(J.order > 0 for _, J in e.ctx.jets_in(q).values())

    def test_polar_dynamical_system(self):
        e = corpus.load("dyn-polar")
        T = polar_map(e.ctx)
        x, y = e.ctx.u
        rows = [normalize(x * e.system.equations[0] + y * e.system.equations[1]),
                normalize(-y * e.system.equations[0] + x * e.system.equations[1])]
        out = make_monic(transform_system(rows, T))
        d = T.dst
        want = [d.parse("r_t - r*F(r^2, t)"), d.parse("theta_t - G(r*cos(theta), r*sin(theta), t)")]
        assert all(is_zero(a - b) for a, b in zip(out.equations, want))

    def test_singular_independent_map(self):
        c = JetContext.create(["x", "t"], ["u"])
        d = JetContext.create(["y", "s"], ["w"])
        T = PointMap(c, d, [c.parse("x"), c.parse("x"), c.parse("u")], [d.parse("y"), d.parse("y"), d.parse("w")])
        with pytest.raises(SingularJacobian):
            transform_system([c.parse("u_t")], T)


class TestSubSystem:
    def test_operator_multipliers(self):
        e = corpus.load("lin-hyperbolic")
        ss = e.subsystems["wave"]
        assert ss.order() == 1 and len(ss.evaluate()) == 1

    def test_all_zero_rejected(self):
        with pytest.raises(SystemError_):
            SubSystem.combination(HEAT.system, [0, 0])
