"""Worked examples with known values, checked one by one."""
import sympy as sp

from subsym import (DiffSystem, EvoField, JetContext, PointField, check_subsymmetry,
                    check_subsystem_symmetry, corpus, diff_partial, is_zero, restrict, total_derivative)
from subsym.cli import run
from subsym.decoupling import Ansatz, detect_decouplable
from subsym.expr import substitute_function
from subsym.fields import as_evo, flow_truncated
from subsym.systems import transform_expressions
from sympy.core.function import AppliedUndef

SG = corpus.load("sine-gordon")


def test_opaque_applications_in_telegraph_source():
    c = JetContext.create(["x", "t"], ["u", "v"], opaque={"F": 1, "G": 1})
    e = c.parse("F(u)*u_x + G(u)")
    assert len(e.atoms(AppliedUndef)) == 2


def test_slot_derivative_of_radial_argument():
    c = JetContext.create(["t"], ["u", "v"], opaque={"F": 2})
    got = diff_partial(c.parse("F(u^2 + v^2, t)"), "u", c)
    assert is_zero(got - c.parse("2*u*F_{1}(u^2 + v^2, t)"))


def test_sine_gordon_flux_derivatives():
    c = SG.ctx
    assert is_zero(total_derivative(c.parse("v^2/2"), "t", c) - c.parse("v*v_t"))
    assert is_zero(total_derivative(c.parse("cos(u)"), "x", c) + c.parse("sin(u)*u_x"))


def test_sine_gordon_combination_and_restriction():
    e = SG.subsystems["sgsub"].evaluate()[0]
    assert is_zero(e - SG.ctx.parse("v*v_t - u_x*sin(u)"))
    assert restrict(e, SG.system) == 0


def test_trivial_system_restriction():
    tr = corpus.load("trivial-xy")
    assert restrict(tr.ctx.parse("u_y + x*u_xy"), tr.system) == 0


def test_time_translation_in_vertical_form():
    f = as_evo(SG.fields["X1"])
    assert is_zero(f.alpha[0] + SG.ctx.parse("u_t")) and is_zero(f.alpha[1] + SG.ctx.parse("v_t"))


def test_flow_of_arbitrary_initial_function():
    c = JetContext.create(["x", "y", "z"], ["u"], opaque={"h": 1})
    f = EvoField((c.parse("y + x*u_y"),), c)
    u, eps = flow_truncated(f, [c.parse("h(z)")], order=2)
    assert is_zero(u[0] - c.parse("h(z)") - eps * c.parse("y") - eps**2 / 2 * c.parse("x"))


def test_wave_operator_combination():
    e = corpus.load("lin-hyperbolic")
    assert is_zero(e.subsystems["wave"].evaluate()[0] - e.ctx.parse("u_tt - c(x)^2*u_xx"))


def test_polar_map_on_radial_combination():
    d = corpus.load("dyn-polar")
    T = d.maps["polar"]
    out = transform_expressions(d.subsystems["dynsub"].evaluate(), T).equations[0]
    assert is_zero(out - T.dst.parse("r*r_t - r^2*F(r^2, t)"))


def test_euler_families_with_named_instances():
    e = corpus.load("euler1d")
    x, t, u, v, a, b, cc = sp.symbols("x t u v a b c")
    insts = {"X1": ("tau", (x, t, u, v), x * t * u), "X2": ("alpha", (a, b, cc), a * cc),
             "X3": ("gamma", (a, b, cc), sp.exp(cc)), "X4": ("lambda", (x, t, u, v), x + t + u + v)}
    for fam, (name, args, body) in insts.items():
        f = e.fields[fam]
        lam = sp.Lambda(args, body)
        g = PointField(tuple(substitute_function(k, name, lam) for k in f.xi),
                       tuple(substitute_function(k, name, lam) for k in f.eta), e.ctx)
        assert check_subsymmetry(g, e.subsystems["sub1"], want_gamma=False).holds, fam


def test_heat_translation_gamma_zero():
    h = corpus.load("heat")
    r = check_subsystem_symmetry(h.fields["Xlam"], h.subsystems["heatsub"])
    assert r.holds and all(not g for g in r.gamma)


def test_y_translation_is_a_subsystem_symmetry():
    tr = corpus.load("trivial-xy")
    assert check_subsystem_symmetry(tr.fields["Yt"], tr.subsystems["sub1"], want_gamma=False).holds


def _rd(general_source=False):
    names = ["D", "k", "E", "b", "e1", "e2", "c1"]
    c = JetContext.create(["x", "t"], ["u", "v"], params=names, opaque={"R": 2, "sigma": 1, "S": 2})
    second = "v_t - E*v_xx - S(u, v)" if general_source else "v_t - E*v_xx - k*R(u, v) - sigma(v - k*u)"
    return c, DiffSystem.from_text(c, ["u_t - D*u_xx - R(u, v)", second], leading=["u_xx", "v_xx"])


def test_reaction_diffusion_forces_equal_diffusion():
    c, sys_ = _rd()
    b, e1, e2, E = sp.symbols("b e1 e2 E")
    det = detect_decouplable(sys_, Ansatz((0, 0), (e1, e2), (b, e1, e2, E), b))
    assert det.certificates
    assert all(cert.status.get("parameters") == {"E": "D"} for cert in det.certificates)


def test_reaction_diffusion_moving_frame_branch_pruned():
    c, sys_ = _rd(general_source=True)
    b, e1, e2, c1 = sp.symbols("b e1 e2 c1")
    det = detect_decouplable(sys_, Ansatz((1, c1), (e1, e2), (b, c1, e1, e2), b))
    assert not det.certificates
    assert all(br["status"] == "pruned" for br in det.branches.values())


def test_cli_examples():
    code, rep = run(["check-subsym", "--system", "corpus:sine-gordon", "--field", "Y1",
                     "--sub", "v*D2 - sin(u)*D1"])
    assert code == 0 and rep.data["verdicts"][0]["holds"]
    code, rep = run(["deform", "--system", "corpus:sine-gordon", "--cl", "sgcl", "--field", "X1"])
    assert code == 0 and rep.data["results"]["trivial"] is True
    code, rep = run(["inverse-deform", "--system", "corpus:hopf", "--source", "A", "--target", "P"])
    assert code == 1 and rep.data["results"]["error"] == "RankDeficient"
