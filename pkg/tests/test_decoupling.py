import pytest
import sympy as sp

from subsym import (DecouplingCertificate, DiffSystem, EvoField, JetContext, PointField, PointMap,
                    check_subsystem_symmetry, corpus, decouple_pipeline, detect_decouplable,
                    determining_equations, is_decoupled, is_zero, verify_straightening)
from subsym.decoupling import Ansatz, catalog_map, certify
from subsym.jet import EMPTY
from subsym.systems import SubSystem, transform_expressions

HEAT = corpus.load("heat")
INHOM = corpus.load("heat-inhom")
RD = corpus.load("reaction-diffusion")
DYN = corpus.load("dyn-polar")


def _rd_after_shear():
    ss = RD.subsystems["rdsub"]
    T = RD.maps["shear"]
    return T.dst, transform_expressions(ss.evaluate(), T).equations


def _polar_result():
    T = DYN.maps["polar"]
    cert = DecouplingCertificate(corpus.scalar_betas(DYN.subsystems["dynsub"]))
    comp = corpus.scalar_betas(DYN.subsystems["dyncomp"])
    return decouple_pipeline(DYN.system, cert, T, complement=comp)


class TestIsDecoupled:
    def test_heat(self):
        assert is_decoupled(HEAT.subsystems["heatsub"], "u")[0]

    def test_heat_inhomogeneous(self):
        assert is_decoupled(INHOM.subsystems["heatsub"], "u")[0]

    def test_heat_second_equation_is_not(self):
        ok, bad = is_decoupled(SubSystem(HEAT.system, ({(1, EMPTY): 1},)), "v")
        assert not ok and HEAT.ctx.parse("u") in bad

    def test_euler_second_equation(self):
        e = corpus.load("euler1d")
        assert not is_decoupled(SubSystem(e.system, ({(1, EMPTY): 1},)), "v")[0]

    def test_rd_after_map(self):
        assert is_decoupled(_rd_after_shear(), "ubar")[0]

    def test_rd_before_map(self):
        assert not is_decoupled(RD.subsystems["rdsub"], "u")[0]

    def test_factor(self):
        c = HEAT.ctx
        assert is_decoupled((c, [c.parse("u_t - u_xx")]), "u", factor=c.parse("exp(x)"))[0]
        with pytest.raises(ValueError):
            is_decoupled((c, [c.parse("u_t")]), "u", factor=0)


class TestStraightening:
    def test_polar(self):
        ok, details = verify_straightening(DYN.maps["polar"], DYN.fields["rot"])
        assert ok, details

    def test_shear(self):
        ok, details = verify_straightening(RD.maps["shear"], RD.fields["shift"])
        assert ok, details

    def test_identity(self):
        T = catalog_map("identity", HEAT.ctx)
        assert verify_straightening(T, PointField((0, 0), (0, 1), HEAT.ctx))[0]

    def test_wrong_field(self):
        ok, details = verify_straightening(DYN.maps["polar"], PointField((0,), (1, 0), DYN.ctx))
        assert not ok and details


class TestPipeline:
    def test_polar_exact(self):
        res = _polar_result()
        c = res.system.ctx
        want = [c.parse("r_t - r*F(r^2, t)"), c.parse("theta_t - G(r*cos(theta), r*sin(theta), t)")]
        assert all(is_zero(a - b) for a, b in zip(res.system.equations, want))
        assert res.certificate.status["decoupled"]

    def test_rd(self):
        T = RD.maps["shear"]
        cert = DecouplingCertificate(corpus.scalar_betas(RD.subsystems["rdsub"]), field=RD.fields["shift"])
        res = decouple_pipeline(RD.system, cert, T, complement=corpus.scalar_betas(RD.subsystems["rdcomp"]))
        c = res.system.ctx
        want = [c.parse("ubar_t - D*ubar_xx - sigma(ubar)"),
                c.parse("vbar_t - D*vbar_xx - R(vbar, ubar + k*vbar)")]
        assert all(is_zero(a - b) for a, b in zip(res.system.equations, want))
        assert res.certificate.status["straightening"] and res.certificate.status["decoupled"]

    def test_identity_leaves_heat_unchanged(self):
        T = HEAT.maps["id"]
        res = decouple_pipeline(HEAT.system, DecouplingCertificate((1, 0)), T, complement=[0, 1])
        assert all(is_zero(a - b) for a, b in zip(res.system.equations, HEAT.system.equations))

    def test_certificate_is_decoupled(self):
        res = _polar_result()
        cert = res.certificate
        assert is_decoupled((res.system.ctx, [res.system.equations[0]]), cert.free_var)[0]
        d = cert.as_dict()
        assert d["free_var"] == "r" and d["status"]["decoupled"]


class TestDetection:
    def test_polar_found_solution(self):
        c = DYN.ctx
        ok, ds = certify(DYN.system, (c.parse("x/y"), 1), DYN.fields["found"])
        assert ok and ds.empty

    def test_polar_search(self):
        cs = sp.symbols("b c1:9")
        b, *cc = cs
        c = DYN.ctx.extend(params=[str(s) for s in cs])
        sys_ = DiffSystem(c, DYN.system.equations, DYN.system.leading)
        t, x, y = c.x[0], *c.u
        an = Ansatz((cc[0],), (cc[1] * x + cc[2] * y + cc[3], cc[4] * x + cc[5] * y + cc[6] + cc[7] * x / y),
                    cs, b * x / y, lam_args=(t, x, y))
        det = detect_decouplable(sys_, an)
        rot = PointField((0,), (-y, x), c)
        assert any(cert.field is not None and
                   all(is_zero(p * q2 - q * p2) for p, q in zip(cert.field.eta, rot.eta)
                       for p2, q2 in zip(cert.field.eta, rot.eta))
                   for cert in det.certificates)

    def test_rd_search(self):
        b, e1, e2 = sp.symbols("b e1 e2")
        c = RD.ctx.extend(params=["b", "e1", "e2"])
        sys_ = DiffSystem(c, RD.system.equations, RD.system.leading)
        det = detect_decouplable(sys_, Ansatz((0, 0), (e1, e2), (b, e1, e2), b))
        k = sp.Symbol("k")
        hits = [cert for cert in det.certificates if cert.status["source"] == "beta2=1"]
        assert hits
        cert = hits[0]
        assert is_zero(cert.betas[0] * 1 + k * cert.betas[1])
        assert is_zero(cert.field.eta[1] - k * cert.field.eta[0])

    def test_heat_candidate(self):
        c = HEAT.ctx
        an = Ansatz((0, 0), (0, 0), candidates=[((1, 0), PointField((0, 0), (0, 1), c))], cases=())
        det = detect_decouplable(HEAT.system, an)
        assert det.certificates and det.branches["candidates"] == [True]


def _decoupled_cases():
    yield "heat", HEAT.subsystems["heatsub"], "v"
    yield "heat-inhom", INHOM.subsystems["heatsub"], "v"
    c, eqs = _rd_after_shear()
    yield "rd-shear", SubSystem(DiffSystem(c, tuple(eqs)), ({(0, EMPTY): 1},)), "vbar"
    res = _polar_result()
    yield "polar", SubSystem(res.system, ({(0, EMPTY): 1},)), "theta"


CASES = list(_decoupled_cases())
CONCRETE = ["1", "x", "t^2*u", "exp(u)*x", "sin(t + u)"]


def _translation(ctx, bound, lam):
    comps = [sp.S.Zero] * ctx.q
    comps[ctx.dep_index(bound)] = lam
    return EvoField(tuple(comps), ctx)


@pytest.mark.parametrize("name,ss,bound", CASES, ids=[c[0] for c in CASES])
def test_symbolic_lambda_translation(name, ss, bound):
    ctx = ss.ctx
    comps = [0] * ctx.q
    comps[ctx.dep_index(bound)] = 1
    ds = determining_equations(EvoField(tuple(comps), ctx), ss, mode="subsystem")
    assert ds.empty


@pytest.mark.parametrize("name,ss,bound", CASES, ids=[c[0] for c in CASES])
@pytest.mark.parametrize("lam", CONCRETE)
def test_concrete_lambda_translation(name, ss, bound, lam):
    ctx = ss.ctx
    x, u = ctx.x[0], ctx.u[0]
    e = sp.sympify(lam, locals={"x": x, "t": ctx.x[-1], "u": u})
    assert check_subsystem_symmetry(_translation(ctx, bound, e), ss, want_gamma=False).holds


def _remap(src, fwd_text, inv_text, names):
    dst = JetContext.create(src.indep, names, params=src.params, opaque=dict(src.opaque))
    fwd = tuple(src.x) + tuple(src.parse(s) for s in fwd_text)
    inv = tuple(dst.x) + tuple(dst.parse(s) for s in inv_text)
    return PointMap(src, dst, fwd, inv)


REMAPS = [
    ("heat", lambda: (HEAT.ctx, HEAT.subsystems["heatsub"].evaluate()),
     ["u", "v + u^3"], ["U", "V - U^3"]),
    ("heat-inhom", lambda: (INHOM.ctx, INHOM.subsystems["heatsub"].evaluate()),
     ["u*exp(x)", "v*exp(u)"], ["U*exp(-x)", "V*exp(-U*exp(-x))"]),
    ("rd-shear", _rd_after_shear, ["ubar + t", "vbar + x*ubar"], ["U - t", "V - x*(U - t)"]),
]


@pytest.mark.parametrize("name,get,fwd,inv", REMAPS, ids=[r[0] for r in REMAPS])
def test_admissible_maps_keep_decoupling(name, get, fwd, inv):
    ctx, eqs = get()
    T = _remap(ctx, fwd, inv, ("U", "V"))
    assert all(r == 0 for r in T.roundtrip_residuals())
    out = transform_expressions(list(eqs), T).equations
    assert is_decoupled((T.dst, out), "U")[0]
