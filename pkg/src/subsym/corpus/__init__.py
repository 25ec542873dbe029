"""Built-in systems with their fields, sub-systems, laws, maps and recorded verdicts."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import sympy as sp

from ..conservation import (NonFunctionFluxes, NotAConservationLaw, NotASubsymmetry, RankDeficient,
                            deform, inverse_deform, is_trivial, same_law, verify_cl)
from ..decoupling import DecouplingCertificate, decouple_pipeline, is_decoupled, verify_straightening
from ..expr import SubsymError, is_zero, to_text
from ..fields import as_evo
from ..fileformat import Expectation, SystemFile, _bracketed, loads
from ..invariance import check_subsymmetry, check_subsystem_symmetry, check_symmetry, classify
from ..jet import EMPTY
from ..systems import SubSystem, transform_expressions

CorpusEntry = SystemFile

IDS = ("trivial-xy", "euler1d", "sine-gordon", "heat", "heat-inhom", "hopf", "lin-hyperbolic",
       "nls-real", "dyn-polar", "reaction-diffusion", "telegraph-tanu", "telegraph-Gu",
       "telegraph-exp", "telegraph-Ginv")


class UnknownEntry(SubsymError):
    pass


def list_ids():
    return list(IDS)


def text(id_):
    if id_ not in IDS:
        raise UnknownEntry(f"unknown corpus id {id_!r}; known: {', '.join(IDS)}")
    return resources.files(__package__).joinpath("data", f"{id_}.subsym").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load(id_) -> CorpusEntry:
    """Parsed entry; cached, treat as read-only."""
    return loads(text(id_), source=f"corpus:{id_}")


def subsystem(entry, name) -> SubSystem:
    """Named multipliers, or a bare equation name."""
    if name in entry.subsystems:
        return entry.subsystems[name]
    if name in entry.system.names:
        i = entry.system.names.index(name)
        return SubSystem(entry.system, ({(i, EMPTY): 1},))
    raise UnknownEntry(f"{entry.id}: no sub-system or equation named {name!r}")


def scalar_betas(ss: SubSystem):
    """Multipliers of a single scalar combination, one per parent equation."""
    if len(ss.multipliers) != 1 or any(J for (_, J) in ss.multipliers[0]):
        raise SubsymError("expected a single combination with scalar multipliers")
    m = ss.multipliers[0]
    return tuple(m.get((i, EMPTY), sp.S.Zero) for i in range(len(ss.parent)))


def law(entry, name):
    try:
        return verify_cl(entry.laws[name], entry.system)
    except KeyError:
        raise UnknownEntry(f"{entry.id}: no law named {name!r}") from None


def _field(entry, name):
    try:
        return entry.fields[name]
    except KeyError:
        raise UnknownEntry(f"{entry.id}: no field named {name!r}") from None


def _same_field(f, g):
    a, b = as_evo(f), as_evo(g)
    return all(is_zero(x - y) for x, y in zip(a.alpha, b.alpha))


def _bool(v):
    return "true" if v else "false"


def evaluate(entry, exp: Expectation):
    """The verdict the kernel produces for an expectation line, as text."""
    k, a = exp.kind, exp.args
    if k == "symmetry":
        return check_symmetry(_field(entry, a[0]), entry.system, want_gamma=False).verdict
    if k == "subsymmetry":
        return check_subsymmetry(_field(entry, a[0]), subsystem(entry, a[1]), want_gamma=False).verdict
    if k == "subsystem-symmetry":
        return check_subsystem_symmetry(_field(entry, a[0]), subsystem(entry, a[1]),
                                        want_gamma=False).verdict
    if k == "classify":
        return classify(_field(entry, a[0]), subsystem(entry, a[1]))
    if k == "law":
        try:
            law(entry, a[0])
            return "valid"
        except NotAConservationLaw:
            return "invalid"
    if k == "trivial":
        return _bool(is_trivial(law(entry, a[0])))
    if k == "characteristic":
        cl = law(entry, a[0])
        want = [entry.ctx.parse(c) for c in _bracketed(exp.verdict, "characteristic")]
        got = [cl.characteristic.get(i, 0) for i in range(len(entry.system))]
        ok = all(is_zero(entry.system.restrict(g - w)) for g, w in zip(got, want))
        return exp.verdict if ok else "[" + ", ".join(to_text(g) for g in got) + "]"
    if k == "deform":
        f, cl = _field(entry, a[0]), law(entry, a[1])
        try:
            out = deform(f, cl)
        except NotASubsymmetry:
            return "refused"
        except NotAConservationLaw:
            return "not-a-law"
        if exp.verdict.startswith("equals"):
            target = exp.verdict.split(None, 1)[1]
            sign = -1 if target.startswith("-") else 1
            other = verify_cl(tuple(sign * F for F in entry.laws[target.lstrip("-")]), entry.system)
            return exp.verdict if same_law(out, other) else "different"
        return "trivial" if is_trivial(out) else "nontrivial"
    if k == "inverse-deform":
        src, dst = entry.laws[a[0]], entry.laws[a[1]]
        try:
            inv = inverse_deform(src, dst, entry.system)
        except RankDeficient:
            return "rank-deficient"
        except NonFunctionFluxes:
            return "non-function"
        want = entry.fields.get(exp.verdict)
        if want is not None and _same_field(inv.field, want):
            return exp.verdict
        return "field [" + ", ".join(to_text(c) for c in inv.field.alpha) + "]"
    if k == "decoupled":
        ss = subsystem(entry, a[0])
        if len(a) >= 4 and a[2] == "via":
            T = entry.maps[a[3]]
            exprs = transform_expressions(ss.evaluate(), T).equations
            ok, _ = is_decoupled((T.dst, exprs), a[1])
        else:
            ok, _ = is_decoupled(ss, a[1])
        return _bool(ok)
    if k == "straightening":
        ok, _ = verify_straightening(entry.maps[a[0]], _field(entry, a[1]))
        return "holds" if ok else "fails"
    if k == "pipeline":
        T = entry.maps[a[0]]
        cert = DecouplingCertificate(scalar_betas(subsystem(entry, a[1])))
        comp = scalar_betas(subsystem(entry, a[2]))
        res = decouple_pipeline(entry.system, cert, T, complement=comp)
        want = [T.dst.parse(c) for c in _bracketed(exp.verdict, "pipeline result")]
        got = list(res.system.equations)
        ok = len(got) == len(want) and all(is_zero(g - w) for g, w in zip(got, want))
        return exp.verdict if ok else "[" + ", ".join(to_text(g) for g in got) + "]"
    raise SubsymError(f"unknown expectation kind {k!r}")


@dataclass
class Outcome:
    expectation: Expectation
    actual: str

    @property
    def ok(self):
        return self.actual == self.expectation.verdict


def verify_entry(entry) -> list:
    """Recompute every recorded verdict of an entry."""
    if isinstance(entry, str):
        entry = load(entry)
    return [Outcome(e, evaluate(entry, e)) for e in entry.expectations]
