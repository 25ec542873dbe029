"""Reader for system-definition files (format ``subsym/1``).

A file is a sequence of sections. Blank lines and ``#`` comments are
ignored; a line whose brackets are unbalanced continues on the next one.

    format subsym/1
    [system]
    id = sine-gordon
    title = nonlocal sine-Gordon
    [vars]            independent variables, in order
    t x
    [deps]            dependent variables, in order
    u v
    [params]          symbolic constants
    k
    [opaque]          undefined functions with their arity
    F/2 G/3
    [order]           optional truncation order
    6
    [equations]       name = expression [; solve_for jet]
    D1 = u_x - v
    D2 = v_t - sin(u) ; solve_for v_t
    [fields]          point or characteristic form
    X3 = point xi=[t, -x] eta=[0, v]
    Y1 = char [cot(u), -v/2]
    [multipliers]     inline sub-systems; ';' separates sub-equations
    sgsub = v*D2 - sin(u)*D1
    lin = Dt*D1 - c(x)^2*Dx*D2
    [laws]            fluxes, one per independent variable
    sgcl = [v^2/2, cos(u)]
    [maps]            catalog maps or explicit forward/inverse pairs
    polar = catalog polar
    shear = catalog shear k=k
    mine = map to [r, s] forward [t, x + y, x - y] inverse [t, (r + s)/2, (r - s)/2]
    [expect]          recorded verdicts: kind args -> verdict
    symmetry X3 -> holds

In multiplier expressions the equation names stand for the equations and
``D<var>`` factors apply total derivatives to the equation of their term
only: ``c*Dt*D1`` means c * D_t(Delta_1).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import sympy as sp

from .expr import ParseError, SymbolTable, normalize, parse
from .fields import EvoField, PointField
from .jet import JetContext, MultiIndex
from .systems import DiffSystem, PointMap, SubSystem

FORMAT = "subsym/1"
SECTIONS = ("system", "vars", "deps", "params", "opaque", "order", "equations", "fields",
            "multipliers", "laws", "maps", "expect")


class FormatError(ParseError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = f"{source or '<text>'}:{line}: " if line else ""
        super().__init__(where + message)


@dataclass
class Expectation:
    kind: str
    args: list
    verdict: str
    line: int = 0

    def __str__(self):
        return f"{self.kind} {' '.join(self.args)} -> {self.verdict}"


@dataclass
class SystemFile:
    meta: dict
    ctx: JetContext
    system: DiffSystem
    fields: dict = field(default_factory=dict)
    subsystems: dict = field(default_factory=dict)
    multiplier_text: dict = field(default_factory=dict)
    laws: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict)
    expectations: list = field(default_factory=list)
    source: str | None = None

    @property
    def id(self):
        return self.meta.get("id")


def _depth(text):
    return sum(text.count(c) for c in "([{") - sum(text.count(c) for c in ")]}")


def _logical_lines(text):
    buf, start = "", 0
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip() and not buf:
            continue
        if not buf:
            start = n
        cont = line.endswith("\\")
        buf += " " + (line[:-1] if cont else line).strip()
        if cont or _depth(buf) > 0:
            continue
        yield start, buf.strip()
        buf = ""
    if buf:
        yield start, buf.strip()


def split_top(text, sep=","):
    """Split on ``sep`` outside brackets."""
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == sep and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _bracketed(text, what):
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError(f"{what} must be a bracketed list")
    return split_top(text[1:-1])


class _MultiplierTable(SymbolTable):
    """The context's names plus placeholder symbols for equations and D<var> operators."""

    def __init__(self, ctx, extra):
        self.ctx = ctx
        self.extra = extra
        self.strict = True
        self.symbols = ctx.symbols
        self.functions = ctx.functions

    def resolve_symbol(self, name):
        if name in self.extra:
            return self.extra[name]
        return self.ctx.resolve_symbol(name)

    def resolve_jet(self, dep, suffix):
        return self.ctx.resolve_jet(dep, suffix)

    def is_dependent(self, name):
        return self.ctx.is_dependent(name)

    def function_arity(self, name):
        return self.ctx.function_arity(name)


def parse_multipliers(text, system: DiffSystem) -> SubSystem:
    """Inline sub-system syntax such as ``v*D2 - sin(u)*D1`` or ``Dt*D1 - c(x)^2*Dx*D2``."""
    ctx = system.ctx
    eq_syms = {n: sp.Symbol(f"<eq{i}>") for i, n in enumerate(system.names)}
    op_syms = {}
    for j, n in enumerate(ctx.indep):
        name = f"D{n}"
        if name not in eq_syms and name not in ctx.symbols:
            op_syms[name] = sp.Symbol(f"<op{j}>")
    table = _MultiplierTable(ctx, {**eq_syms, **op_syms})
    eq_index = {s: i for i, s in enumerate(eq_syms.values())}
    op_index = {s: ctx.indep.index(n[1:]) for n, s in op_syms.items()}
    rows = []
    for part in split_top(text, ";"):
        expr = sp.expand(parse(part, table))
        mult = {}
        for term in sp.Add.make_args(expr):
            powers = term.as_powers_dict()
            eqs = [s for s in powers if s in eq_index]
            if len(eqs) != 1 or powers[eqs[0]] != 1:
                raise ParseError(f"each term must contain exactly one equation name: {part!r}")
            dirs = []
            coeff = term
            for s, k in powers.items():
                if s in op_index:
                    if not (k.is_Integer and k > 0):
                        raise ParseError(f"bad operator power in {part!r}")
                    dirs += [op_index[s]] * int(k)
                    coeff = coeff / s ** k
            coeff = coeff / eqs[0]
            if coeff.free_symbols & (set(eq_index) | set(op_index)):
                raise ParseError(f"operators must multiply an equation directly: {part!r}")
            key = (eq_index[eqs[0]], MultiIndex(dirs))
            mult[key] = mult.get(key, 0) + coeff
        rows.append({k: normalize(v) for k, v in mult.items() if normalize(v) != 0})
    return SubSystem(system, tuple(rows))


def _parse_field(spec, ctx):
    spec = spec.strip()
    if spec.startswith("char"):
        comps = _bracketed(spec[4:], "char")
        return EvoField(tuple(ctx.parse(c) for c in comps), ctx)
    if spec.startswith("point"):
        m = re.fullmatch(r"point\s+xi\s*=\s*(\[.*\])\s+eta\s*=\s*(\[.*\])", spec)
        if not m:
            raise ValueError("point fields are written: point xi=[...] eta=[...]")
        xi = [ctx.parse(c) for c in _bracketed(m.group(1), "xi")]
        eta = [ctx.parse(c) for c in _bracketed(m.group(2), "eta")]
        return PointField(tuple(xi), tuple(eta), ctx)
    raise ValueError("a field is 'point xi=[...] eta=[...]' or 'char [...]'")


def _parse_map(spec, ctx):
    from .decoupling import catalog_map

    words = spec.split()
    if words and words[0] == "catalog":
        kw = {}
        for w in words[2:]:
            k, v = w.split("=", 1)
            kw[k] = ctx.parse(v)
        return catalog_map(words[1], ctx, **kw)
    m = re.fullmatch(r"map\s+to\s+(\[.*?\])\s+forward\s+(\[.*\])\s+inverse\s+(\[.*\])", spec)
    if not m:
        raise ValueError("a map is 'catalog <name> [k=v ...]' or "
                         "'map to [names] forward [...] inverse [...]'")
    names = _bracketed(m.group(1), "target names")
    dst = JetContext.create(ctx.indep, names, params=ctx.params, opaque=dict(ctx.opaque),
                            max_order=ctx.max_order, pinned=ctx.pinned)
    fwd = tuple(ctx.parse(c) for c in _bracketed(m.group(2), "forward"))
    inv = tuple(dst.parse(c) for c in _bracketed(m.group(3), "inverse"))
    return PointMap(ctx, dst, fwd, inv)


def loads(text, source=None) -> SystemFile:
    """Parse the text of a system-definition file."""
    sections = {}
    current = None
    fmt = None
    for n, line in _logical_lines(text):
        if line.startswith("format"):
            fmt = line.split(None, 1)[1].strip() if len(line.split()) > 1 else ""
            if fmt != FORMAT:
                raise FormatError(f"unsupported format {fmt!r}; expected {FORMAT}", n, source)
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            current = m.group(1)
            if current not in SECTIONS:
                raise FormatError(f"unknown section [{current}]", n, source)
            sections.setdefault(current, [])
            continue
        if current is None:
            raise FormatError("content before the first section", n, source)
        sections[current].append((n, line))

    def words(name):
        return [w for _, l in sections.get(name, []) for w in l.split()]

    def entries(name):
        for n, l in sections.get(name, []):
            if "=" not in l:
                raise FormatError(f"expected 'name = ...' in [{name}]", n, source)
            key, val = l.split("=", 1)
            yield n, key.strip(), val.strip()

    meta = {k: v for _, k, v in entries("system")}
    indep, deps = words("vars"), words("deps")
    if not indep or not deps:
        raise FormatError("[vars] and [deps] are required", None, source)
    opaque = {}
    for w in words("opaque"):
        name, _, arity = w.partition("/")
        if not arity.isdigit():
            raise FormatError(f"opaque declaration {w!r} needs an arity, e.g. F/2", None, source)
        opaque[name] = int(arity)
    order = words("order")
    try:
        ctx = JetContext.create(indep, deps, params=words("params"), opaque=opaque,
                                max_order=int(order[0]) if order else None)
    except ValueError as exc:
        raise FormatError(str(exc), None, source) from None

    names, eqs, leads = [], [], []
    for n, name, val in entries("equations"):
        body, _, solve = val.partition(";")
        try:
            eqs.append(ctx.parse(body))
        except ParseError as exc:
            raise FormatError(f"equation {name}: {exc}", n, source) from None
        names.append(name)
        solve = solve.strip()
        if solve:
            if not solve.startswith("solve_for"):
                raise FormatError("expected 'solve_for <jet>' after ';'", n, source)
            leads.append(solve[len("solve_for"):].strip())
        else:
            leads.append(None)
    if not eqs:
        raise FormatError("[equations] is empty", None, source)
    leading = leads if any(leads) else None
    try:
        system = _build_system(ctx, eqs, leading, names)
    except (ParseError, ValueError) as exc:
        raise FormatError(str(exc), None, source) from None
    except Exception as exc:  # leading-derivative problems
        raise FormatError(f"cannot solve the system for leading derivatives: {exc}", None, source) \
            from None

    ctx = system.ctx
    out = SystemFile(meta, ctx, system, source=source)
    for n, name, val in entries("fields"):
        try:
            out.fields[name] = _parse_field(val, ctx)
        except (ParseError, ValueError) as exc:
            raise FormatError(f"field {name}: {exc}", n, source) from None
    for n, name, val in entries("multipliers"):
        try:
            out.subsystems[name] = parse_multipliers(val, system)
            out.multiplier_text[name] = val
        except (ParseError, ValueError) as exc:
            raise FormatError(f"multipliers {name}: {exc}", n, source) from None
    for n, name, val in entries("laws"):
        try:
            fluxes = tuple(ctx.parse(c) for c in _bracketed(val, "fluxes"))
        except (ParseError, ValueError) as exc:
            raise FormatError(f"law {name}: {exc}", n, source) from None
        if len(fluxes) != ctx.p:
            raise FormatError(f"law {name} needs {ctx.p} fluxes", n, source)
        out.laws[name] = fluxes
    for n, name, val in entries("maps"):
        try:
            out.maps[name] = _parse_map(val, ctx)
        except (ParseError, ValueError, KeyError) as exc:
            raise FormatError(f"map {name}: {exc}", n, source) from None
    for n, line in sections.get("expect", []):
        lhs, arrow, verdict = line.partition("->")
        if not arrow:
            raise FormatError("expectations are written 'kind args -> verdict'", n, source)
        parts = lhs.split()
        out.expectations.append(Expectation(parts[0], parts[1:], verdict.strip(), n))
    return out


def _build_system(ctx, eqs, leading, names):
    if leading is not None:
        leading = tuple(None if lead is None else ctx.parse(lead) for lead in leading)
    return DiffSystem(ctx, tuple(eqs), leading, tuple(names))


def load_path(path) -> SystemFile:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), source=str(path))
