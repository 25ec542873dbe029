"""Exact symbolic expressions: parsing, printing, normal forms and zero testing.

Expressions are sympy trees. Jet coordinates are plain symbols whose names
encode the derivative (``u_x``, ``u_xt``); opaque functions are undefined
sympy functions; their slot derivatives are again undefined functions,
named like ``F_{1,2}``.
"""
from __future__ import annotations

import re
from functools import lru_cache

import sympy as sp
from sympy.core.function import AppliedUndef, UndefinedFunction
from sympy.printing.str import StrPrinter


class SubsymError(Exception):
    """Base class for every error raised by this package."""


class ParseError(SubsymError):
    def __init__(self, message: str, pos: int | None = None, text: str | None = None):
        self.pos = pos
        self.text = text
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")


class UnknownSymbolError(ParseError):
    pass


class UnsupportedForm(SubsymError):
    pass


# ---------------------------------------------------------------------------
# formal antiderivative


class Int(sp.Function):
    """Formal antiderivative ``Int(f, s)``: a function of ``s`` with derivative ``f``.

    The constant of integration is absorbed (fixed to zero), so ``Int(0, s)``
    evaluates to 0.
    """

    nargs = 2

    @classmethod
    def eval(cls, f, var):
        if not isinstance(var, sp.Symbol):
            raise TypeError("Int variable must be a symbol")
        if f == 0:
            return sp.S.Zero

    def _eval_derivative(self, s):
        f, var = self.args
        if s == var:
            return f
        if not f.has(s):
            return sp.S.Zero
        return Int(sp.diff(f, s), var)

    def _eval_subs(self, old, new):
        f, var = self.args
        if old == var and not isinstance(new, sp.Symbol):
            return sp.Subs(self, var, new)
        return None


# ---------------------------------------------------------------------------
# symbol tables

ELEMENTARY = {
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "cot": sp.cot,
    "exp": sp.exp,
    "ln": sp.log,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "atan2": sp.atan2,
}
CONSTANTS = {"E": sp.E, "pi": sp.pi}


class SymbolTable:
    """Name resolution for the parser.

    With ``strict=False`` unknown names become fresh symbols and unknown
    function names become opaque functions of whatever arity they are called
    with. Jet contexts subclass this to resolve ``u_x`` style names.
    """

    def __init__(self, symbols=(), functions=None, strict=True):
        self.symbols = {str(s): (s if isinstance(s, sp.Basic) else sp.Symbol(s)) for s in symbols}
        self.functions = dict(functions or {})
        self.strict = strict

    def resolve_symbol(self, name):
        if name in self.symbols:
            return self.symbols[name]
        if name in CONSTANTS:
            return CONSTANTS[name]
        if not self.strict:
            return sp.Symbol(name)
        return None

    def resolve_jet(self, dep, suffix):
        if self.strict:
            return None
        if isinstance(suffix, str):
            return sp.Symbol(f"{dep}_{suffix}")
        return sp.Symbol(f"{dep}_{''.join(suffix)}")

    def is_dependent(self, name):
        return False

    def function_arity(self, name):
        if name in self.functions:
            return self.functions[name]
        return None


def _opaque_fdiff(self, argindex=1):
    cls = self.func
    return opaque_derivative(cls._subsym_base, cls._subsym_slots + (argindex,))(*self.args)


@lru_cache(maxsize=None)
def _opaque_class(name, slots):
    label = f"{name}_{{{','.join(map(str, slots))}}}" if slots else name
    body = {"fdiff": _opaque_fdiff, "_subsym_base": name, "_subsym_slots": slots}
    return UndefinedFunction(label, bases=(AppliedUndef,), __dict__=body)


def opaque_derivative(name: str, slots=()):
    """Undefined function standing for the slot derivative of ``name`` (1-based slots).

    Each derivative is its own interned function, so the chain rule never
    produces ``Subs``/``Derivative`` nodes and equal derivatives are equal trees.
    """
    return _opaque_class(name, tuple(sorted(slots)))


def opaque(name: str):
    """The undefined sympy function with this name (interned)."""
    return _opaque_class(name, ())


def opaque_info(f):
    """(base name, slots) for an applied opaque function or its class, else None."""
    cls = f.func if isinstance(f, AppliedUndef) else f
    if hasattr(cls, "_subsym_base"):
        return cls._subsym_base, cls._subsym_slots
    if isinstance(cls, UndefinedFunction):
        return cls.__name__, ()
    return None


def substitute_function(e, name, lam):
    """Replace opaque ``name`` and all its slot derivatives by the sympy Lambda ``lam``."""
    if not isinstance(lam, sp.Lambda):
        lam = sp.Lambda(tuple(slot_symbols(0)), lam)

    def value(a):
        _, slots = opaque_info(a)
        if not slots:
            body = lam.expr
        elif len(lam.variables) == 0:
            return sp.S.Zero
        else:
            body = sp.diff(lam.expr, *[lam.variables[k - 1] for k in slots])
        return body.subs(dict(zip(lam.variables, a.args)), simultaneous=True)

    def hit(a):
        info = opaque_info(a) if isinstance(a, AppliedUndef) else None
        return info is not None and info[0] == name

    return sp.sympify(e).replace(hit, value)


def slot_symbols(n):
    return [sp.Dummy(f"z{k}") for k in range(1, n + 1)]


def slot_derivative(fname, slots, args):
    """Formal derivative of opaque ``fname`` in the given 1-based argument slots."""
    return opaque_derivative(fname, slots)(*[sp.sympify(a) for a in args])


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<name>[A-Za-zͰ-Ͽ][A-Za-z0-9Ͱ-Ͽ]*)"
    r"|(?P<op>\*\*|[-+*/^(),_{}]))"
)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}",
                             len(text) - len(text[pos:].lstrip()), text)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text, table):
        self.text = text
        self.table = table
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        return self.toks[self.i + k]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.next()
        if tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2], self.text)
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, tok[2], self.text)

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            t = self.unary()
            if op == "*":
                e = e * t
            else:
                if t == 0:
                    raise self.error("division by zero")
                e = e / t
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.next()
            return -self.unary()
        if self.peek()[1] == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.next()
            ex = self.unary()
            return base ** ex
        return base

    def args(self):
        self.expect("(")
        out = []
        if self.peek()[1] == ")":
            self.next()
            return out
        while True:
            out.append(self.expr())
            tok = self.next()
            if tok[1] == ")":
                return out
            if tok[1] != ",":
                raise ParseError(f"expected ',' or ')', found {tok[1]!r}", tok[2], self.text)

    def subscript(self):
        """Text after ``_``: either a bare name/number or a braced list."""
        tok = self.next()
        if tok[1] == "{":
            parts = []
            while True:
                t = self.next()
                if t[0] in ("name", "num"):
                    parts.append(t[1])
                elif t[1] == ",":
                    continue
                elif t[1] == "}":
                    return parts, True
                else:
                    raise ParseError(f"bad subscript token {t[1]!r}", t[2], self.text)
        if tok[0] in ("name", "num"):
            return [tok[1]], False
        raise ParseError("expected subscript after '_'", tok[2], self.text)

    def atom(self):
        tok = self.next()
        kind, val, pos = tok
        if kind == "num":
            return sp.Rational(val)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind != "name":
            raise ParseError(f"unexpected token {val or 'end of input'!r}", pos, self.text)
        if self.peek()[1] == "_":
            self.next()
            parts, braced = self.subscript()
            if self.peek()[1] == "(":
                # slot derivative of an opaque function: F_{1,2}(a, b)
                try:
                    slots = [int(p) for p in parts]
                except ValueError:
                    raise ParseError(f"slot derivative of {val} needs integer slots", pos, self.text)
                args = self.args()
                self._check_function(val, len(args), pos)
                if any(s < 1 or s > len(args) for s in slots):
                    raise ParseError(f"slot out of range for {val}", pos, self.text)
                return slot_derivative(val, slots, args)
            jet = self.table.resolve_jet(val, parts if braced else parts[0])
            if jet is None:
                if not self.table.is_dependent(val):
                    raise UnknownSymbolError(f"unknown dependent variable {val!r}", pos, self.text)
                raise UnknownSymbolError(f"unknown derivative directions in {val}_{''.join(parts)}",
                                         pos, self.text)
            return jet
        if self.peek()[1] == "(":
            args_pos = self.peek()[2]
            if val == "Diff":
                return self._diff(pos)
            args = self.args()
            if val == "Int":
                if len(args) != 2 or not isinstance(args[1], sp.Symbol):
                    raise ParseError("Int takes an integrand and a symbol", pos, self.text)
                return Int(args[0], args[1])
            if val in ELEMENTARY and self.table.function_arity(val) is None:
                want = 2 if val == "atan2" else 1
                if len(args) != want:
                    raise ParseError(f"{val} takes {want} argument(s)", args_pos, self.text)
                out = ELEMENTARY[val](*args)
                if val in ("sin", "cos"):
                    out = sp.expand_trig(out)
                return out
            self._check_function(val, len(args), pos)
            return opaque(val)(*args)
        sym = self.table.resolve_symbol(val)
        if sym is None:
            raise UnknownSymbolError(f"unknown symbol {val!r}", pos, self.text)
        return sym

    def _diff(self, pos):
        self.expect("(")
        dep = self.next()
        if dep[0] != "name":
            raise ParseError("Diff expects a dependent variable", dep[2], self.text)
        dirs = []
        while self.peek()[1] == ",":
            self.next()
            d = self.next()
            if d[0] != "name":
                raise ParseError("Diff directions must be names", d[2], self.text)
            dirs.append(d[1])
        self.expect(")")
        if not dirs:
            sym = self.table.resolve_symbol(dep[1])
            if sym is None or not self.table.is_dependent(dep[1]):
                raise UnknownSymbolError(f"unknown dependent variable {dep[1]!r}", dep[2], self.text)
            return sym
        jet = self.table.resolve_jet(dep[1], dirs)
        if jet is None:
            raise UnknownSymbolError(f"cannot resolve Diff({dep[1]}, {', '.join(dirs)})", pos, self.text)
        return jet

    def _check_function(self, name, n, pos):
        arity = self.table.function_arity(name)
        if arity is None:
            if self.table.strict:
                raise UnknownSymbolError(f"unknown function {name!r}", pos, self.text)
            return
        if arity != n:
            raise ParseError(f"{name} declared with arity {arity}, called with {n}", pos, self.text)


def parse(text: str, table: SymbolTable | None = None) -> sp.Expr:
    """Parse an expression; ``table`` defaults to a permissive table."""
    if table is None:
        table = SymbolTable(strict=False)
    if not isinstance(text, str):
        raise ParseError("expression text must be a string")
    if not text.strip():
        raise ParseError("empty expression", 0, text)
    return _Parser(text, table).parse()


# ---------------------------------------------------------------------------
# printer


class _Printer(StrPrinter):
    def _print_Derivative(self, expr):
        f = expr.expr
        if isinstance(f, AppliedUndef):
            slots = []
            for v, n in expr.variable_count:
                k = list(f.args).index(v) + 1
                slots.extend([k] * int(n))
            args = ", ".join(self._print(a) for a in f.args)
            return f"{f.func.__name__}_{{{','.join(map(str, slots))}}}({args})"
        return super()._print_Derivative(expr)

    def _print_Subs(self, expr):
        inner, variables, point = expr.args
        if isinstance(inner, sp.Derivative) and isinstance(inner.expr, AppliedUndef):
            f = inner.expr
            mapping = dict(zip(variables, point))
            slots = []
            for v, n in inner.variable_count:
                k = list(f.args).index(v) + 1
                slots.extend([k] * int(n))
            args = ", ".join(self._print(a.xreplace(mapping)) for a in f.args)
            return f"{f.func.__name__}_{{{','.join(map(str, slots))}}}({args})"
        return super()._print_Subs(expr)


def to_text(e) -> str:
    """Print an expression in the parseable grammar (``^`` for powers)."""
    return _Printer({"order": None}).doprint(sp.sympify(e)).replace("**", "^")


# ---------------------------------------------------------------------------
# normal form


def _is_int_multiple(a):
    if a.is_Add:
        return True
    if a.is_Mul:
        c, _ = a.as_coeff_Mul()
        return c.is_Integer and abs(c) > 1
    return False


def _rewrite(e):
    """Apply closure rules bottom-up and canonicalize kernel arguments."""
    if e.is_Atom:
        return e
    if isinstance(e, (sp.Derivative, sp.Subs)):
        if isinstance(_core(e), AppliedUndef):
            # derivatives of opaque functions evaluate to slot-derivative functions
            out = e.doit()
            if not isinstance(out, (sp.Derivative, sp.Subs)):
                return _rewrite(out)
        if isinstance(e, sp.Derivative):
            return sp.Derivative(_rewrite(e.expr), *e.variable_count)
        inner, variables, point = e.args
        return sp.Subs(inner, variables, [normalize(p) for p in point])
    if isinstance(e, AppliedUndef):
        return e.func(*[normalize(a) for a in e.args])
    if isinstance(e, Int):
        return Int(normalize(e.args[0]), e.args[1])
    args = [_rewrite(a) for a in e.args]
    if isinstance(e, sp.tan):
        a = args[0]
        return _rewrite(sp.sin(a)) / _rewrite(sp.cos(a))
    if isinstance(e, sp.cot):
        a = args[0]
        return _rewrite(sp.cos(a)) / _rewrite(sp.sin(a))
    if isinstance(e, sp.sec):
        return 1 / _rewrite(sp.cos(args[0]))
    if isinstance(e, sp.csc):
        return 1 / _rewrite(sp.sin(args[0]))
    if isinstance(e, (sp.sin, sp.cos)):
        a = normalize(args[0])
        out = e.func(a)
        if _is_int_multiple(a):
            out = sp.expand_trig(out)
        return out
    if isinstance(e, sp.log):
        a = normalize(args[0])
        factors = sp.Mul.make_args(a)
        if all(isinstance(f, sp.exp) for f in factors):
            # exp of a sum is stored split, so log sees a product of exps
            return normalize(sp.Add(*[f.args[0] for f in factors]))
        return sp.log(a)
    if isinstance(e, sp.exp):
        a = normalize(args[0])
        if a.is_Add:
            return sp.Mul(*[sp.exp(t) for t in a.args])
        return sp.exp(a)
    if e.is_Pow:
        b, x = args
        if not x.is_Integer:
            b = normalize(b)
        return b ** x
    if isinstance(e, sp.Function):
        return e.func(*[normalize(a) for a in args])
    return e.func(*args)


def _core(e):
    while isinstance(e, (sp.Derivative, sp.Subs)):
        e = e.args[0]
    return e


def _trig_kernels(e):
    out = set()
    for f in e.atoms(sp.cos):
        out.add(f.args[0])
    return out


def _reduce_trig(p):
    """Rewrite cos(k)^n with n >= 2 via cos^2 = 1 - sin^2; ``p`` is expanded."""
    for k in sorted(_trig_kernels(p), key=sp.default_sort_key):
        c = sp.cos(k)
        if not p.has(c):
            continue
        terms = sp.Add.make_args(p)
        changed = False
        out = []
        for t in terms:
            powers = t.as_powers_dict()
            n = sp.sympify(powers.get(c, 0))
            if n.is_Integer and n >= 2:
                rest = t / c ** n
                t = rest * c ** (n % 2) * (1 - sp.sin(k) ** 2) ** (n // 2)
                changed = True
            out.append(t)
        if changed:
            p = sp.expand(sp.Add(*out))
    return p


def _num_den(e):
    e = _rewrite(sp.sympify(e))
    e = sp.together(e)
    num, den = sp.fraction(e)
    num = _reduce_trig(sp.expand(num))
    den = _reduce_trig(sp.expand(den))
    return num, den


def normalize(e):
    """Canonical rational normal form: a single expanded numerator over denominator."""
    e = sp.sympify(e)
    if e.is_Number or e.is_Symbol:
        return e
    return _normalize_cached(e)


@lru_cache(maxsize=20000)
def _normalize_cached(e):
    num, den = _num_den(e)
    if num == 0:
        return sp.S.Zero
    if den.is_Number:
        return sp.expand(num / den)
    q = sp.cancel(num / den)
    num, den = sp.fraction(q)
    num = _reduce_trig(sp.expand(num))
    den = _reduce_trig(sp.expand(den))
    if den.is_Number:
        return sp.expand(num / den)
    # fix the sign so the denominator's leading term is positive
    lead = sp.Add.make_args(den)
    first = sorted(lead, key=sp.default_sort_key)[0]
    if first.as_coeff_Mul()[0].is_negative:
        num, den = -num, -den
        num, den = sp.expand(num), sp.expand(den)
    return sp.Mul(num, sp.Pow(den, -1), evaluate=False) if num.is_Add else num / den


def numerator(e):
    """Expanded numerator of ``e`` after closure rules (denominators dropped)."""
    return _num_den(e)[0]


def denominators(e):
    """Nonconstant denominator factors of ``e``, reported as ``!= 0`` side conditions."""
    _, den = _num_den(e)
    if den.is_Number:
        return []
    out = []
    for f in sp.Mul.make_args(sp.factor_terms(den)):
        base = f.as_base_exp()[0] if f.is_Pow else f
        if not base.is_Number:
            out.append(base)
    return out


def is_zero(e) -> bool:
    """Zero test on the numerator of the rational normal form."""
    e = sp.sympify(e)
    if e == 0:
        return True
    return _is_zero_cached(e)


@lru_cache(maxsize=20000)
def _is_zero_cached(e):
    return numerator(e) == 0


def equal(a, b) -> bool:
    return is_zero(sp.sympify(a) - sp.sympify(b))


def diff_partial(e, s, table: SymbolTable | None = None):
    """Formal partial derivative with every other symbol held fixed."""
    if isinstance(s, str):
        sym = table.resolve_symbol(s) if table is not None else None
        if sym is None and table is not None:
            sym = _resolve_name(table, s)
        if sym is None:
            raise UnknownSymbolError(f"unknown symbol {s!r}")
        s = sym
    if not isinstance(s, sp.Symbol):
        raise UnknownSymbolError(f"cannot differentiate with respect to {s}")
    if table is not None and table.strict and not _known(table, s):
        raise UnknownSymbolError(f"unknown symbol {s}")
    return sp.diff(sp.sympify(e), s)


def _resolve_name(table, name):
    try:
        return parse(name, table)
    except ParseError:
        return None


def _known(table, s):
    try:
        return parse(s.name, table) == s
    except ParseError:
        return False
