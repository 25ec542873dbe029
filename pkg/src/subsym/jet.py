"""Jet-space bookkeeping: contexts, multi-indices and total derivatives."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from functools import lru_cache

import sympy as sp

from .expr import SubsymError, SymbolTable, normalize, parse


class TruncationOverflow(SubsymError):
    pass


class MultiIndex(tuple):
    """Unordered multiset of direction indices, stored sorted ascending."""

    def __new__(cls, items=()):
        return super().__new__(cls, tuple(sorted(items)))

    @property
    def order(self):
        return len(self)

    def add(self, *js):
        return MultiIndex(tuple(self) + js)

    def contains(self, other) -> bool:
        rest = list(self)
        for j in other:
            if j not in rest:
                return False
            rest.remove(j)
        return True

    def minus(self, other):
        rest = list(self)
        for j in other:
            rest.remove(j)
        return MultiIndex(rest)

    def __repr__(self):
        return f"MultiIndex({tuple(self)!r})"


EMPTY = MultiIndex()


@lru_cache(maxsize=None)
def _jet_symbol(name):
    return sp.Symbol(name)


@dataclass(frozen=True, eq=False)
class JetContext(SymbolTable):
    """Independent and dependent variable names plus a truncation order.

    The context also acts as the parser's symbol table: it knows parameters,
    opaque functions (name -> arity) and how to spell jet coordinates.
    """

    indep: tuple = ()
    deps: tuple = ()
    params: tuple = ()
    opaque: tuple = ()  # pairs (name, arity)
    max_order: int = 6
    pinned: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        names = list(self.indep) + list(self.deps) + list(self.params) + [n for n, _ in self.opaque]
        if len(set(names)) != len(names):
            raise ValueError(f"names must be pairwise distinct: {names}")
        for n in list(self.indep) + list(self.deps) + list(self.params):
            if "_" in n:
                raise ValueError(f"variable names may not contain '_': {n}")
        object.__setattr__(self, "strict", True)
        object.__setattr__(self, "functions", dict(self.opaque))
        syms = {n: sp.Symbol(n) for n in list(self.indep) + list(self.deps) + list(self.params)}
        object.__setattr__(self, "symbols", syms)

    # -- construction helpers ------------------------------------------------
    @classmethod
    def create(cls, indep, deps, params=(), opaque=None, max_order=None, pinned=False):
        env = os.environ.get("SUBSYM_MAX_ORDER")
        if max_order is None and env:
            max_order, pinned = int(env), True
        opaque = tuple(sorted((opaque or {}).items())) if isinstance(opaque, dict) else tuple(opaque or ())
        return cls(tuple(indep), tuple(deps), tuple(params), opaque,
                   6 if max_order is None else max_order, pinned)

    def with_order(self, max_order, pinned=None):
        return replace(self, max_order=max_order, pinned=self.pinned if pinned is None else pinned,
                       _cache={})

    def extend(self, params=(), opaque=None):
        """A context with extra parameters and/or opaque functions."""
        ops = dict(self.opaque)
        ops.update(opaque or {})
        return replace(self, params=tuple(dict.fromkeys(self.params + tuple(params))),
                       opaque=tuple(sorted(ops.items())), _cache={})

    # -- symbols ----------------------------------------------------------------
    @property
    def x(self):
        return [self.symbols[n] for n in self.indep]

    @property
    def u(self):
        return [self.symbols[n] for n in self.deps]

    @property
    def p(self):
        return len(self.indep)

    @property
    def q(self):
        return len(self.deps)

    def direction(self, name_or_index):
        if isinstance(name_or_index, (int, sp.Integer)):
            return int(name_or_index)
        return self.indep.index(str(name_or_index))

    def dep_index(self, name_or_index):
        if isinstance(name_or_index, (int, sp.Integer)):
            return int(name_or_index)
        return self.deps.index(str(name_or_index))

    def jet_name(self, a, J):
        dep = self.deps[a]
        if not J:
            return dep
        dirs = [self.indep[j] for j in J]
        if all(len(d) == 1 for d in dirs):
            return f"{dep}_{''.join(dirs)}"
        return f"{dep}_{{{','.join(dirs)}}}"

    def jet(self, a, J=EMPTY):
        """Symbol for u^a_J; ``a`` and entries of ``J`` may be names or indices."""
        a = self.dep_index(a)
        J = MultiIndex(self.direction(j) for j in J)
        if J.order > self.max_order and self.pinned:
            raise TruncationOverflow(f"jet order {J.order} exceeds pinned maximum {self.max_order}")
        key = ("jet", a, J)
        sym = self._cache.get(key)
        if sym is None:
            sym = _jet_symbol(self.jet_name(a, J))
            self._cache[key] = sym
            self._cache[("info", sym)] = (a, J)
        return sym

    def jet_info(self, sym):
        """(dependent index, MultiIndex) for a jet symbol, or None."""
        key = ("info", sym)
        if key in self._cache:
            return self._cache[key]
        info = None
        if isinstance(sym, sp.Symbol):
            info = self._decode(sym.name)
        self._cache[key] = info
        return info

    def _decode(self, name):
        if name in self.deps:
            return (self.deps.index(name), EMPTY)
        if "_" not in name:
            return None
        dep, suffix = name.split("_", 1)
        if dep not in self.deps:
            return None
        dirs = self._split_dirs(suffix)
        if dirs is None:
            return None
        return (self.deps.index(dep), MultiIndex(self.indep.index(d) for d in dirs))

    def _split_dirs(self, suffix):
        if isinstance(suffix, (list, tuple)):
            parts = list(suffix)
            if len(parts) == 1 and parts[0] not in self.indep:
                return self._split_dirs(parts[0])
            return parts if all(p in self.indep for p in parts) else None
        if suffix.startswith("{") and suffix.endswith("}"):
            body = suffix[1:-1]
            parts = body.split(",") if "," in body else [body]
            return self._split_dirs([p.strip() for p in parts])
        # greedy split of a concatenated string into declared names
        out = []
        rest = suffix
        names = sorted(self.indep, key=len, reverse=True)
        while rest:
            for n in names:
                if rest.startswith(n):
                    out.append(n)
                    rest = rest[len(n):]
                    break
            else:
                return None
        return out

    def jets_in(self, e):
        """Jet symbols (order >= 0) occurring in ``e``, with their info."""
        out = {}
        for s in sp.sympify(e).free_symbols:
            info = self.jet_info(s)
            if info is not None:
                out[s] = info
        return out

    def order_of(self, e):
        return max((J.order for _, J in self.jets_in(e).values()), default=0)

    # -- SymbolTable protocol ------------------------------------------------
    def resolve_jet(self, dep, suffix):
        if dep not in self.deps:
            return None
        dirs = self._split_dirs(suffix)
        if dirs is None:
            return None
        return self.jet(dep, dirs)

    def is_dependent(self, name):
        return name in self.deps

    def parse(self, text):
        return parse(text, self)


def total_derivative_raw(e, j, ctx: JetContext):
    """D_j e without normalization."""
    e = sp.sympify(e)
    j = ctx.direction(j)
    out = sp.diff(e, ctx.x[j])
    for s, (a, J) in ctx.jets_in(e).items():
        d = sp.diff(e, s)
        if d != 0:
            out += ctx.jet(a, J.add(j)) * d
    return out


def total_derivative(e, j, ctx: JetContext):
    """D_j e = de/dx_j + sum u^a_{J+j} de/du^a_J, normalized."""
    return normalize(total_derivative_raw(e, j, ctx))


def total_derivative_multi(e, J, ctx: JetContext, raw=False):
    """D_J e as a composition of single total derivatives (D_() e = e)."""
    e = sp.sympify(e)
    for j in MultiIndex(ctx.direction(k) for k in J):
        e = total_derivative_raw(e, j, ctx)
    return e if raw else normalize(e)


def adjoint_apply(coeffs, ctx: JetContext, n_equations=None):
    """Characteristic (-D)_I Gamma^{iI} summed per equation index i.

    ``coeffs`` maps (i, MultiIndex) -> Expr. Returns {i: Expr}.
    """
    out = {}
    for (i, I), g in coeffs.items():
        term = total_derivative_multi(g, I, ctx, raw=True)
        if I.order % 2:
            term = -term
        out[i] = out.get(i, 0) + term
    if n_equations is not None:
        for i in range(n_equations):
            out.setdefault(i, 0)
    return {i: normalize(v) for i, v in sorted(out.items())}
