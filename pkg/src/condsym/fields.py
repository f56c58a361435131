"""Projectable Lie point vector fields and their prolongations."""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field

import sympy as sp

from .expr import (
    Context,
    JetVariable,
    ParseError,
    _poly_add_into,
    _poly_build,
    _poly_dict,
    _poly_mul,
    _poly_partial,
    normalize,
    parse_raw,
    partial,
    to_text,
)
from .jets import multi_indices, total_derivative, total_derivative_multi

__all__ = [
    "LiePointField",
    "ProlongedField",
    "apply",
    "apply_evolutionary",
    "characteristic",
    "parse_field",
    "prolong",
]


@dataclass(frozen=True)
class LiePointField:
    """X = xi_i d/dx_i + phi_a d/du_a with xi depending on x only."""

    ctx: Context
    xi: tuple[sp.Expr, ...]
    phi: tuple[sp.Expr, ...]

    def __post_init__(self):
        xi = tuple(normalize(c) for c in self.xi)
        phi = tuple(normalize(c) for c in self.phi)
        if len(xi) != self.ctx.p or len(phi) != self.ctx.q:
            raise ValueError("coefficient count does not match the context")
        u = set(self.ctx.u)
        for c in xi:
            if c.free_symbols & u or any(self.ctx.jet_info(s) for s in c.free_symbols):
                raise ValueError(f"non-projectable field: xi = {to_text(c)} depends on u")
        for c in phi:
            if self.ctx.jet_order(c) >= 1:
                raise ValueError(f"phi = {to_text(c)} depends on derivatives")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_text(cls, text: str, ctx: Context) -> "LiePointField":
        return parse_field(text, ctx)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.xi + self.phi)

    def scaled(self, psi: sp.Expr) -> "LiePointField":
        return LiePointField(self.ctx, tuple(psi * c for c in self.xi), tuple(psi * c for c in self.phi))

    def __add__(self, other: "LiePointField") -> "LiePointField":
        return LiePointField(
            self.ctx,
            tuple(a + b for a, b in zip(self.xi, other.xi)),
            tuple(a + b for a, b in zip(self.phi, other.phi)),
        )

    def __call__(self, e: sp.Basic) -> sp.Expr:
        """Action on a function of (x, u) only (no prolongation)."""
        e = sp.sympify(e)
        out = sum(c * sp.diff(e, x) for c, x in zip(self.xi, self.ctx.x))
        out += sum(c * sp.diff(e, u) for c, u in zip(self.phi, self.ctx.u))
        return normalize(out)

    def __str__(self) -> str:
        terms = []
        for c, n in zip(self.xi + self.phi, self.ctx.independents + self.ctx.dependents):
            if c != 0:
                terms.append(f"({to_text(c)})*d/d{n}")
        return " + ".join(terms) or "0"


_TERM = re.compile(r"d\s*/\s*d\s*([A-Za-z][A-Za-z0-9]*)")


def parse_field(text: str, ctx: Context) -> LiePointField:
    """Parse ``2*t*d/dx - x*u*d/du``: each ``d/dvar`` marks a basis vector.

    The text is read as a linear expression in placeholder basis symbols, so
    coefficients may be written before or after ``d/dvar`` and grouped.
    """
    names = ctx.independents + ctx.dependents
    placeholders = {}

    def repl(m):
        var = m.group(1)
        if var not in names:
            raise ParseError(f"d/d{var}: unknown variable", m.start())
        placeholders[var] = f"D{len(placeholders)}dummy"
        return placeholders[var]

    replaced = _TERM.sub(repl, text)
    if not placeholders:
        raise ParseError("a vector field needs at least one d/dvar term", 0)
    aux = Context(ctx.independents, ctx.dependents, ctx.parameters + tuple(placeholders.values()), ctx.chart)
    expr = sp.expand(parse_raw(replaced, aux))
    basis = {v: aux.symbol(p) for v, p in placeholders.items()}
    coeffs = {}
    rest = expr
    for v, b in basis.items():
        c = expr.coeff(b)
        coeffs[v] = c
        rest -= c * b
    if normalize(rest) != 0 or any(c.free_symbols & set(basis.values()) for c in coeffs.values()):
        raise ParseError("vector field must be linear in the d/dvar terms", 0)
    for v in coeffs:
        coeffs[v] = coeffs[v].xreplace({aux.symbol(n): ctx.symbol(n) for n in names + ctx.parameters})
    xi = tuple(coeffs.get(n, sp.Integer(0)) for n in ctx.independents)
    phi = tuple(coeffs.get(n, sp.Integer(0)) for n in ctx.dependents)
    return LiePointField(ctx, xi, phi)


def characteristic(X: LiePointField) -> tuple[sp.Expr, ...]:
    """Q_a = phi_a - xi_i u_{a,i}."""
    ctx = X.ctx
    out = []
    for a, name in enumerate(ctx.dependents):
        q = X.phi[a]
        for i in range(ctx.p):
            q -= X.xi[i] * ctx.jet(name, tuple(int(k == i) for k in range(ctx.p)))
        out.append(normalize(q))
    return tuple(out)


@dataclass
class ProlongedField:
    """Prolongation coefficients phi^J_a, extended on demand.

    ``method`` selects the evolutionary formula phi^J = D_J Q + xi_i u_{J+i}
    (default) or the classical recursion phi^{J+i} = D_i phi^J - D_i xi_k u_{J+k}.
    """

    base: LiePointField
    order: int = 0
    method: str = "evolutionary"
    auto_extend: bool = True
    coefficients: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        ctx = self.base.ctx
        for a, name in enumerate(ctx.dependents):
            self.coefficients[JetVariable(name, (0,) * ctx.p)] = self.base.phi[a]
        self._Q = characteristic(self.base)

    def extend(self, order: int) -> None:
        """Compute every coefficient up to ``order`` now (they are otherwise
        built on first use)."""
        ctx = self.base.ctx
        for k in range(1, order + 1):
            for name in ctx.dependents:
                for idx in multi_indices(ctx.p, k):
                    self._get(JetVariable(name, idx))
        self.order = max(self.order, order)

    def _get(self, jv: JetVariable) -> sp.Expr:
        c = self.coefficients.get(jv)
        if c is None:
            a = self.base.ctx.dependents.index(jv.dependent)
            c = self._coefficient(a, jv)
            with self._lock:
                self.coefficients[jv] = c
        return c

    def _coefficient(self, a: int, jv: JetVariable) -> sp.Expr:
        ctx, X = self.base.ctx, self.base
        if self.method == "evolutionary":
            out = total_derivative_multi(self._Q[a], jv.index, ctx)
            for i in range(ctx.p):
                out += X.xi[i] * ctx.jet(jv.shifted(i))
            return normalize(out)
        if self.method == "recursive":
            i = next(i for i, k in enumerate(jv.index) if k)
            prev = jv.shifted(i, -1)
            out = total_derivative(self._get(prev), ctx.independents[i], ctx)
            for k in range(ctx.p):
                dxi = sp.diff(X.xi[k], ctx.x[i])
                if dxi != 0:
                    out -= dxi * ctx.jet(prev.shifted(k))
            return normalize(out)
        raise ValueError(f"unknown prolongation method {self.method!r}")

    def coefficient(self, jv: JetVariable) -> sp.Expr:
        if jv.order > self.order:
            if not self.auto_extend:
                raise ValueError(f"prolongation of order {self.order} cannot act on {jv}")
            self.order = jv.order
        return self._get(jv)

    def __call__(self, e: sp.Basic) -> sp.Expr:
        return apply(self, e)


def prolong(X: LiePointField, order: int, method: str = "evolutionary") -> ProlongedField:
    if order < 0:
        raise ValueError("order must be >= 0")
    return ProlongedField(X, order=order, method=method)


def apply(Xp: ProlongedField | LiePointField, e: sp.Basic) -> sp.Expr:
    """pr X (e) = xi_i de/dx_i + sum phi^J de/du_J."""
    if isinstance(Xp, LiePointField):
        Xp = prolong(Xp, 0)
    X, ctx = Xp.base, Xp.base.ctx
    e = sp.sympify(e)
    fast = _apply_polynomial(Xp, e)
    if fast is not None:
        return fast
    out = sum((c * partial(e, x) for c, x in zip(X.xi, ctx.x) if c != 0), sp.Integer(0))
    for j in ctx.jets_in(e):
        out += Xp.coefficient(ctx.jet_info(j)) * partial(e, j)
    return normalize(out)


def _apply_polynomial(Xp: ProlongedField, e: sp.Expr) -> sp.Expr | None:
    # same sum on monomial dicts when e and every coefficient involved are polynomials
    d = _poly_dict(e)
    if d is None:
        return None
    X, ctx = Xp.base, Xp.base.ctx
    pairs = [(c, x) for c, x in zip(X.xi, ctx.x) if c != 0]
    pairs += [(Xp.coefficient(ctx.jet_info(j)), j) for j in ctx.jets_in(e)]
    acc: dict = {}
    for c, var in pairs:
        dc = _poly_dict(c)
        if dc is None:
            return None
        _poly_add_into(acc, _poly_mul(dc, _poly_partial(d, var)))
    return _poly_build(acc)


def apply_evolutionary(X: LiePointField, e: sp.Basic) -> sp.Expr:
    """pr X_Q (e) = sum (D_J Q_a) de/du_{a,J}."""
    ctx = X.ctx
    Q = characteristic(X)
    e = sp.sympify(e)
    out = sp.Integer(0)
    for j in ctx.jets_in(e):
        jv = ctx.jet_info(j)
        a = ctx.dependents.index(jv.dependent)
        out += total_derivative_multi(Q[a], jv.index, ctx) * partial(e, j)
    return normalize(out)
