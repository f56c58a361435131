"""Symmetry-adapted coordinates (s, z, v) and change of variables.

A chart is stored through its forward map ``s(x), z_k(x), v_a(x, u)`` and
its inverse ``x_i(s, z), u_a(s, z, v)``.  Equations are carried between
coordinate systems with the chain rule, using only the map in the direction
of the substitution.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp

from .expr import Context, ParseError, normalize, parse, to_text, zero_test
from .fields import LiePointField
from .jets import total_derivative

__all__ = [
    "CanonicalChart",
    "ChartError",
    "ChartReport",
    "Transformed",
    "change_variables",
    "clear_factor",
    "derive_chart",
    "inverse_transform",
    "parse_chart",
    "transform_equation",
    "verify_chart",
]


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class CanonicalChart:
    ctx: Context
    chart_ctx: Context
    forward: tuple[sp.Expr, ...]  # s, z_1.., v_1..  in terms of (x, u)
    inverse: tuple[sp.Expr, ...]  # x_1.., u_1..     in terms of (s, z, v)
    base_point: tuple[sp.Rational, ...] = ()

    def __post_init__(self):
        ctx, cc = self.ctx, self.chart_ctx
        if cc.p != ctx.p or cc.q != ctx.q:
            raise ChartError("chart dimensions do not match the context")
        if len(self.forward) != ctx.p + ctx.q or len(self.inverse) != ctx.p + ctx.q:
            raise ChartError("chart needs p + q forward and inverse expressions")
        object.__setattr__(self, "forward", tuple(normalize(e) for e in self.forward))
        object.__setattr__(self, "inverse", tuple(normalize(e) for e in self.inverse))
        if not self.base_point:
            object.__setattr__(self, "base_point", (sp.Integer(1),) * (ctx.p + ctx.q))

    @property
    def s(self) -> sp.Symbol:
        return self.chart_ctx.x[0]

    @property
    def z(self) -> tuple[sp.Symbol, ...]:
        return self.chart_ctx.x[1:]

    def forward_map(self) -> dict:
        cc = self.chart_ctx
        return dict(zip(cc.x + cc.u, self.forward))

    def inverse_map(self) -> dict:
        ctx = self.ctx
        return dict(zip(ctx.x + ctx.u, self.inverse))

    def to_text(self) -> str:
        lines = [f"{n} = {to_text(e)}" for n, e in zip(self.chart_ctx.independents + self.chart_ctx.dependents, self.forward)]
        lines.append("inverse:")
        lines += [f"{n} = {to_text(e)}" for n, e in zip(self.ctx.independents + self.ctx.dependents, self.inverse)]
        return "\n".join(lines)


def chart_context(ctx: Context, names: Sequence[str] | None = None) -> Context:
    if names is None:
        if ctx.p == 1:
            indep = ("s",)
        elif ctx.p == 2:
            indep = ("s", "z")
        else:
            pool = [c for c in "zyrwpq" if c not in ctx.independents + ctx.parameters]
            indep = ("s",) + tuple(pool[: ctx.p - 1])
        deps = ("v",) if ctx.q == 1 else tuple(f"v{a + 1}" for a in range(ctx.q))
    else:
        indep, deps = tuple(names[: ctx.p]), tuple(names[ctx.p :])
    return Context(indep, deps, ctx.parameters, chart=True)


def parse_chart(text: str, ctx: Context, base_point: Sequence | None = None) -> CanonicalChart:
    """Read a chart block: forward lines, then ``inverse:`` and inverse lines."""
    fwd, inv, target = [], [], None
    target = fwd
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.rstrip(":") == "inverse":
            target = inv
            continue
        name, eq, rhs = line.partition("=")
        if not eq:
            raise ParseError(f"line {lineno}: expected 'name = expression'")
        target.append((name.strip(), rhs.strip()))
    n = ctx.p + ctx.q
    if len(fwd) != n or len(inv) != n:
        raise ParseError(f"chart needs {n} forward and {n} inverse lines")
    cc = chart_context(ctx, [name for name, _ in fwd])
    forward = tuple(parse(rhs, ctx) for _, rhs in fwd)
    order = {name: rhs for name, rhs in inv}
    missing = set(ctx.independents + ctx.dependents) - set(order)
    if missing:
        raise ParseError(f"inverse section misses {sorted(missing)}")
    inverse = tuple(parse(order[name], cc) for name in ctx.independents + ctx.dependents)
    for e in forward[: ctx.p]:
        if e.free_symbols & set(ctx.u):
            raise ChartError("s and z must not depend on u (projectable charts only)")
    bp = tuple(sp.Rational(b) for b in base_point) if base_point else ()
    return CanonicalChart(ctx, cc, forward, inverse, bp)


# ---------------------------------------------------------------------------
# chart catalog


def _const(e, syms) -> bool:
    return not (e.free_symbols & set(syms))


def _integrate(e: sp.Expr, var: sp.Symbol) -> sp.Expr:
    res = sp.integrate(e, var)
    if res.has(sp.Integral):
        raise ChartError(f"cannot integrate {to_text(e)} in closed form")
    return normalize(res)


def _base_part(X: LiePointField, cc: Context):
    """Return (s(x), z(x), x(s, z)) from the x-components of X."""
    ctx = X.ctx
    x, xi = ctx.x, X.xi
    y = cc.x
    s_sym, z_syms = y[0], y[1:]
    nz = [i for i, c in enumerate(xi) if c != 0]
    if not nz:
        raise ChartError("fields with xi = 0 are not in the catalog")
    others = lambda i0: [k for k in range(ctx.p) if k != i0]

    def assemble(i0, s_fwd, z_fwd, x_i0_inv, x_k_inv):
        ks = others(i0)
        inv = [None] * ctx.p
        inv[i0] = x_i0_inv
        for k, e in zip(ks, x_k_inv):
            inv[k] = e
        return normalize(s_fwd), tuple(normalize(e) for e in z_fwd), tuple(normalize(e) for e in inv)

    # translations: constant xi
    if all(_const(c, x) for c in xi):
        i0 = nz[0]
        ks = others(i0)
        z_fwd = [x[k] - xi[k] / xi[i0] * x[i0] for k in ks]
        z_inv = [zk + xi[k] * s_sym for k, zk in zip(ks, z_syms)]
        return assemble(i0, x[i0] / xi[i0], z_fwd, xi[i0] * s_sym, z_inv)

    # scalings: xi_i = a_i x_i
    ratios = [normalize(c / xi_x) for c, xi_x in zip(xi, x)]
    if all(r.is_Rational for r in ratios):
        i0 = min(nz, key=lambda i: (abs(ratios[i]) != 1, abs(ratios[i]), i))
        a0 = ratios[i0]
        ks = others(i0)
        z_fwd, z_inv = [], []
        for k, zk in zip(ks, z_syms):
            if ratios[k] == 0:
                z_fwd.append(x[k])
                z_inv.append(zk)
            else:
                z_fwd.append(x[i0] ** (ratios[k] / a0) / x[k])
                z_inv.append(sp.exp(ratios[k] * s_sym) / zk)
        return assemble(i0, sp.log(x[i0]) / a0, z_fwd, sp.exp(a0 * s_sym), z_inv)

    # rotations in a coordinate pair
    if len(nz) == 2:
        a, b = nz
        c = normalize(xi[a] / x[b])
        if c.is_Rational and normalize(xi[b] + c * x[a]) == 0:
            ks = [k for k in range(ctx.p) if k not in (a, b)]
            inv = [None] * ctx.p
            r = z_syms[0]
            inv[a] = r * sp.sin(c * s_sym)
            inv[b] = r * sp.cos(c * s_sym)
            rest = z_syms[1:]
            for k, zk in zip(ks, rest):
                inv[k] = zk
            z_fwd = [sp.sqrt(x[a] ** 2 + x[b] ** 2)] + [x[k] for k in ks]
            return normalize(sp.atan(x[a] / x[b]) / c), tuple(z_fwd), tuple(inv)

    # one moving coordinate, xi_j independent of x_j
    if len(nz) == 1:
        j = nz[0]
        if not xi[j].has(x[j]):
            ks = others(j)
            sub = {x[k]: zk for k, zk in zip(ks, z_syms)}
            return assemble(j, x[j] / xi[j], [x[k] for k in ks], xi[j].xreplace(sub) * s_sym, list(z_syms))

    # xi_i0 = 1, other xi functions of x_i0 only
    for i0 in nz:
        if xi[i0] != 1:
            continue
        ks = others(i0)
        if all(_const(xi[k], [x[m] for m in range(ctx.p) if m != i0]) for k in ks):
            F = [_integrate(xi[k], x[i0]) for k in ks]
            z_fwd = [x[k] - Fk for k, Fk in zip(ks, F)]
            z_inv = [zk + Fk.xreplace({x[i0]: s_sym}) for zk, Fk in zip(z_syms, F)]
            return assemble(i0, x[i0], z_fwd, s_sym, z_inv)

    raise ChartError(f"field {X} is not in the chart catalog; supply a chart")


def derive_chart(X: LiePointField, names: Sequence[str] | None = None) -> CanonicalChart:
    """Canonical coordinates for fields of the catalog.

    Covered: translations, scalings, rotations in a coordinate pair,
    a(t) d/dx type fields with one moving coordinate, and fields with
    xi_i0 = 1 whose other xi depend on x_i0 only; the u-components must be
    linear in u (or a pure scaling of u).
    """
    ctx = X.ctx
    if X.is_zero():
        raise ChartError("degenerate (zero) vector field")
    cc = chart_context(ctx, names)
    s_fwd, z_fwd, x_inv = _base_part(X, cc)
    s_sym = cc.x[0]
    to_chart = dict(zip(ctx.x, x_inv))

    xi, x = X.xi, ctx.x
    ratios = [normalize(c / xx) for c, xx in zip(xi, x)]
    scaling = all(r.is_Rational for r in ratios) and not all(_const(c, x) for c in xi)

    v_fwd, u_inv = [], []
    for a, (u, vsym) in enumerate(zip(ctx.u, cc.u)):
        phi = X.phi[a]
        b = normalize(phi / u)
        if scaling and b.is_Rational:
            if b == 0:
                v_fwd.append(u)
                u_inv.append(vsym)
                continue
            cands = [i for i, r in enumerate(ratios) if r != 0]
            j = min(cands, key=lambda i: (not (b / ratios[i]).is_Integer, abs(b / ratios[i]), i))
            e = b / ratios[j]
            v_fwd.append(u * x[j] ** (-e))
            u_inv.append(vsym * x_inv[j] ** e)
            continue
        # phi linear in u: du/ds = c u + d along the characteristics
        poly = sp.Poly(sp.expand(sp.fraction(sp.together(phi))[0]), u)
        den = sp.fraction(sp.together(phi))[1]
        if den.has(u) or poly.degree() > 1 or phi.has(*[w for w in ctx.u if w != u]):
            raise ChartError(f"u-component {to_text(phi)} is not linear in {u}")
        c = normalize(phi.diff(u))
        d = normalize(phi - c * u)
        c_s = normalize(c.xreplace(to_chart))
        d_s = normalize(d.xreplace(to_chart))
        C = _integrate(c_s, s_sym) if c_s != 0 else sp.Integer(0)
        growth = normalize(sp.exp(C))
        shift = _integrate(normalize(d_s / growth), s_sym) if d_s != 0 else sp.Integer(0)
        u_inv.append(normalize(growth * (vsym + shift)))
        fwd_sub = dict(zip(cc.x, (s_fwd,) + z_fwd))
        v_fwd.append(normalize((u / growth - shift).xreplace(fwd_sub)))
    chart = CanonicalChart(ctx, cc, (s_fwd,) + tuple(z_fwd) + tuple(v_fwd), tuple(x_inv) + tuple(u_inv))
    rep = verify_chart(X, chart)
    if not rep.passed:
        raise ChartError(f"derived chart failed verification: {rep}")
    return chart


# ---------------------------------------------------------------------------
# verification


@dataclass
class ChartReport:
    s_ok: bool
    z_ok: bool
    v_ok: bool
    inverse_ok: bool
    invertible: bool
    residuals: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.s_ok and self.z_ok and self.v_ok and self.inverse_ok and self.invertible

    def __bool__(self) -> bool:
        return self.passed


def _points(chart: CanonicalChart, count: int = 8, seed: int = 7):
    rng = random.Random(seed)
    yield tuple(sp.Rational(b) for b in chart.base_point)
    for _ in range(count):
        yield tuple(sp.Rational(b) + sp.Rational(rng.randint(-20, 20), 97) for b in chart.base_point)


def verify_chart(X: LiePointField, chart: CanonicalChart) -> ChartReport:
    ctx, cc = chart.ctx, chart.chart_ctx
    res = {}
    Xs = normalize(X(chart.forward[0]) - 1)
    s_ok = zero_test(Xs).value is True
    if not s_ok:
        res["Xs-1"] = Xs
    z_ok = True
    for k, e in enumerate(chart.forward[1 : ctx.p]):
        r = X(e)
        if zero_test(r).value is not True:
            z_ok = False
            res[f"X{cc.independents[k + 1]}"] = r
    v_ok = True
    for a, e in enumerate(chart.forward[ctx.p :]):
        r = X(e)
        if zero_test(r).value is not True:
            v_ok = False
            res[f"X{cc.dependents[a]}"] = r

    J = sp.Matrix(ctx.p, cc.p, lambda i, j: sp.diff(chart.inverse[i], cc.x[j]))
    det = normalize(J.det())
    invertible = True
    inverse_ok = True
    orig = ctx.x + ctx.u
    for pt in _points(chart):
        sub = dict(zip(orig, pt))
        y = [e.xreplace(sub) for e in chart.forward]
        ysub = dict(zip(cc.x + cc.u, y))
        back = [sp.N(e.xreplace(ysub), 40) for e in chart.inverse]
        err = max(abs(b - p_) for b, p_ in zip(back, pt))
        if not err.is_finite or err > sp.Float("1e-25"):
            inverse_ok = False
            res.setdefault("inverse", []).append((pt, err))
        dv = sp.N(det.xreplace(ysub), 30)
        if not dv.is_finite or abs(dv) < sp.Float("1e-20"):
            invertible = False
    return ChartReport(s_ok, z_ok, v_ok, inverse_ok, invertible, res)


# ---------------------------------------------------------------------------
# change of variables


def change_variables(
    e: sp.Basic,
    src: Context,
    dst: Context,
    indep_map: Sequence[sp.Expr],
    dep_map: Sequence[sp.Expr],
) -> sp.Expr:
    """Rewrite ``e`` (in src jets) in dst jets.

    ``indep_map`` gives the src independents as functions of the dst
    independents and ``dep_map`` the src dependents as functions of dst
    independents and dependents.
    """
    A = sp.Matrix(src.p, dst.p, lambda j, i: sp.diff(indep_map[j], dst.x[i])).T
    A = A.applyfunc(normalize)
    det = normalize(A.det())
    if det == 0:
        raise ChartError("coordinate change is not invertible")
    Ainv = (A.adjugate() / det).applyfunc(normalize)

    cache = {}

    def jet_expr(jv):
        if jv in cache:
            return cache[jv]
        if jv.order == 0:
            out = dep_map[src.dependents.index(jv.dependent)]
        else:
            i = next(i for i in range(src.p) if jv.index[i])
            prev = jet_expr(jv.shifted(i, -1))
            out = sum(Ainv[i, j] * total_derivative(prev, dst.independents[j], dst) for j in range(dst.p) if Ainv[i, j] != 0)
        cache[jv] = normalize(out)
        return cache[jv]

    e = sp.sympify(e)
    reps = dict(zip(src.x, indep_map))
    for j in src.jets_in(e):
        reps[j] = jet_expr(src.jet_info(j))
    return normalize(e.xreplace(reps))


def clear_factor(e: sp.Basic, ctx: Context) -> tuple[sp.Expr, sp.Expr]:
    """Split ``e = factor * rest`` with factor free of jets, rest's
    jet-monomial coefficients having trivial gcd and no denominator."""
    e = normalize(e)
    if e == 0:
        return sp.Integer(0), sp.Integer(1)
    num, den = sp.fraction(sp.together(e))
    if ctx.jets_in(den):
        return e, sp.Integer(1)
    num = sp.expand(num)
    jets = sorted(ctx.jets_in(num), key=str)
    if jets:
        coeffs = sp.Poly(num, *jets).coeffs()
    else:
        coeffs = [num]
    g = sp.gcd_list(coeffs) if len(coeffs) > 1 else coeffs[0]
    if g == 0:
        g = sp.Integer(1)
    factor = normalize(g / den)
    return normalize(num / g), factor


@dataclass(frozen=True)
class Transformed:
    expr: sp.Expr  # factor-cleared form
    factor: sp.Expr  # raw = factor * expr
    raw: sp.Expr


def transform_equation(delta: sp.Basic, chart: CanonicalChart, clear: bool = True) -> Transformed:
    """Express ``delta`` in the chart coordinates (s, z, v)."""
    ctx, cc = chart.ctx, chart.chart_ctx
    raw = change_variables(delta, ctx, cc, chart.inverse[: ctx.p], chart.inverse[ctx.p :])
    if not clear:
        return Transformed(raw, sp.Integer(1), raw)
    rest, factor = clear_factor(raw, cc)
    return Transformed(rest, factor, raw)


def inverse_transform(delta_tilde: sp.Basic, chart: CanonicalChart, clear: bool = False) -> Transformed:
    """Express a chart-space expression back in the original coordinates."""
    ctx, cc = chart.ctx, chart.chart_ctx
    raw = change_variables(delta_tilde, cc, ctx, chart.forward[: ctx.p], chart.forward[ctx.p :])
    if not clear:
        return Transformed(raw, sp.Integer(1), raw)
    rest, factor = clear_factor(raw, ctx)
    return Transformed(rest, factor, raw)
