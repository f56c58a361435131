"""Factored form in chart coordinates, reduced equations for invariant
solutions, lifting of invariant solutions and solution verification."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import sympy as sp

from .charts import CanonicalChart, clear_factor
from .expr import Context, JetVariable, _poly_expand, normalize, to_text, zero_test
from .jets import DerivativeRanking

__all__ = [
    "FactoredForm",
    "NonSeparable",
    "ReducedSystem",
    "extract_factored_form",
    "lift_invariant_solution",
    "reduced_system",
    "split_s_jets",
    "verify_reduced_solution",
    "verify_solution",
    "wronskian_check",
]


class NonSeparable(ValueError):
    """The s-dependence of the remainder does not split over a finite basis."""


def _s_jets(cc: Context, e) -> set:
    return {j for j in cc.jets_in(e) if cc.jet_info(j).index[0] > 0}


def split_s_jets(e: sp.Basic, cc: Context):
    """Split e into (s-jet-free remainder, {v_s-jet: coefficient})."""
    e = normalize(e)
    num, den = sp.fraction(sp.together(e))
    ranking = DerivativeRanking(cc)
    theta: dict = {}
    rest = sp.Integer(0)
    for term in sp.Add.make_args(sp.expand(num)):
        sj = _s_jets(cc, term)
        if not sj:
            rest += term
            continue
        lead = ranking.sort(sj)[0]
        theta[lead] = theta.get(lead, 0) + term / lead
    return normalize(rest / den), {j: normalize(c / den) for j, c in theta.items()}


@dataclass
class FactoredForm:
    """Delta~ = sum R_r K_r + sum Theta_l v_s^(l)."""

    ctx: Context
    expr: sp.Expr
    k_parts: list  # [(R_r, K_r)]
    theta_parts: list  # [(Theta_l, jet)]
    wronskian: dict = field(default_factory=dict)

    @property
    def s(self) -> sp.Symbol:
        return self.ctx.x[0]

    def recombine(self) -> sp.Expr:
        out = sum((R * K for R, K in self.k_parts), sp.Integer(0))
        out += sum((T * j for T, j in self.theta_parts), sp.Integer(0))
        return normalize(out)

    def check(self) -> bool:
        """All type invariants: recombination, s-free K_r, s-order of theta jets."""
        if zero_test(self.recombine() - self.expr).value is not True:
            return False
        for _, K in self.k_parts:
            if self.s in K.free_symbols or _s_jets(self.ctx, K):
                return False
        return all(self.ctx.jet_info(j).index[0] >= 1 for _, j in self.theta_parts)

    @property
    def R(self) -> list:
        return [R for R, _ in self.k_parts]

    @property
    def K(self) -> list:
        return [K for _, K in self.k_parts]

    def __str__(self) -> str:
        lines = [f"R{r + 1} = {to_text(R)} ; K{r + 1} = {to_text(K)}" for r, (R, K) in enumerate(self.k_parts)]
        lines += [f"Theta[{j}] = {to_text(T)}" for T, j in self.theta_parts]
        return "\n".join(lines)


def _s_degree_key(f: sp.Expr, s: sp.Symbol):
    """Order basis functions: polynomials in s by degree, then the rest."""
    if f.is_polynomial(s):
        return (0, sp.degree(f, s), sp.default_sort_key(f))
    return (1, sp.count_ops(f), sp.default_sort_key(f))


def _separate(term: sp.Expr, s: sp.Symbol, block: set) -> tuple[sp.Expr, sp.Expr]:
    """term = coeff(base symbols except s) * f(s)."""
    indep, dep = term.as_independent(s, as_Add=False)
    if dep.free_symbols & block:
        raise NonSeparable(f"non-separable s-dependence in {to_text(term)}")
    c, f = dep.as_coeff_Mul()
    return normalize(indep * c), f


def extract_factored_form(
    delta_tilde: sp.Basic,
    cc: Context | CanonicalChart,
    base_point: Sequence | None = None,
) -> FactoredForm:
    """Factored form of a chart-space expression.

    The remainder (no s-derivatives) is collected by jet monomials; the
    s-dependence of the coefficients is split over a basis of functions of
    s, and the basis is shrunk to a column basis of the coefficient matrix so
    that the number of kParts is minimal.
    """
    s0z0 = None
    if isinstance(cc, CanonicalChart):
        chart = cc
        cc = chart.chart_ctx
        sub = dict(zip(chart.ctx.x + chart.ctx.u, chart.base_point))
        s0z0 = tuple(e.xreplace(sub) for e in chart.forward[: cc.p])
    if base_point is not None:
        s0z0 = tuple(sp.Rational(b) for b in base_point)
    e = normalize(delta_tilde)
    s = cc.x[0]
    rest, theta = split_s_jets(e, cc)
    ranking = DerivativeRanking(cc)
    theta_parts = [(theta[j], j) for j in ranking.sort(theta)]

    num, den = sp.fraction(sp.together(rest))
    num = sp.expand(num)
    jets = sorted(cc.jets_in(num), key=str)
    monos = sp.Poly(num, *jets).terms() if jets else [((), num)]
    block = set(cc.x[1:]) | set(cc.u) | set(cc.params) | cc.jets_in(e)
    den_c, den_f = _separate(normalize(den), s, block) if s in den.free_symbols else (den, sp.Integer(1))

    columns: dict = {}  # f(s) -> {monomial: coeff}
    for powers, coeff in monos:
        mono = sp.Mul(*[j**k for j, k in zip(jets, powers)])
        for term in sp.Add.make_args(sp.expand(coeff)):
            c, f = _separate(term, s, block)
            f = normalize(f / den_f)
            col = columns.setdefault(f, {})
            col[mono] = col.get(mono, 0) + c / den_c
    basis = sorted(columns, key=lambda f: _s_degree_key(f, s))
    basis = [f for f in basis if any(normalize(c) != 0 for c in columns[f].values())]
    if not basis and rest != 0:
        raise NonSeparable("empty basis for a nonzero remainder")
    mono_list = sorted({m for f in basis for m in columns[f]}, key=sp.default_sort_key)
    k_parts = []
    if basis:
        M = sp.Matrix(len(mono_list), len(basis), lambda i, j: normalize(columns[basis[j]].get(mono_list[i], 0)))
        rref, pivots = M.rref(simplify=normalize)
        mono_vec = sp.Matrix([mono_list])
        for row, pc in enumerate(pivots):
            R = basis[pc]
            for j in range(len(basis)):
                if j not in pivots and rref[row, j] != 0:
                    R += rref[row, j] * basis[j]
            K = normalize((mono_vec * M[:, pc])[0, 0])
            k_parts.append((normalize(R), K))
    ff = FactoredForm(cc, e, k_parts, theta_parts)
    ff.wronskian = wronskian_check([R for R, _ in k_parts], cc, s0z0)
    return ff


def wronskian_check(Rs: Sequence[sp.Expr], cc: Context, point=None, samples: int = 8, seed: int = 11) -> dict:
    """Generalized Wronskian of the R_r in s at a point and at random points."""
    s = cc.x[0]
    n = len(Rs)
    if n == 0:
        return {"independent": True, "at_base": None, "samples": []}
    W = sp.Matrix(n, n, lambda i, j: sp.diff(Rs[j], s, i)).det()
    syms = [x for x in cc.x] + list(cc.params)
    rng = random.Random(seed)

    def value(pt):
        sub = dict(zip(syms, pt))
        v = W.xreplace(sub)
        if cc.jets_in(v) or set(cc.u) & v.free_symbols:
            v = v.xreplace({j: sp.Rational(rng.randint(1, 9), 7) for j in cc.jets_in(v) | set(cc.u)})
        return sp.N(v, 30)

    base = None
    if point is not None:
        pt = list(point) + [sp.Rational(rng.randint(1, 9), 5) for _ in range(len(syms) - len(point))]
        base = value(pt)
    vals = [value([sp.Rational(rng.randint(1, 60), 13) for _ in syms]) for _ in range(samples)]
    nz = [v for v in vals + ([base] if base is not None else []) if v.is_finite and abs(v) > 1e-20]
    return {
        "independent": bool(nz),
        "at_base": None if base is None else bool(base.is_finite and abs(base) > 1e-20),
        "samples": [bool(v.is_finite and abs(v) > 1e-20) for v in vals],
    }


@dataclass
class ReducedSystem:
    ctx: Context  # independents z.., dependents w..
    equations: list
    factors: list

    def lines(self) -> list[str]:
        return [f"K{r + 1}: {to_text(e)}" for r, e in enumerate(self.equations)]

    def __str__(self) -> str:
        return "\n".join(self.lines())


def reduced_context(cc: Context) -> Context:
    deps = tuple("w" + d[1:] if d.startswith("v") else "w" + d for d in cc.dependents)
    return Context(cc.independents[1:], deps, cc.parameters, chart=True)


def _to_reduced(e: sp.Expr, cc: Context, rc: Context) -> sp.Expr:
    reps = {}
    for j in cc.jets_in(e):
        jv = cc.jet_info(j)
        if jv.index[0]:
            reps[j] = sp.Integer(0)
        else:
            dep = rc.dependents[cc.dependents.index(jv.dependent)]
            reps[j] = rc.jet(JetVariable(dep, jv.index[1:]))
    return normalize(e.xreplace(reps).xreplace(dict(zip(cc.x[1:], rc.x))))


def reduced_system(f: FactoredForm, clear: bool = True) -> ReducedSystem:
    """The K_r with v = w(z); overall nonzero factors cleared and recorded."""
    cc = f.ctx
    rc = reduced_context(cc)
    eqs, factors = [], []
    for _, K in f.k_parts:
        r = _to_reduced(K, cc, rc)
        if clear:
            r, fac = clear_factor(r, rc)
        else:
            fac = sp.Integer(1)
        eqs.append(r)
        factors.append(fac)
    return ReducedSystem(rc, eqs, factors)


def _jet_values(u: Mapping[str, sp.Expr], ctx: Context, jets) -> dict:
    out = {}
    for j in jets:
        jv = ctx.jet_info(j)
        val = u[jv.dependent]
        for x, k in zip(ctx.x, jv.index):
            if k:
                val = sp.diff(val, x, k)
        out[j] = val
    return out


def _as_mapping(u, ctx: Context) -> dict:
    if isinstance(u, Mapping):
        return {str(k): sp.sympify(v) for k, v in u.items()}
    if ctx.q != 1:
        raise ValueError("a system needs one expression per dependent variable")
    return {ctx.dependents[0]: sp.sympify(u)}


def verify_solution(delta, u, ctx: Context, residual: bool = False):
    """Replace all jets of delta by derivatives of u and test for zero."""
    umap = _as_mapping(u, ctx)
    for v in umap.values():
        if ctx.jets_in(v) or set(ctx.u) & v.free_symbols:
            raise ValueError("a candidate solution must not contain dependents or jets")
    eqs = [delta] if isinstance(delta, sp.Basic) else list(delta)
    res = []
    for d in eqs:
        d = sp.sympify(d)
        reps = _jet_values(umap, ctx, ctx.jets_in(d))
        reps.update({sym: umap[name] for name, sym in zip(ctx.dependents, ctx.u)})
        res.append(_residual(d.xreplace(reps)))
    if residual:
        out = [r for r, _ in res]
        return out[0] if isinstance(delta, sp.Basic) else out
    return all(z if z is not None else zero_test(r).value is True for r, z in res)


def _residual(r: sp.Expr) -> tuple[sp.Expr, bool | None]:
    # over a common denominator the residual vanishes iff the expanded
    # numerator does; this skips the gcd work of a full normal form
    num, den = sp.fraction(sp.together(r))
    p = _poly_expand(num)
    if p is None or den.has(sp.Function):
        return normalize(r), None
    if p == 0:
        return sp.Integer(0), True
    return (p if den == 1 else p / den), False


def verify_reduced_solution(system: FactoredForm | ReducedSystem, w, residual: bool = False):
    if isinstance(system, FactoredForm):
        system = reduced_system(system)
    return verify_solution(system.equations, w, system.ctx, residual=residual)


def lift_invariant_solution(chart: CanonicalChart, w) -> sp.Expr | tuple:
    """u(x) from an invariant solution v = w(z) through the inverse map."""
    ctx, cc = chart.ctx, chart.chart_ctx
    rc = reduced_context(cc)
    wmap = _as_mapping(w, rc)
    zsub = dict(zip(rc.x, cc.x[1:]))
    vsub = {v: wmap[rc.dependents[a]].xreplace(zsub) for a, v in enumerate(cc.u)}
    fwd = dict(zip(cc.x, chart.forward[: ctx.p]))
    out = []
    for e in chart.inverse[ctx.p :]:
        e = e.xreplace(vsub).xreplace(fwd)
        out.append(normalize(e))
    return out[0] if ctx.q == 1 else tuple(out)
