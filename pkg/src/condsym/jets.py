"""Derivative bookkeeping on jet space: total derivatives, rankings, solving
for a leading derivative and prolonging a differential constraint."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Sequence

import sympy as sp

from .expr import Context, JetVariable, _poly_build, _poly_dict, normalize, zero_test

__all__ = [
    "DerivativeRanking",
    "leading_jet",
    "multi_indices",
    "prolong_constraint",
    "solve_for",
    "total_derivative",
    "total_derivative_multi",
]


def total_derivative(e: sp.Basic, xi: sp.Symbol | str, ctx: Context) -> sp.Expr:
    """D_i e = de/dx_i + sum over jets u_J in e of u_{J+e_i} de/du_J."""
    name = xi if isinstance(xi, str) else xi.name
    if name not in ctx.independents:
        raise ValueError(f"{name!r} is not an independent variable")
    i = ctx.independents.index(name)
    e = sp.sympify(e)
    d = _poly_dict(e)
    if d is not None:
        return _poly_build(_poly_total_derivative(d, i, ctx))
    out = sp.diff(e, ctx.x[i])
    for j in ctx.jets_in(e):
        out += ctx.jet(ctx.jet_info(j).shifted(i)) * sp.diff(e, j)
    return normalize(out)


def _poly_total_derivative(d: dict, i: int, ctx: Context) -> dict:
    # termwise product rule on a monomial dict; far cheaper than sp.diff
    xi = ctx.x[i]
    out: dict = {}
    for mono, c in d.items():
        for sym, k in mono:
            if sym == xi:
                new = None
            else:
                jv = ctx.jet_info(sym)
                if jv is None:
                    continue
                new = ctx.jet(jv.shifted(i))
            powers = dict(mono)
            if k == 1:
                del powers[sym]
            else:
                powers[sym] = k - 1
            if new is not None:
                powers[new] = powers.get(new, 0) + 1
            m = frozenset(powers.items())
            out[m] = out[m] + c * k if m in out else c * k
    return out


def total_derivative_multi(e: sp.Basic, index: Sequence[int], ctx: Context) -> sp.Expr:
    e = sp.sympify(e)
    d = _poly_dict(e)
    if d is not None:
        for i, k in enumerate(index):
            for _ in range(k):
                d = _poly_total_derivative(d, i, ctx)
        return _poly_build(d)
    for i, k in enumerate(index):
        for _ in range(k):
            e = total_derivative(e, ctx.independents[i], ctx)
    return normalize(e)


def multi_indices(p: int, order: int):
    """All multi-indices of length p with |J| == order."""
    for combo in combinations_with_replacement(range(p), order):
        idx = [0] * p
        for c in combo:
            idx[c] += 1
        yield tuple(idx)


@dataclass(frozen=True)
class DerivativeRanking:
    """Graded ranking on jet variables.

    Jets compare by total order, then lexicographically by their counts
    along ``priority`` (most significant first), then by dependent index.
    """

    ctx: Context
    priority: tuple[str, ...] | None = None

    def __post_init__(self):
        prio = self.priority
        if prio is None:
            prio = self.ctx.independents
            if self.ctx.chart:
                # s lowest so z-derivatives are eliminated before s-derivatives
                prio = prio[1:] + prio[:1]
        if sorted(prio) != sorted(self.ctx.independents):
            raise ValueError("priority must be a permutation of the independents")
        object.__setattr__(self, "priority", tuple(prio))

    def key(self, jv: JetVariable):
        order = [self.ctx.independents.index(n) for n in self.priority]
        dep = self.ctx.dependents.index(jv.dependent)
        return (jv.order, tuple(jv.index[i] for i in order), -dep)

    def sort(self, jets, reverse=False):
        return sorted(jets, key=lambda j: self.key(self.ctx.jet_info(j)), reverse=reverse)


def leading_jet(e: sp.Basic, ranking: DerivativeRanking) -> sp.Symbol:
    jets = ranking.ctx.jets_in(sp.sympify(e))
    if not jets:
        raise ValueError("expression contains no jet variable")
    return ranking.sort(jets)[-1]


def solve_for(e: sp.Basic, j: sp.Symbol) -> sp.Expr:
    """Solve e = 0 for the jet j, which must occur linearly."""
    e = normalize(e)
    num, _ = sp.fraction(sp.together(e))
    num = sp.expand(num)
    if not num.has(j):
        raise ValueError(f"{j} does not occur")
    poly = sp.Poly(num, j)
    if poly.degree() != 1:
        raise ValueError(f"{j} occurs with degree {poly.degree()}")
    a, b = poly.all_coeffs()
    if zero_test(a).value is not False:
        raise ValueError(f"coefficient of {j} is not provably nonzero")
    return normalize(-b / a)


def prolong_constraint(Q: sp.Basic, order: int, ctx: Context, ranking: DerivativeRanking | None = None):
    """All total derivatives D_J Q with |J| <= order, graded by |J|."""
    if order < 0:
        raise ValueError("order must be >= 0")
    ranking = ranking or DerivativeRanking(ctx)
    perm = [ctx.independents.index(n) for n in ranking.priority]
    out = []
    cache = {(0,) * ctx.p: normalize(Q)}
    for k in range(order + 1):
        level = []
        for idx in multi_indices(ctx.p, k):
            if idx not in cache:
                i = next(i for i in range(ctx.p) if idx[i])
                prev = list(idx)
                prev[i] -= 1
                cache[idx] = total_derivative(cache[tuple(prev)], ctx.independents[i], ctx)
            level.append(idx)
        level.sort(key=lambda idx: tuple(idx[i] for i in perm))
        out.extend(cache[idx] for idx in level)
    return out
