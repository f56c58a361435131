"""Verdict engine: invariance, exact symmetry, true and weak conditional
symmetry, partial symmetry and symmetry of augmented systems.

Two independent decision paths are available wherever it makes sense:

* substitution: the equations are brought to a triangular solved form
  (jet -> expression) and the target is reduced to zero or not;
* multiplier matching: the target is written as ``sum G_i E_i`` with
  multipliers polynomial in the jets, found by exact linear algebra.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Sequence

import sympy as sp
from sympy.polys.matrices import DomainMatrix

from .charts import CanonicalChart, transform_equation
from .expr import Context, _poly_build, _poly_dict, normalize, to_text, zero_test
from .fields import LiePointField, apply, characteristic, prolong
from .jets import DerivativeRanking, prolong_constraint
from .reduction import _s_jets, split_s_jets, verify_solution

__all__ = [
    "ClassificationReport",
    "Undecided",
    "Variety",
    "check_augmented_symmetry",
    "check_exact_symmetry",
    "check_invariance",
    "check_partial_symmetry",
    "check_true_cs",
    "classify",
    "classify_weak_cs",
    "iterate_field",
    "match_multipliers",
]

DEFAULT_SIGMA_MAX = 5
DEFAULT_MULTIPLIER_DEGREE = 2


class Undecided(ArithmeticError):
    """A zero test along the way could not be decided."""


def _zero(e) -> bool:
    res = zero_test(e)
    if res.value is None:
        raise Undecided(f"undecided zero test for {to_text(e)}")
    return res.value


# ---------------------------------------------------------------------------
# solved forms


def _split_linear(d: dict, j: sp.Symbol):
    """(a, b) with poly = a*j + b when the monomial dict is linear in j."""
    a, b = {}, {}
    for mono, c in d.items():
        k = next((k for s, k in mono if s == j), 0)
        if k > 1:
            return None
        if k == 1:
            a[frozenset((s, n) for s, n in mono if s != j)] = c
        else:
            b[mono] = c
    if not a:
        return None
    return _poly_build(a), _poly_build(b)


class Variety:
    """Triangular solved form of a list of jet-space equations."""

    def __init__(self, ctx: Context, ranking: DerivativeRanking | None = None):
        self.ctx = ctx
        self.ranking = ranking or DerivativeRanking(ctx)
        self.solution: dict[sp.Symbol, sp.Expr] = {}
        self.pending: list[sp.Expr] = []
        self.dependent = 0

    def reduce(self, e: sp.Basic) -> sp.Expr:
        # solutions are kept unsubstituted; older ones may mention jets solved
        # later, so substitute until no solved jet is left
        e = sp.sympify(e)
        for _ in range(len(self.solution) + 1):
            hit = e.free_symbols & self.solution.keys()
            if not hit:
                break
            e = e.xreplace({k: self.solution[k] for k in hit})
        return normalize(e)

    def add(self, e: sp.Basic) -> bool:
        """Add an equation; False if it could not be solved for any jet."""
        r = self.reduce(e)
        if _zero(r):
            self.dependent += 1
            return True
        d = _poly_dict(r)
        num = r if d is not None else sp.expand(sp.fraction(sp.together(r))[0])
        for j in self.ranking.sort(self.ctx.jets_in(num), reverse=True):
            if d is not None:
                split = _split_linear(d, j)
                if split is None:
                    continue
                a, b = split
            else:
                poly = sp.Poly(num, j)
                if poly.degree() != 1:
                    continue
                a, b = poly.all_coeffs()
            if zero_test(a).value is not False:
                continue
            expr = normalize(-b / a)
            self.solution[j] = expr
            return True
        self.pending.append(r)
        return False

    def vanishes(self, target: sp.Basic) -> tuple[bool | None, sp.Expr]:
        """Whether target vanishes on the variety (None: cannot decide)."""
        r = self.reduce(target)
        if _zero(r):
            return True, r
        if self.pending:
            return None, r
        return False, r


def _q_ranking(X: LiePointField) -> tuple[DerivativeRanking, int]:
    """Ranking eliminating derivatives along the simplest nonzero xi."""
    ctx = X.ctx
    cands = [i for i, c in enumerate(X.xi) if c != 0]
    if not cands:
        raise ValueError("the invariant-surface condition needs a nonzero xi")
    i0 = min(cands, key=lambda i: (not X.xi[i].is_Number, sp.count_ops(X.xi[i]), i))
    prio = (ctx.independents[i0],) + tuple(n for k, n in enumerate(ctx.independents) if k != i0)
    return DerivativeRanking(ctx, prio), i0


def _q_variety(X: LiePointField, order: int) -> Variety:
    ranking, _ = _q_ranking(X)
    var = Variety(X.ctx, ranking)
    for Q in characteristic(X):
        for e in prolong_constraint(Q, order, X.ctx, ranking):
            var.add(e)
    return var


# ---------------------------------------------------------------------------
# multiplier matching


def _monomials(jets, degree):
    jets = sorted(jets, key=str)
    out = [sp.Integer(1)]
    for d in range(1, degree + 1):
        for combo in combinations_with_replacement(jets, d):
            out.append(sp.Mul(*combo))
    return out


def match_multipliers(
    target: sp.Basic,
    equations: Sequence[sp.Basic],
    ctx: Context,
    degree: int = DEFAULT_MULTIPLIER_DEGREE,
) -> list[sp.Expr] | None:
    """Find G_i, polynomial in jets of degree <= ``degree`` with coefficients
    rational in the base symbols, such that target = sum G_i E_i.

    Degrees are tried in increasing order.  Returns None when no multiplier
    of the given shape exists (which does not prove that none exists).
    """
    target = normalize(target)
    eqs = [normalize(e) for e in equations]
    base = ctx.base
    kernels = [f for e in eqs + [target] for f in e.atoms(sp.Function)]
    if kernels:
        return None
    fracs = [sp.fraction(sp.together(e)) for e in [target] + eqs]
    if any(ctx.jets_in(d) for _, d in fracs):
        return None
    jets = set()
    for n, _ in fracs:
        jets |= ctx.jets_in(n)
    L = sp.lcm_list([d for _, d in fracs]) if len(fracs) > 1 else fracs[0][1]
    Tn = sp.expand(fracs[0][0] * sp.cancel(L / fracs[0][1]))
    En = [sp.expand(n * sp.cancel(L / d)) for n, d in fracs[1:]]
    K = sp.QQ.frac_field(*base) if base else sp.QQ
    jet_list = sorted(jets, key=str)
    for deg in range(degree + 1):
        monos = _monomials(jets, deg)
        unknowns = [sp.Dummy(f"c{i}_{k}") for i in range(len(eqs)) for k in range(len(monos))]
        combo = sp.Integer(0)
        it = iter(unknowns)
        for E in En:
            for m in monos:
                combo += next(it) * m * E
        expr = sp.expand(Tn - combo)
        if jet_list:
            poly = sp.Poly(expr, *jet_list)
            rows = poly.coeffs()
        else:
            rows = [expr]
        A, b = sp.linear_eq_to_matrix(rows, unknowns)
        try:
            dA = DomainMatrix.from_Matrix(A).convert_to(K)
            db = DomainMatrix.from_Matrix(b).convert_to(K)
        except Exception:
            return None
        aug = dA.hstack(db)
        rref, pivots = aug.rref()
        n = len(unknowns)
        if n in pivots:
            continue
        sol = [sp.Integer(0)] * n
        rr = rref.to_Matrix()
        for row, col in enumerate(pivots):
            sol[col] = rr[row, n]
        # T*L = sum g_i (E_i*L), so the g_i are the multipliers themselves
        vals = iter(sol)
        out = [normalize(sum(next(vals) * m for m in monos)) for _ in eqs]
        if normalize(target - sum(G * E for G, E in zip(out, eqs))) == 0:
            return out
    return None


# ---------------------------------------------------------------------------
# reports


@dataclass
class ClassificationReport:
    verdict: str  # invariant | exact | trueCS | weakCS | partial | noneUpTo | notExact | undetermined | unknown
    sigma: int | None = None
    sigma_max: int = DEFAULT_SIGMA_MAX
    path: str = ""
    witnesses: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    timing: float = 0.0

    @property
    def holds(self) -> bool:
        return self.verdict in ("invariant", "exact", "trueCS", "weakCS", "partial")

    def __bool__(self) -> bool:
        return self.holds

    def as_dict(self) -> dict:
        def conv(v):
            if isinstance(v, sp.Basic):
                return to_text(v)
            if isinstance(v, dict):
                return {str(k): conv(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            return v

        return {
            "verdict": self.verdict,
            "sigma": self.sigma,
            "sigma_max": self.sigma_max,
            "path": self.path,
            "witnesses": conv(self.witnesses),
            "notes": list(self.notes),
            "timing": round(self.timing, 4),
        }

    def label(self) -> str:
        if self.verdict == "weakCS":
            return f"weakCS({self.sigma})"
        if self.verdict == "noneUpTo":
            return f"noneUpTo({self.sigma_max})"
        if self.verdict == "partial":
            return f"partial({self.sigma})"
        return self.verdict


def _as_list(deltas) -> list[sp.Expr]:
    if isinstance(deltas, sp.Basic):
        return [normalize(deltas)]
    return [normalize(d) for d in deltas]


def _order(X, eqs) -> int:
    return max(1, max(X.ctx.jet_order(e) for e in eqs))


# ---------------------------------------------------------------------------
# checks


def check_invariance(X: LiePointField, deltas) -> ClassificationReport:
    """X*(Delta_a) == 0 identically."""
    t0 = time.perf_counter()
    eqs = _as_list(deltas)
    Xp = prolong(X, _order(X, eqs))
    residuals = [apply(Xp, d) for d in eqs]
    try:
        ok = all(_zero(r) for r in residuals)
    except Undecided as exc:
        return ClassificationReport("unknown", notes=[str(exc)], timing=time.perf_counter() - t0)
    rep = ClassificationReport("invariant" if ok else "notInvariant", sigma=1 if ok else None, path="normal-form")
    rep.witnesses["residuals"] = residuals
    rep.timing = time.perf_counter() - t0
    return rep


def check_exact_symmetry(X: LiePointField, deltas, path: str | None = None, degree: int = DEFAULT_MULTIPLIER_DEGREE) -> ClassificationReport:
    """X*(Delta)|_{Delta=0} = 0, i.e. X*(Delta_a) = G_ab Delta_b.

    Path A: substitution on the solved form of the system; decisive when
    every equation could be solved for a jet.  Path B: multiplier matching,
    where a failed bounded ansatz gives "undetermined".  The witness G is
    the multiplier matrix, one row per equation.
    """
    t0 = time.perf_counter()
    eqs = _as_list(deltas)
    Xp = prolong(X, _order(X, eqs))
    images = [apply(Xp, d) for d in eqs]
    path = path or "substitution"
    rep = ClassificationReport("exact", sigma=1, path=path)
    rep.witnesses["X*(Delta)"] = images
    try:
        if path == "substitution":
            var = Variety(X.ctx)
            for d in eqs:
                var.add(d)
            if var.pending:
                path = rep.path = "matching"
            else:
                residuals = [var.vanishes(img)[1] for img in images]
                rep.witnesses["residuals"] = residuals
                if any(not _zero(r) for r in residuals):
                    rep.verdict, rep.sigma = "notExact", None
                else:
                    G = [match_multipliers(img, eqs, X.ctx, degree) for img in images]
                    if all(g is not None for g in G):
                        rep.witnesses["G"] = G
        if path == "matching":
            G = []
            for img in images:
                g = match_multipliers(img, eqs, X.ctx, degree)
                if g is None:
                    rep.verdict, rep.sigma = "undetermined", None
                    rep.notes.append(f"no multipliers of degree <= {degree} for {to_text(img)}; this does not disprove symmetry")
                    break
                G.append(g)
            else:
                rep.witnesses["G"] = G
    except Undecided as exc:
        rep.verdict, rep.sigma = "unknown", None
        rep.notes.append(str(exc))
    rep.timing = time.perf_counter() - t0
    return rep


def _single(deltas) -> sp.Expr:
    eqs = _as_list(deltas)
    if len(eqs) != 1:
        raise ValueError("conditional symmetries are defined for a single equation")
    return eqs[0]


def check_true_cs(
    X: LiePointField,
    delta,
    chart: CanonicalChart | None = None,
    prolong_order: int | None = None,
    degree: int = DEFAULT_MULTIPLIER_DEGREE,
) -> ClassificationReport:
    """X*(Delta) vanishes on {Delta = 0, Q = 0 and its consequences}."""
    t0 = time.perf_counter()
    delta = _single(delta)
    m = _order(X, [delta])
    order = m if prolong_order is None else prolong_order
    Xp = prolong(X, m)
    image = apply(Xp, delta)
    rep = ClassificationReport("trueCS", sigma=1, path="substitution")
    rep.witnesses["X*(Delta)"] = image
    try:
        var = _q_variety(X, order)
        solved = var.add(delta)
        if solved:
            ok, r = var.vanishes(image)
            rep.witnesses["residual"] = r
        else:
            rep.path = "matching"
            r_img = var.reduce(image)
            G = match_multipliers(r_img, var.pending, X.ctx, degree)
            ok = True if G is not None else None
            if G is not None:
                rep.witnesses["G"] = G
        if ok is None:
            rep.verdict, rep.sigma = "undetermined", None
            rep.notes.append("bounded multiplier ansatz failed; this does not disprove a CS")
        elif not ok:
            rep.verdict, rep.sigma = "notTrueCS", None
        if chart is not None:
            chart_rep = _true_cs_in_chart(delta, chart)
            rep.witnesses.update({f"chart.{k}": v for k, v in chart_rep.items()})
            if chart_rep["ok"] is not None and ok is not None and chart_rep["ok"] != ok:
                rep.notes.append("chart path disagrees with substitution path")
    except Undecided as exc:
        rep.verdict, rep.sigma = "unknown", None
        rep.notes.append(str(exc))
    rep.timing = time.perf_counter() - t0
    return rep


def _true_cs_in_chart(delta, chart: CanonicalChart) -> dict:
    """Chart form of the CS test: dDelta~/ds vanishes on {Delta~ = 0, v_s^(l) = 0}."""
    cc = chart.chart_ctx
    dt = transform_equation(delta, chart).expr
    ds = normalize(sp.diff(dt, chart.s))
    zero_s = {j: 0 for j in _s_jets(cc, dt) | _s_jets(cc, ds)}
    d0 = normalize(dt.xreplace(zero_s))
    t0 = normalize(ds.xreplace(zero_s))
    var = Variety(cc)
    var.add(d0)
    ok, r = var.vanishes(t0)
    out = {"ok": ok, "residual": r, "transformed": dt}
    if ok:
        G = normalize(t0 / d0) if d0 != 0 else sp.Integer(0)
        if not cc.jets_in(sp.fraction(sp.together(G))[1]):
            out["G"] = G
            _, H = split_s_jets(normalize(ds - G * dt), cc)
            out["H"] = H
    return out


def iterate_field(X: LiePointField, delta, count: int) -> list[sp.Expr]:
    """[Delta, X*Delta, X*(X*Delta), ...] with ``count`` applications."""
    delta = _single(delta)
    Xp = prolong(X, _order(X, [delta]))
    chain = [delta]
    for _ in range(count):
        chain.append(apply(Xp, chain[-1]))
    return chain


def _chain_order(X, chain, var: Variety, sigma_max: int):
    """Smallest k <= sigma_max such that chain[k] vanishes on chain[:k] (+var)."""
    for k in range(1, sigma_max + 1):
        var.add(chain[k - 1])
        ok, r = var.vanishes(chain[k])
        if ok is None:
            G = match_multipliers(var.reduce(chain[k]), var.pending, X.ctx)
            ok = G is not None
        if ok:
            return k
    return None


def classify_weak_cs(
    X: LiePointField,
    delta,
    sigma_max: int = DEFAULT_SIGMA_MAX,
    prolong_order: int | None = None,
) -> ClassificationReport:
    """Order of X as a (true or weak) conditional symmetry.

    sigma = 1 when X is a true CS.  Otherwise sigma is the order at which
    the iterated chain Delta, Delta^(1), ... closes, i.e. the smallest k with
    Delta^(k) vanishing on Delta = ... = Delta^(k-1) = 0.  The order obtained
    when the invariant-surface condition and its consequences are also used
    at every stage is reported as ``sigma_with_q``; it can be smaller.
    """
    if sigma_max < 1:
        raise ValueError("sigma_max must be >= 1")
    t0 = time.perf_counter()
    delta = _single(delta)
    m = _order(X, [delta])
    order = m if prolong_order is None else prolong_order
    rep = ClassificationReport("noneUpTo", sigma_max=sigma_max, path="iteration")
    try:
        true = check_true_cs(X, delta, prolong_order=order)
        if true.verdict == "trueCS":
            rep.verdict, rep.sigma = "weakCS", 1
            rep.witnesses["sigma_with_q"] = 1
            rep.notes.append("true conditional symmetry (sigma = 1)")
            rep.timing = time.perf_counter() - t0
            return rep
        chain = iterate_field(X, delta, sigma_max)
        rep.witnesses["iterated"] = chain[1:]
        sigma_q = _chain_order(X, chain, _q_variety(X, order), sigma_max)
        sigma_chain = _chain_order(X, chain, Variety(X.ctx), sigma_max)
        rep.witnesses["sigma_with_q"] = sigma_q
        rep.witnesses["sigma_chain"] = sigma_chain
        sigma = sigma_chain if sigma_chain is not None else sigma_q
        if sigma is not None:
            rep.verdict, rep.sigma = "weakCS", max(sigma, 2)
            rep.witnesses["iterated"] = chain[1 : rep.sigma]
            if sigma_q is not None and sigma_q < rep.sigma:
                rep.notes.append(
                    f"Delta^({sigma_q}) already vanishes on Delta^(<{sigma_q}) together with the "
                    f"invariant-surface condition and its consequences"
                )
    except Undecided as exc:
        rep.verdict = "unknown"
        rep.notes.append(str(exc))
    rep.timing = time.perf_counter() - t0
    return rep


@dataclass
class PartialSymmetryReport:
    order: int | None
    systems: list  # systems[k] = [Delta, ..., Delta^(k)]
    candidates: list = field(default_factory=list)  # (u, [residuals], ok)

    @property
    def system(self) -> list:
        if self.order is None:
            return self.systems[-1] if self.systems else []
        return self.systems[self.order - 1]


def check_partial_symmetry(
    X: LiePointField,
    delta,
    sigma_max: int = DEFAULT_SIGMA_MAX,
    candidates: Sequence[sp.Expr] = (),
    sigma: int | None = None,
) -> PartialSymmetryReport:
    """The augmented systems Delta = ... = Delta^(k-1) = 0 (no invariance
    condition) and the verification of candidate solution families."""
    delta = _single(delta)
    chain = iterate_field(X, delta, sigma_max)
    order = _chain_order(X, chain, Variety(X.ctx), sigma_max)
    systems = [chain[:k] for k in range(1, sigma_max + 1)]
    rep = PartialSymmetryReport(order, systems)
    use = sigma or order or sigma_max
    for u in candidates:
        residuals = [verify_solution(e, u, X.ctx, residual=True) for e in chain[:use]]
        rep.candidates.append((u, residuals, all(r == 0 for r in residuals)))
    return rep


def check_augmented_symmetry(
    X: LiePointField,
    delta,
    E: Sequence[sp.Basic],
    degree: int = DEFAULT_MULTIPLIER_DEGREE,
) -> ClassificationReport:
    """X*(Delta) = G Delta + H E and X*(E) = G_E Delta + H_E E."""
    t0 = time.perf_counter()
    if not E:
        raise ValueError("the supplementary system E must be nonempty")
    eqs = _as_list(delta)
    sup = [normalize(e) for e in E]
    order = max(X.ctx.jet_order(e) for e in eqs + sup)
    Xp = prolong(X, max(order, 1))
    try:
        ranking, _ = _q_ranking(X)
    except ValueError:
        ranking = DerivativeRanking(X.ctx)
    var = Variety(X.ctx, ranking)
    for e in sorted(sup, key=X.ctx.jet_order) + eqs:
        var.add(e)
    rep = ClassificationReport("exact", sigma=1, path="substitution")
    residuals = []
    try:
        for e in eqs + sup:
            img = apply(Xp, e)
            ok, r = var.vanishes(img)
            if ok is None:
                rep.path = "matching"
                G = match_multipliers(r, var.pending, X.ctx, degree)
                ok = G is not None
                if not ok:
                    rep.verdict = "undetermined"
            residuals.append(r)
            if ok is False:
                rep.verdict, rep.sigma = "notExact", None
    except Undecided as exc:
        rep.verdict, rep.sigma = "unknown", None
        rep.notes.append(str(exc))
    rep.witnesses["residuals"] = residuals
    rep.timing = time.perf_counter() - t0
    return rep


def classify(
    X: LiePointField,
    deltas,
    sigma_max: int = DEFAULT_SIGMA_MAX,
    prolong_order: int | None = None,
) -> ClassificationReport:
    """Strongest verdict of the lattice invariant > exact > trueCS > weakCS."""
    t0 = time.perf_counter()
    eqs = _as_list(deltas)
    inv = check_invariance(X, eqs)
    if inv.verdict in ("invariant", "unknown"):
        inv.timing = time.perf_counter() - t0
        return inv
    ex = check_exact_symmetry(X, eqs)
    if ex.verdict in ("exact", "unknown") or len(eqs) > 1:
        if len(eqs) > 1 and ex.verdict == "notExact":
            ex.notes.append("conditional symmetries are only classified for a single equation")
        ex.timing = time.perf_counter() - t0
        return ex
    if all(c == 0 for c in X.xi):
        rep = ClassificationReport("noneUpTo", sigma_max=sigma_max)
        rep.notes.append("xi = 0: no invariant-surface reduction available")
        return rep
    tcs = check_true_cs(X, eqs, prolong_order=prolong_order)
    if tcs.verdict in ("trueCS", "unknown", "undetermined"):
        tcs.timing = time.perf_counter() - t0
        return tcs
    weak = classify_weak_cs(X, eqs, sigma_max, prolong_order)
    weak.timing = time.perf_counter() - t0
    return weak
