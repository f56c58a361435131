"""Numeric check of the factorization lemma for y' = G(s, y) y.

Along one trajectory y(s) the adjoint fundamental matrix solves
S' = -S G, S(0) = I.  Then kappa = S y is constant and y = R kappa with
R = S^-1.  Integration uses scipy's embedded 4(5) Runge-Kutta pair.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from scipy.integrate import quad, solve_ivp

from .expr import Context, ParseError, parse

__all__ = [
    "FactorizationReport",
    "OdeFactorizationProblem",
    "SampledMatrix",
    "Trajectory",
    "fundamental_matrix",
    "integrate_system",
    "liouville_check",
    "parse_oracle_problem",
    "random_problem",
    "self_convergence",
    "verify_factorization",
]

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
ACCEPT = 1e-6


@dataclass
class OdeFactorizationProblem:
    n: int
    G: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    s_max: float
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    threshold: float = ACCEPT
    samples: int = 41
    exprs: list | None = None  # symbolic entries, when built from text
    adjoint_sign: float = -1.0  # +1 turns the adjoint equation into a negative control
    expect: str | None = None  # "pass" or "fail", for bundled fixtures

    def __post_init__(self):
        self.y0 = np.asarray(self.y0, dtype=float)
        if self.y0.shape != (self.n,):
            raise ValueError("y0 must have n entries")
        if self.s_max <= 0:
            raise ValueError("s_max must be positive")
        g0 = np.asarray(self.G(0.0, self.y0), dtype=float)
        if g0.shape != (self.n, self.n) or not np.all(np.isfinite(g0)):
            raise ValueError("G must be finite at (0, y0)")

    @classmethod
    def from_exprs(cls, entries: Sequence[Sequence[str | sp.Expr]], y0, s_max, **kw) -> "OdeFactorizationProblem":
        n = len(entries)
        ctx = Context(("s",), tuple(f"y{i + 1}" for i in range(n)))
        mat = []
        for row in entries:
            if len(row) != n:
                raise ValueError("G must be square")
            mat.append([parse(e, ctx) if isinstance(e, str) else sp.sympify(e) for e in row])
        s = ctx.x[0]
        f = sp.lambdify((s, *ctx.u), sp.Matrix(mat), "numpy")

        def G(t, y):
            return np.array(f(t, *y), dtype=float)

        return cls(n, G, y0, s_max, exprs=mat, **kw)

    def with_tolerances(self, factor: float) -> "OdeFactorizationProblem":
        return OdeFactorizationProblem(
            self.n, self.G, self.y0, self.s_max, self.rtol * factor, self.atol * factor,
            self.threshold, self.samples, self.exprs, self.adjoint_sign, self.expect,
        )


@dataclass
class Trajectory:
    s: np.ndarray
    y: np.ndarray  # shape (len(s), n)
    ok: bool
    message: str
    dense: Callable | None = None


@dataclass
class SampledMatrix:
    s: np.ndarray
    S: np.ndarray  # shape (len(s), n, n)
    ok: bool
    message: str


def _grid(p: OdeFactorizationProblem) -> np.ndarray:
    return np.linspace(0.0, p.s_max, p.samples)


def integrate_system(p: OdeFactorizationProblem) -> Trajectory:
    """y' = G(s, y) y on [0, s_max]; blow-up gives a partial trajectory."""

    def rhs(s, y):
        return p.G(s, y) @ y

    sol = solve_ivp(rhs, (0.0, p.s_max), p.y0, method="RK45", rtol=p.rtol, atol=p.atol,
                    t_eval=_grid(p), dense_output=True)
    return Trajectory(sol.t, sol.y.T, sol.status == 0, sol.message, sol.sol)


def fundamental_matrix(p: OdeFactorizationProblem, traj: Trajectory, sign: float | None = None) -> SampledMatrix:
    """S' = sign * S G(s, y(s)) with S(0) = I, G evaluated along ``traj``.

    ``sign = -1`` is the adjoint equation; ``+1`` is a negative control.
    """
    n = p.n
    smax = traj.s[-1]
    sign = p.adjoint_sign if sign is None else sign

    def rhs(s, flat):
        S = flat.reshape(n, n)
        return (sign * S @ p.G(s, traj.dense(s))).ravel()

    grid = traj.s
    sol = solve_ivp(rhs, (0.0, smax), np.eye(n).ravel(), method="RK45", rtol=p.rtol, atol=p.atol, t_eval=grid)
    S = sol.y.T.reshape(-1, n, n)
    S[0] = np.eye(n)
    return SampledMatrix(sol.t, S, sol.status == 0 and traj.ok, sol.message)


@dataclass
class FactorizationReport:
    kappa_residual: float
    R_residual: float
    SR_residual: float
    max_condition: float
    passed: bool
    threshold: float
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "kappa_residual": self.kappa_residual,
            "R_residual": self.R_residual,
            "SR_residual": self.SR_residual,
            "max_condition": self.max_condition,
            "passed": self.passed,
            "threshold": self.threshold,
            "notes": list(self.notes),
        }


def verify_factorization(p: OdeFactorizationProblem, sign: float | None = None, max_condition: float = 1e10) -> FactorizationReport:
    """max_s |S y - y(0)| and max_s |R y(0) - y(s)| with R = S^-1."""
    traj = integrate_system(p)
    fm = fundamental_matrix(p, traj, sign)
    notes = []
    if not traj.ok:
        notes.append(f"integration stopped early: {traj.message}")
    k = min(len(fm.s), len(traj.s))
    kap, rres, srres, cmax = 0.0, 0.0, 0.0, 0.0
    for i in range(k):
        S, y = fm.S[i], traj.y[i]
        cond = float(np.linalg.cond(S))
        cmax = max(cmax, cond)
        if not np.isfinite(cond) or cond > max_condition:
            notes.append(f"S numerically singular at s = {fm.s[i]:.4g} (condition {cond:.3g})")
            return FactorizationReport(np.inf, np.inf, np.inf, cond, False, p.threshold, notes)
        R = np.linalg.inv(S)
        kap = max(kap, float(np.linalg.norm(S @ y - p.y0)))
        rres = max(rres, float(np.linalg.norm(R @ p.y0 - y)))
        srres = max(srres, float(np.linalg.norm(S @ R - np.eye(p.n))))
    passed = traj.ok and fm.ok and kap < p.threshold and rres < p.threshold
    return FactorizationReport(kap, rres, srres, cmax, passed, p.threshold, notes)


def self_convergence(p: OdeFactorizationProblem, factor: float = 0.5) -> float:
    """Max deviation from a re-integration with tolerances scaled by ``factor``."""
    a = integrate_system(p)
    b = integrate_system(p.with_tolerances(factor))
    k = min(len(a.s), len(b.s))
    return float(np.max(np.abs(a.y[:k] - b.y[:k])))


def liouville_check(p: OdeFactorizationProblem) -> float:
    """|det S(s) - exp(-int_0^s tr G)| maximised over the samples; the trace
    integral is done by adaptive quadrature, independently of the ODE solver."""
    traj = integrate_system(p)
    fm = fundamental_matrix(p, traj)

    def tr(s):
        return float(np.trace(p.G(s, traj.dense(s))))

    worst = 0.0
    for s, S in zip(fm.s, fm.S):
        integral, _ = quad(tr, 0.0, s, epsabs=1e-13, epsrel=1e-12, limit=200)
        worst = max(worst, abs(float(np.linalg.det(S)) - np.exp(-integral)))
    return worst


def random_problem(rng: random.Random, n: int | None = None, nonlinear: bool = True, s_max: float = 1.0) -> OdeFactorizationProblem:
    """Smooth G with small polynomial entries in s (and y when nonlinear)."""
    n = n or rng.randint(1, 3)
    s = sp.Symbol("s", real=True)
    ys = sp.symbols(f"y1:{n + 1}")

    def coef():
        return sp.Rational(rng.randint(-8, 8), 10)

    rows = []
    for _ in range(n):
        row = []
        for _ in range(n):
            e = coef() + coef() * s + coef() * s**2
            if nonlinear:
                e += coef() * ys[rng.randrange(n)] / 2
            row.append(e)
        rows.append(row)
    y0 = [rng.randint(-5, 5) / 5 or 0.5 for _ in range(n)]
    f = sp.lambdify((s, *ys), sp.Matrix(rows), "numpy")

    def G(t, y):
        return np.array(f(t, *y), dtype=float)

    return OdeFactorizationProblem(n, G, y0, s_max, exprs=rows)


def _number(text: str) -> float:
    text = text.strip()
    try:
        return float(Fraction(text))
    except ValueError:
        return float(text)


def parse_oracle_problem(text: str) -> OdeFactorizationProblem:
    """Problem file::

        dimension: 2
        G: s, y2        # one line per row, entries in s, y1..yn
        G: 0, -s
        y0: 1, 1/2
        s_max: 1
        rtol: 1e-9      # optional, also atol, threshold, samples,
        adjoint_sign: -1  # +1 for a negative control
        expect: pass    # or fail
    """
    n = None
    rows: list[list[str]] = []
    opts: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition(":")
        if not sep:
            raise ParseError(f"line {lineno}: expected 'key: value'")
        key = key.strip().lower()
        if key in ("dimension", "n"):
            n = int(val)
        elif key == "g":
            rows.append([e.strip() for e in val.split(",")])
        elif key == "y0":
            opts["y0"] = [_number(v) for v in val.split(",")]
        elif key in ("s_max", "smax"):
            opts["s_max"] = _number(val)
        elif key in ("rtol", "atol", "threshold"):
            opts[key] = _number(val)
        elif key == "samples":
            opts[key] = int(val)
        elif key == "adjoint_sign":
            opts[key] = _number(val)
        elif key == "expect":
            if val.strip() not in ("pass", "fail"):
                raise ParseError(f"line {lineno}: expect must be pass or fail")
            opts[key] = val.strip()
        else:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
    if n is None or len(rows) != n:
        raise ParseError("dimension missing or wrong number of G rows")
    for k in ("y0", "s_max"):
        if k not in opts:
            raise ParseError(f"missing {k}")
    y0, s_max = opts.pop("y0"), opts.pop("s_max")
    return OdeFactorizationProblem.from_exprs(rows, y0, s_max, **opts)
