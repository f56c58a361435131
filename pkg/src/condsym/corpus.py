"""Problem files, the bundled corpus and the runner behind the CLI.

A problem file has sections (a section header starts in column 0; indented
lines continue it)::

    vars: x t | u | c1 c2          # independents | dependents | parameters
    eq: u_t - u_xx                 # one or more equations
    field: 2*t*d/dx - x*u*d/du
    chart:                         # optional; derived from the field if absent
      s = x/(2*t)
      ...
      inverse:
      x = 2*s*z
      ...
    solutions:                     # optional
      u = 1                        # must solve the equation(s)
      w = -z^2 -> u = 1/t - x^2/t^2   # invariant solution, lifted
      family u = (x + c1)/(t + c2) # must solve the augmented system
      reject u = x^2               # must NOT solve the equation
    expect:
      verdict = exact
      transformed ~ 4*z^2*v_z + 2*z*v - v_ss

Expectation operators: ``=`` exact equality of normal forms, ``~`` equality
up to a nonzero jet-free factor, ``=>``/``~>`` for ``transform`` lines of the
form ``original-expression => chart-expression``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

import sympy as sp

from . import __version__
from .charts import (
    ChartError,
    derive_chart,
    inverse_transform,
    parse_chart,
    transform_equation,
    verify_chart,
)
from .classify import (
    check_exact_symmetry,
    check_invariance,
    check_true_cs,
    classify,
    iterate_field,
)
from .expr import Context, ParseError, normalize, parse, to_text, zero_test
from .fields import parse_field
from .reduction import (
    NonSeparable,
    extract_factored_form,
    lift_invariant_solution,
    reduced_context,
    reduced_system,
    verify_solution,
)

__all__ = [
    "Check",
    "EntryReport",
    "Expectation",
    "Problem",
    "ProblemError",
    "corpus_dir",
    "load_corpus",
    "load_problem",
    "parse_problem",
    "run_entry",
]

SECTIONS = ("vars", "eq", "field", "chart", "solutions", "expect")
COMMANDS = ("classify", "transform", "reduce", "verify")


class ProblemError(ValueError):
    """Malformed problem file (line numbers refer to the file)."""


@dataclass(frozen=True)
class Expectation:
    key: str
    op: str
    value: str
    line: int


@dataclass(frozen=True)
class Solution:
    kind: str  # u | w | family | reject | reject-family
    text: str
    lifted: str | None
    line: int


@dataclass
class Problem:
    id: str
    ctx: Context
    equations: list
    field_text: str
    chart_text: str | None
    solutions: list
    expect: list
    source: str = ""

    @property
    def field(self):
        return parse_field(self.field_text, self.ctx)

    def expectations(self, *keys: str) -> list[Expectation]:
        return [e for e in self.expect if e.key in keys]


def _sections(text: str) -> dict:
    out: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if not raw[0].isspace():
            key, sep, rest = line.partition(":")
            key = key.strip().lower()
            if not sep or key not in SECTIONS:
                raise ProblemError(f"line {lineno}, column 1: expected one of {', '.join(s + ':' for s in SECTIONS)}")
            if key in out and key != "eq":
                raise ProblemError(f"line {lineno}, column 1: duplicate section {key!r}")
            current = out.setdefault(key, [])
            if rest.strip():
                current.append((lineno, rest.strip()))
        else:
            if current is None:
                raise ProblemError(f"line {lineno}: indented line outside a section")
            current.append((lineno, line.strip()))
    return out


def _parse_vars(lines) -> Context:
    if len(lines) != 1:
        raise ProblemError("vars: needs exactly one line 'independents | dependents | parameters'")
    lineno, text = lines[0]
    parts = [p.split() for p in text.split("|")]
    if len(parts) < 2 or len(parts) > 3:
        raise ProblemError(f"line {lineno}: vars: expects 'x t | u' or 'x t | u | c1 c2'")
    params = parts[2] if len(parts) == 3 else []
    try:
        return Context(tuple(parts[0]), tuple(parts[1]), tuple(params))
    except ValueError as exc:
        raise ProblemError(f"line {lineno}: {exc}") from exc


def _expectation(lineno: int, text: str) -> Expectation:
    for op in ("~", "="):
        key, sep, value = text.partition(op)
        if sep and key.strip() and " " not in key.strip():
            return Expectation(key.strip().lower(), op, value.strip(), lineno)
    raise ProblemError(f"line {lineno}: expected 'key = value' or 'key ~ value'")


def _solution(lineno: int, text: str) -> Solution:
    words = text.split(None, 1)
    kind = "u"
    if words[0] in ("family", "reject"):
        kind, text = words[0], words[1]
        if kind == "reject" and text.split(None, 1)[0] == "family":
            kind, text = "reject-family", text.split(None, 1)[1]
    name, sep, rhs = text.partition("=")
    if not sep:
        raise ProblemError(f"line {lineno}: expected 'u = ...' or 'w = ...'")
    name = name.strip()
    lifted = None
    if "->" in rhs:
        rhs, _, lifted = rhs.partition("->")
        lname, sep2, lifted = lifted.partition("=")
        if not sep2:
            raise ProblemError(f"line {lineno}: expected '-> u = ...'")
        lifted = lifted.strip()
    if name.startswith("w"):
        if kind != "u":
            raise ProblemError(f"line {lineno}: {kind} applies to u only")
        kind = "w"
    return Solution(kind, rhs.strip(), lifted, lineno)


def parse_problem(text: str, entry_id: str = "problem") -> Problem:
    sec = _sections(text)
    for req in ("vars", "eq", "field"):
        if req not in sec:
            raise ProblemError(f"missing section {req}:")
    ctx = _parse_vars(sec["vars"])
    eqs = []
    for lineno, t in sec["eq"]:
        try:
            eqs.append(parse(t, ctx))
        except ParseError as exc:
            raise ProblemError(f"line {lineno}, column {(exc.position or 0) + 1}: {exc}") from exc
    field_text = " ".join(t for _, t in sec["field"])
    try:
        parse_field(field_text, ctx)
    except (ParseError, ValueError) as exc:
        raise ProblemError(f"line {sec['field'][0][0]}: {exc}") from exc
    chart_text = "\n".join(t for _, t in sec["chart"]) if "chart" in sec else None
    sols = [_solution(n, t) for n, t in sec.get("solutions", [])]
    exp = [_expectation(n, t) for n, t in sec.get("expect", [])]
    prob = Problem(entry_id, ctx, eqs, field_text, chart_text, sols, exp, text)
    if chart_text is not None:
        try:
            parse_chart(chart_text, ctx)
        except (ParseError, ChartError) as exc:
            raise ProblemError(f"chart: {exc}") from exc
    return prob


def load_problem(path: str | Path) -> Problem:
    path = Path(path)
    return parse_problem(path.read_text(encoding="utf-8"), path.stem)


def corpus_dir() -> Path:
    return Path(str(resources.files("condsym") / "corpus"))


def load_corpus(directory: str | Path | None = None) -> list[Problem]:
    directory = Path(directory) if directory else corpus_dir()
    probs = [load_problem(p) for p in sorted(directory.glob("*.prob"))]
    ids = [p.id for p in probs]
    if len(set(ids)) != len(ids):
        raise ProblemError("duplicate corpus ids")
    return probs


# ---------------------------------------------------------------------------
# running


@dataclass
class Check:
    name: str
    status: str  # pass | fail | undecided
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "detail": self.detail}


@dataclass
class EntryReport:
    id: str
    command: str
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    timing: float = 0.0
    error: str | None = None
    version: str = __version__

    @property
    def status(self) -> str:
        if self.error:
            return "error"
        st = {c.status for c in self.checks}
        if "fail" in st:
            return "fail"
        if "undecided" in st:
            return "undecided"
        return "pass"

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "command": self.command,
            "status": self.status,
            "checks": [c.as_dict() for c in self.checks],
            "results": {k: v for k, v in self.results.items()},
            "timing": round(self.timing, 3),
            "error": self.error,
            "version": self.version,
        }


def _ok(flag, name: str, detail: str = "") -> Check:
    if flag is None:
        return Check(name, "undecided", detail)
    return Check(name, "pass" if flag else "fail", detail)


def _diff(expected: sp.Expr, actual: sp.Expr) -> str:
    return f"expected {to_text(expected)}\n  actual   {to_text(actual)}\n  diff     {to_text(normalize(actual - expected))}"


def compare(actual: sp.Expr, expected: sp.Expr, op: str, ctx: Context) -> tuple[bool | None, str]:
    """Exact (``=``) or up-to-nonzero-factor (``~``) comparison."""
    actual, expected = normalize(actual), normalize(expected)
    d = zero_test(actual - expected).value
    if d or op == "=":
        return d, "" if d else _diff(expected, actual)
    if expected == 0 or actual == 0:
        return False, _diff(expected, actual)
    ratio = normalize(actual / expected)
    num, den = sp.fraction(sp.together(ratio))
    if ctx.jets_in(num) or ctx.jets_in(den) or set(ctx.u) & ratio.free_symbols:
        return False, _diff(expected, actual) + f"\n  ratio    {to_text(ratio)}"
    return True, f"factor {to_text(ratio)}"


class _Runner:
    def __init__(self, prob: Problem, sigma_max: int, prolong_order: int | None):
        self.p = prob
        self.sigma_max = sigma_max
        self.prolong_order = prolong_order
        self.X = prob.field
        self._chart = None
        self._transformed = None
        self._factored = None
        self._report = None

    # lazily computed artefacts -------------------------------------------
    def chart(self):
        if self._chart is None:
            if self.p.chart_text is not None:
                self._chart = parse_chart(self.p.chart_text, self.p.ctx)
            else:
                self._chart = derive_chart(self.X)
        return self._chart

    def transformed(self):
        if self._transformed is None:
            self._transformed = transform_equation(self._single(), self.chart())
        return self._transformed

    def factored(self):
        if self._factored is None:
            self._factored = extract_factored_form(self.transformed().expr, self.chart())
        return self._factored

    def report(self):
        if self._report is None:
            eqs = self.p.equations
            self._report = classify(self.X, eqs, self.sigma_max, self.prolong_order)
        return self._report

    def _single(self):
        if len(self.p.equations) != 1:
            raise ProblemError("this operation needs a single equation")
        return self.p.equations[0]

    def chart_expr(self, text: str):
        return parse(text, self.chart().chart_ctx)

    # commands -------------------------------------------------------------
    def classify(self, rep: EntryReport):
        r = self.report()
        rep.results["classification"] = r.as_dict()
        rep.results["verdict"] = r.label()
        undecided = r.verdict in ("unknown", "undetermined")
        for e in self.p.expectations("verdict"):
            ok = None if undecided else r.label() == e.value
            rep.checks.append(_ok(ok, "verdict", f"expected {e.value}, got {r.label()}" + "".join(f"; {n}" for n in r.notes)))
        if undecided and not self.p.expectations("verdict"):
            rep.checks.append(_ok(None, "verdict decided", "; ".join(r.notes)))
        for e in self.p.expectations("sigma"):
            rep.checks.append(_ok(str(r.sigma) == e.value, "sigma", f"expected {e.value}, got {r.sigma}"))
        for e in self.p.expectations("sigma_with_q"):
            got = r.witnesses.get("sigma_with_q")
            rep.checks.append(_ok(str(got) == e.value, "sigma_with_q", f"expected {e.value}, got {got}"))
        for e in self.p.expectations("invariant"):
            got = check_invariance(self.X, self.p.equations).verdict == "invariant"
            rep.checks.append(_ok(got == (e.value == "true"), "invariant", f"got {got}"))
        for e in self.p.expectations("exact"):
            ex = check_exact_symmetry(self.X, self.p.equations)
            got = None if ex.verdict == "unknown" else ex.verdict == "exact"
            rep.results["exact"] = ex.as_dict()
            rep.checks.append(_ok(None if got is None else got == (e.value == "true"), "exact", f"got {ex.verdict} via {ex.path}"))
        for e in self.p.expectations("multiplier"):
            ex = check_exact_symmetry(self.X, self.p.equations)
            G = ex.witnesses.get("G")
            if not G:
                rep.checks.append(Check("multiplier", "fail", f"no multiplier found ({ex.verdict})"))
                continue
            rep.results["multiplier"] = [[to_text(g) for g in row] for row in G]
            ok, detail = compare(G[0][0], parse(e.value, self.p.ctx), "=", self.p.ctx)
            rep.checks.append(_ok(ok, "multiplier", detail))
        for e in self.p.expectations("truecs"):
            tc = check_true_cs(self.X, self._single(), prolong_order=self.prolong_order)
            got = {"trueCS": True, "notTrueCS": False}.get(tc.verdict)
            rep.results["truecs"] = tc.as_dict()
            rep.checks.append(_ok(None if got is None else got == (e.value == "true"), "truecs", f"got {tc.verdict}"))
        its = [e for e in self.p.expect if e.key.startswith("iterate")]
        if its:
            n = max(int(e.key[len("iterate"):]) for e in its)
            chain = iterate_field(self.X, self._single(), n)
            for e in its:
                k = int(e.key[len("iterate"):])
                ok, detail = compare(chain[k], parse(e.value, self.p.ctx), e.op, self.p.ctx)
                rep.checks.append(_ok(ok, e.key, detail))

    def transform(self, rep: EntryReport):
        ch = self.chart()
        vr = verify_chart(self.X, ch)
        rep.results["chart"] = ch.to_text()
        rep.results["chart_verified"] = vr.passed
        want = self.p.expectations("chart_ok")
        if want:
            for e in want:
                rep.checks.append(_ok(vr.passed == (e.value == "true"), "chart_ok", str({k: str(v) for k, v in vr.residuals.items()})))
            if not vr.passed:
                return
        else:
            rep.checks.append(_ok(vr.passed, "chart verifies", str({k: str(v) for k, v in vr.residuals.items()})))
        if self.p.expectations("derived") and self.p.chart_text is not None:
            der = derive_chart(self.X)
            same = all(zero_test(a - b).value is True for a, b in zip(der.forward, ch.forward))
            same = same and all(zero_test(a - b).value is True for a, b in zip(der.inverse, ch.inverse))
            rep.checks.append(_ok(same, "derived chart equals the given chart", der.to_text()))
        if len(self.p.equations) == 1:
            T = self.transformed()
            rep.results["transformed"] = to_text(T.expr)
            rep.results["factor"] = to_text(T.factor)
            back = inverse_transform(T.raw, ch).expr
            rt = zero_test(back - self.p.equations[0]).value
            rep.results["round_trip_residual"] = to_text(normalize(back - self.p.equations[0]))
            rep.checks.append(_ok(rt, "round trip"))
            for e in self.p.expectations("transformed"):
                ok, detail = compare(T.expr, self.chart_expr(e.value), e.op, ch.chart_ctx)
                rep.checks.append(_ok(ok, f"transformed {e.op}", detail))
            for e in self.p.expectations("s_free"):
                free = ch.s not in T.expr.free_symbols and normalize(sp.diff(T.expr, ch.s)) == 0
                rep.checks.append(_ok(free == (e.value == "true"), "s-free", f"got {free}"))
        for e in self.p.expectations("transform"):
            op = "~" if "~>" in e.value else "="
            src, _, dst = e.value.partition("~>" if op == "~" else "=>")
            orig = parse(src, self.p.ctx)
            got = transform_equation(orig, ch, clear=False).raw
            ok, detail = compare(got, self.chart_expr(dst), op, ch.chart_ctx)
            rep.results.setdefault("combinations", []).append(to_text(got))
            rep.checks.append(_ok(ok, f"transform {src.strip()}", detail))

    def reduce(self, rep: EntryReport):
        ff = self.factored()
        rs = reduced_system(ff)
        rep.results["factored"] = str(ff)
        rep.results["reduced"] = rs.lines()
        rep.results["reduced_factors"] = [to_text(f) for f in rs.factors]
        rep.checks.append(_ok(ff.check(), "factored form recombines"))
        rep.checks.append(_ok(ff.wronskian["independent"], "R basis independent (Wronskian)"))
        rep.checks.append(_ok(all(ff.s not in e.free_symbols for e in rs.equations), "reduced system is s-free"))
        for e in self.p.expectations("kparts"):
            rep.checks.append(_ok(len(ff.k_parts) == int(e.value), "kparts", f"got {len(ff.k_parts)}"))
        for e in self.p.expectations("rbasis"):
            want = [self.chart_expr(t) for t in e.value.split(",")]
            got = ff.R
            ok = len(want) == len(got) and all(normalize(a - b) == 0 for a, b in zip(want, got))
            rep.checks.append(_ok(ok, "rbasis", f"got {', '.join(map(to_text, got))}"))
        for e in self.p.expectations("reduced"):
            want = [parse(t, rs.ctx) for t in e.value.split(";")]
            if len(want) != len(rs.equations):
                rep.checks.append(Check("reduced", "fail", f"expected {len(want)} equations, got {rs.lines()}"))
                continue
            for k, (w, g) in enumerate(zip(want, rs.equations), 1):
                ok, detail = compare(g, w, e.op, rs.ctx)
                rep.checks.append(_ok(ok, f"reduced K{k} {e.op}", detail))

    def verify(self, rep: EntryReport):
        ctx = self.p.ctx
        sigma = None
        for sol in self.p.solutions:
            name = f"{sol.kind} {sol.text}"
            if sol.kind in ("u", "reject"):
                u = self._orig(sol.text)
                ok = verify_solution(self.p.equations, u, ctx)
                rep.checks.append(_ok(ok if sol.kind == "u" else not ok, name))
            elif sol.kind in ("family", "reject-family"):
                if sigma is None:
                    sigma = self._partial_order()
                chain = iterate_field(self.X, self._single(), max(sigma - 1, 0))
                u = self._orig(sol.text)
                res = verify_solution(chain, u, ctx, residual=True)
                zero = [_residual_zero(r) for r in res]
                ok = all(zero)
                if sol.kind == "family":
                    rep.checks.append(_ok(ok, f"{name} solves Delta..Delta^({sigma - 1})"))
                else:
                    failed = [k for k, z in enumerate(zero) if not z]
                    rep.checks.append(_ok(not ok, f"{name} fails Delta^(k) for k in {failed}"))
            elif sol.kind == "w":
                rc = reduced_context(self.chart().chart_ctx)
                w = parse(sol.text, rc)
                rs = reduced_system(self.factored())
                ok_w = verify_solution(rs.equations, w, rc)
                rep.checks.append(_ok(ok_w, f"{name} solves the reduced system"))
                u = lift_invariant_solution(self.chart(), w)
                rep.results.setdefault("lifted", []).append(to_text(u))
                rep.checks.append(_ok(verify_solution(self.p.equations, u, ctx), f"lifted u = {to_text(u)} solves the equation"))
                if sol.lifted is not None:
                    ok, detail = compare(u, self._orig(sol.lifted), "=", ctx)
                    rep.checks.append(_ok(ok, f"lifted solution equals {sol.lifted}", detail))

    def _orig(self, text: str) -> sp.Expr:
        """Parse a candidate solution: independents and parameters only."""
        ctx = self.p.ctx
        aux = Context(ctx.independents, tuple(d + "0" for d in ctx.dependents), ctx.parameters)
        e = parse(text, aux, raw=True)
        return e.xreplace({aux.symbol(n): ctx.symbol(n) for n in ctx.independents + ctx.parameters})

    def _partial_order(self) -> int:
        for e in self.p.expectations("partial_order", "sigma"):
            return int(e.value)
        from .classify import check_partial_symmetry

        r = check_partial_symmetry(self.X, self._single(), self.sigma_max)
        return r.order or self.sigma_max


def _residual_zero(r: sp.Expr) -> bool:
    # rational residuals come back exact; kernels and roots need the zero test
    if r == 0:
        return True
    radical = any(p.exp.is_Rational and not p.exp.is_Integer for p in r.atoms(sp.Pow))
    return (r.has(sp.Function) or radical) and zero_test(r).value is True


def _relevant(prob: Problem, cmd: str) -> bool:
    keys = {e.key for e in prob.expect}
    if cmd == "classify":
        return True
    if cmd == "transform":
        return prob.chart_text is not None or bool(keys & {"transformed", "transform", "derived", "s_free", "chart_ok"})
    if cmd == "reduce":
        return bool(keys & {"kparts", "rbasis", "reduced"})
    return bool(prob.solutions)


def run_entry(
    prob: Problem,
    commands: Iterable[str] = COMMANDS,
    sigma_max: int = 5,
    prolong_order: int | None = None,
) -> EntryReport:
    """Run the selected commands on a problem; checks follow its expect: block."""
    commands = list(commands)
    rep = EntryReport(prob.id, "+".join(commands))
    t0 = time.perf_counter()
    runner = _Runner(prob, sigma_max, prolong_order)
    for cmd in commands:
        if len(commands) > 1 and not _relevant(prob, cmd):
            continue
        try:
            getattr(runner, cmd)(rep)
        except (ChartError, NonSeparable, ProblemError, ParseError, ValueError) as exc:
            rep.checks.append(Check(cmd, "fail", f"{type(exc).__name__}: {exc}"))
    rep.timing = time.perf_counter() - t0
    return rep
