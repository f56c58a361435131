"""Symbolic expression kernel.

Expressions are plain (immutable) sympy expressions.  Jet variables
``u_{alpha,J}`` are sympy symbols whose names follow the input grammar
(``u_xxt``), and a :class:`Context` records which names are independent
variables, dependent variables and parameters so that every symbol can be
classified.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple

import sympy as sp
from sympy.external.gmpy import MPQ

__all__ = [
    "Context",
    "JetVariable",
    "ParseError",
    "UndecidedZeroTest",
    "ZeroTest",
    "differentiate",
    "is_zero",
    "normalize",
    "parse",
    "set_default_seed",
    "substitute",
    "to_text",
    "zero_test",
]

KERNELS = (sp.exp, sp.log, sp.sin, sp.cos, sp.atan)


class ParseError(ValueError):
    """Raised on malformed or ill-typed input text."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} at offset {position}"
        super().__init__(message)


class UndecidedZeroTest(ArithmeticError):
    """The zero test could not decide (kernel identities out of reach)."""


@dataclass(frozen=True, order=True)
class JetVariable:
    """A dependent variable together with a derivative multi-index.

    ``index`` is aligned with the independents of the owning context; the
    zero multi-index denotes the dependent variable itself.
    """

    dependent: str
    index: tuple[int, ...]

    @property
    def order(self) -> int:
        return sum(self.index)

    def shifted(self, i: int, by: int = 1) -> "JetVariable":
        idx = list(self.index)
        idx[i] += by
        if idx[i] < 0:
            raise ValueError("negative multi-index")
        return JetVariable(self.dependent, tuple(idx))


@dataclass(frozen=True)
class Context:
    """Declared symbols of one coordinate system.

    ``chart`` marks symmetry-adapted coordinates (chart-independent /
    chart-dependent kinds).  In a chart context the first independent is the
    canonical coordinate ``s``.
    """

    independents: tuple[str, ...]
    dependents: tuple[str, ...]
    parameters: tuple[str, ...] = ()
    chart: bool = False

    def __post_init__(self):
        object.__setattr__(self, "independents", tuple(self.independents))
        object.__setattr__(self, "dependents", tuple(self.dependents))
        object.__setattr__(self, "parameters", tuple(self.parameters))
        if not self.independents or not self.dependents:
            raise ValueError("a context needs at least one independent and one dependent")
        names = self.independents + self.dependents + self.parameters
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate symbol names in {names}")
        for n in names:
            if not n.isidentifier() or "_" in n:
                raise ValueError(f"invalid symbol name {n!r}")
            if n in _FUNCTIONS:
                raise ValueError(f"{n!r} is reserved")

    # symbols -----------------------------------------------------------
    @property
    def p(self) -> int:
        return len(self.independents)

    @property
    def q(self) -> int:
        return len(self.dependents)

    def kind(self, name: str) -> str:
        if name in self.independents:
            return "chart-independent" if self.chart else "independent"
        if name in self.dependents:
            return "chart-dependent" if self.chart else "dependent"
        if name in self.parameters:
            return "parameter"
        raise KeyError(name)

    def symbol(self, name: str) -> sp.Symbol:
        return _make_symbol(self, name)

    @property
    def x(self) -> tuple[sp.Symbol, ...]:
        return tuple(self.symbol(n) for n in self.independents)

    @property
    def u(self) -> tuple[sp.Symbol, ...]:
        return tuple(self.symbol(n) for n in self.dependents)

    @property
    def params(self) -> tuple[sp.Symbol, ...]:
        return tuple(self.symbol(n) for n in self.parameters)

    @property
    def base(self) -> tuple[sp.Symbol, ...]:
        """Independents and parameters: everything that is not a jet."""
        return self.x + self.params

    # jets --------------------------------------------------------------
    def jet(self, dependent: str | JetVariable, index: Iterable[int] | None = None) -> sp.Symbol:
        if isinstance(dependent, JetVariable):
            jv = dependent
        else:
            jv = JetVariable(dependent, tuple(index) if index is not None else (0,) * self.p)
        if jv.dependent not in self.dependents or len(jv.index) != self.p:
            raise KeyError(f"{jv} does not belong to {self}")
        if jv.order == 0:
            return self.symbol(jv.dependent)
        if any(len(n) != 1 for n in self.independents):
            raise ValueError("jet variables need single-letter independent names")
        letters = "".join(n * k for n, k in zip(self.independents, jv.index))
        return sp.Symbol(f"{jv.dependent}_{letters}")

    def jet_info(self, sym: sp.Basic) -> JetVariable | None:
        """The jet variable named by ``sym``, or None for a base symbol."""
        if not isinstance(sym, sp.Symbol):
            return None
        return _jet_info(self, sym.name)

    def jets_in(self, e: sp.Basic) -> set[sp.Symbol]:
        return {s for s in e.free_symbols if self.jet_info(s) is not None}

    def jet_order(self, e: sp.Basic) -> int:
        orders = [self.jet_info(s).order for s in self.jets_in(e)]
        return max(orders, default=-1)

    def validate(self, e: sp.Basic) -> sp.Basic:
        for s in e.free_symbols:
            if self.jet_info(s) is None and s not in self.base:
                raise ParseError(f"symbol {s} is not declared in this context")
        return e

    def derivative_symbol_map(self) -> dict[str, sp.Symbol]:
        return {n: self.symbol(n) for n in self.independents + self.dependents + self.parameters}


@lru_cache(maxsize=None)
def _make_symbol(ctx: Context, name: str) -> sp.Symbol:
    kind = ctx.kind(name)
    if kind == "independent":
        return sp.Symbol(name, positive=True)
    if kind == "chart-independent":
        return sp.Symbol(name, real=True)
    return sp.Symbol(name)


@lru_cache(maxsize=None)
def _jet_info(ctx: Context, name: str) -> JetVariable | None:
    if name in ctx.dependents:
        return JetVariable(name, (0,) * ctx.p)
    dep, sep, letters = name.partition("_")
    if not sep or dep not in ctx.dependents or not letters:
        return None
    idx = [0] * ctx.p
    for ch in letters:
        if ch not in ctx.independents:
            return None
        idx[ctx.independents.index(ch)] += 1
    return JetVariable(dep, tuple(idx))


# ---------------------------------------------------------------------------
# parsing

_FUNCTIONS = {"exp": sp.exp, "log": sp.log, "sin": sp.sin, "cos": sp.cos, "atan": sp.atan, "sqrt": sp.sqrt}


class _Token(NamedTuple):
    kind: str  # num, name, op, end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("num", text[i:j], i))
            i = j
        elif ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], i))
            i = j
        elif ch in "+-*/^(),":
            if text.startswith("**", i):
                raise ParseError("unexpected '**' (use '^')", i)
            tokens.append(_Token("op", ch, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary (('*'|'/') unary)*
    # unary  := ('+'|'-') unary | power
    # power  := atom ('^' unary)?
    # atom   := num | name | func '(' expr ')' | '(' expr ')'

    def __init__(self, text: str, ctx: Context):
        self.tokens = _tokenize(text)
        self.i = 0
        self.ctx = ctx

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind != "op":
            raise ParseError(f"expected {text!r}", self.tok.pos)
        self.take()

    def parse(self) -> sp.Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return e

    def expr(self) -> sp.Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> sp.Expr:
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.take()
            rhs = self.unary()
            if op.text == "*":
                e = e * rhs
            else:
                if rhs == 0:
                    raise ParseError("division by zero", op.pos)
                e = e / rhs
        return e

    def unary(self) -> sp.Expr:
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            e = self.unary()
            return -e if op == "-" else e
        return self.power()

    def power(self) -> sp.Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            pos = self.take().pos
            exponent = self.unary()
            if not exponent.is_Rational or exponent.q not in (1, 2):
                raise ParseError("exponents must be integer or half-integer constants", pos)
            return base**exponent
        return base

    def atom(self) -> sp.Expr:
        t = self.tok
        if t.kind == "num":
            self.take()
            return sp.Integer(int(t.text))
        if t.kind == "op" and t.text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "name":
            self.take()
            if t.text in _FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _FUNCTIONS[t.text](arg)
            return self.name(t)
        if t.kind == "end":
            raise ParseError("unexpected end of input", t.pos)
        raise ParseError(f"unexpected {t.text!r}", t.pos)

    def name(self, t: _Token) -> sp.Expr:
        ctx = self.ctx
        base, sep, letters = t.text.partition("_")
        if not sep:
            if t.text in ctx.independents + ctx.dependents + ctx.parameters:
                return ctx.symbol(t.text)
            raise ParseError(f"undeclared symbol {t.text!r}", t.pos)
        if base in ctx.independents or base in ctx.parameters:
            raise ParseError(f"cannot differentiate {ctx.kind(base)} {base!r}", t.pos)
        if base not in ctx.dependents:
            raise ParseError(f"undeclared symbol {base!r}", t.pos)
        idx = [0] * ctx.p
        for ch in letters:
            if ch not in ctx.independents:
                raise ParseError(f"{ch!r} is not an independent variable", t.pos)
            idx[ctx.independents.index(ch)] += 1
        return ctx.jet(base, idx)


def parse(text: str, ctx: Context, raw: bool = False) -> sp.Expr:
    """Parse ``text`` in the toolkit grammar and return its normal form.

    ``raw=True`` keeps the tree as written, which differentiates faster
    than a combined fraction.
    """
    e = _Parser(text, ctx).parse()
    return e if raw else normalize(e)


def parse_raw(text: str, ctx: Context) -> sp.Expr:
    """Parse without normalizing (keeps the author's grouping)."""
    return _Parser(text, ctx).parse()


def to_text(e: sp.Basic) -> str:
    """Render an expression back in the input grammar."""
    return sp.sstr(e, order="grlex").replace("**", "^")


# ---------------------------------------------------------------------------
# normal form


def _kernel_args_expanded(e: sp.Expr) -> sp.Expr:
    reps = {}
    for f in e.atoms(sp.Function):
        if isinstance(f, KERNELS):
            arg = sp.expand(f.args[0])
            if arg != f.args[0]:
                reps[f] = f.func(arg)
    return e.xreplace(reps) if reps else e


def _trig_reduce(e: sp.Expr) -> sp.Expr:
    """Rewrite sin(a)^n (n >= 2) through cos(a), so sin^2 + cos^2 cancels."""
    if not e.has(sp.sin):
        return e
    reps = {}
    for pw in e.atoms(sp.Pow):
        b, n = pw.args
        if isinstance(b, sp.sin) and n.is_Integer and n >= 2:
            reps[pw] = b ** (n % 2) * (1 - sp.cos(b.args[0]) ** 2) ** (n // 2)
    return sp.expand(e.xreplace(reps)) if reps else e


_ONE = MPQ(1)
_UNIT: frozenset = frozenset()


def _poly_dict(e: sp.Expr):
    """Monomial -> coefficient dict of a polynomial tree, None otherwise."""
    if e.is_Add:
        out: dict = {}
        for a in e.args:
            d = _poly_dict(a)
            if d is None:
                return None
            for m, c in d.items():
                out[m] = out[m] + c if m in out else c
        return out
    if e.is_Mul:
        out = {_UNIT: _ONE}
        for a in e.args:
            d = _poly_dict(a)
            if d is None:
                return None
            out = _poly_mul(out, d)
        return out
    if e.is_Pow:
        if not (e.exp.is_Integer and e.exp > 0):
            return None
        base = _poly_dict(e.base)
        if base is None:
            return None
        out = {_UNIT: _ONE}
        for _ in range(int(e.exp)):
            out = _poly_mul(out, base)
        return out
    if e.is_Rational:
        return {_UNIT: MPQ(e.p, e.q)}
    if e.is_Symbol:
        return {frozenset(((e, 1),)): _ONE}
    return None


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            if not ma:
                m = mb
            elif not mb:
                m = ma
            else:
                d = dict(ma)
                for s, k in mb:
                    d[s] = d.get(s, 0) + k
                m = frozenset(d.items())
            c = ca * cb
            out[m] = out[m] + c if m in out else c
    return out


def _poly_partial(d: dict, sym: sp.Symbol) -> dict:
    out: dict = {}
    for mono, c in d.items():
        for s, k in mono:
            if s == sym:
                powers = dict(mono)
                if k == 1:
                    del powers[s]
                else:
                    powers[s] = k - 1
                m = frozenset(powers.items())
                out[m] = out[m] + c * k if m in out else c * k
                break
    return out


def _poly_add_into(acc: dict, d: dict) -> None:
    for m, c in d.items():
        acc[m] = acc[m] + c if m in acc else c


def _poly_build(d: dict) -> sp.Expr:
    return sp.Add(*[sp.Mul(sp.Rational(int(c.numerator), int(c.denominator)), *[s**k for s, k in m]) for m, c in d.items() if c != 0])


def _poly_expand(e: sp.Expr) -> sp.Expr | None:
    d = _poly_dict(e)
    if d is None:
        return None
    return _poly_build(d)


def _is_expanded_polynomial(e: sp.Expr) -> bool:
    """True for a sum of monomials c*x1^k1*...: already the normal form."""
    for term in e.args if e.is_Add else (e,):
        for f in term.args if term.is_Mul else (term,):
            if f.is_Pow:
                if not (f.base.is_Symbol and f.exp.is_Integer and f.exp > 0):
                    return False
            elif not (f.is_Symbol or f.is_Rational):
                return False
    return True


def normalize(e: sp.Basic) -> sp.Expr:
    """Canonical expanded form: a reduced fraction of expanded polynomials.

    Kernel applications (exp, log, sin, cos) act as polynomial generators;
    products of exponentials are merged and even powers of sines are written
    through cosines.
    """
    e = sp.sympify(e)
    if e.is_Number:
        return e
    return _normalize(e)


@lru_cache(maxsize=1 << 14)
def _normalize(e: sp.Expr) -> sp.Expr:
    fast = _poly_expand(e)
    if fast is not None:
        return fast
    e = _kernel_args_expanded(e)
    e = sp.expand(e)
    if e.has(sp.exp):
        e = sp.expand(sp.powsimp(e, combine="exp"))
        e = _kernel_args_expanded(e)
    e = _trig_reduce(e)
    if _is_expanded_polynomial(e):
        return e
    if e.is_Add or e.is_Mul or e.is_Pow:
        num, den = sp.fraction(sp.cancel(sp.together(e)))
        num, den = _trig_reduce(sp.expand(num)), _trig_reduce(sp.expand(den))
        e = sp.cancel(num / den) if den != 1 else num
        if e.has(sp.exp):
            e = sp.powsimp(e, combine="exp")
            num, den = sp.fraction(sp.cancel(sp.together(sp.expand(e))))
            e = sp.expand(num) / sp.expand(den) if den != 1 else sp.expand(num)
    return e


# ---------------------------------------------------------------------------
# zero test


class ZeroTest(NamedTuple):
    value: bool | None
    path: str  # normal-form | random-eval | numeric | undecided


_DEFAULT_SEED = [20240601]
SAMPLE_POINTS = 12


def set_default_seed(seed: int) -> None:
    _DEFAULT_SEED[0] = int(seed)


def _random_rational(rng: random.Random, positive: bool) -> sp.Rational:
    num = rng.randint(1, 97)
    den = rng.randint(1, 13)
    r = sp.Rational(num, den)
    if not positive and rng.random() < 0.5:
        r = -r
    return r


def _sample_points(syms, rng):
    for _ in range(50):
        yield {s: _random_rational(rng, bool(s.is_positive)) for s in syms}


def zero_test(e: sp.Basic, seed: int | None = None, points: int = SAMPLE_POINTS) -> ZeroTest:
    """Decide whether ``e`` is identically zero.

    The normal form decides every kernel-free rational expression.  With
    kernels present, kernel applications are frozen as fresh symbols and the
    result is evaluated exactly at random rational points; a nonzero
    high-precision evaluation with true kernels proves non-vanishing.
    """
    e = normalize(e)
    if e == 0:
        return ZeroTest(True, "normal-form")
    kernels = [f for f in e.atoms(sp.Function) if isinstance(f, KERNELS)]
    has_roots = any(p.exp.is_Rational and not p.exp.is_Integer for p in e.atoms(sp.Pow))
    if not kernels and not has_roots:
        return ZeroTest(False, "normal-form")

    rng = random.Random(_DEFAULT_SEED[0] if seed is None else seed)
    frozen = {k: sp.Dummy(f"k{i}") for i, k in enumerate(kernels)}
    f = e.xreplace(frozen)
    syms = sorted(f.free_symbols, key=str)
    hits = 0
    for pt in _sample_points(syms, rng):
        val = f.xreplace(pt)
        if not val.is_finite:
            continue
        if val.is_Rational:
            if val != 0:
                break
            hits += 1
            if hits >= points:
                return ZeroTest(True, "random-eval")
        else:
            break
    # frozen-kernel identity failed: try real kernels
    simplified = sp.simplify(e)
    if simplified == 0:
        return ZeroTest(True, "normal-form")
    syms = sorted(e.free_symbols, key=str)
    found = 0
    for pt in _sample_points(syms, rng):
        try:
            val = sp.N(e.xreplace(pt), 50)
        except (ZeroDivisionError, ValueError):
            continue
        if not val.is_finite or not val.is_number:
            continue
        if val.is_real is False and abs(sp.im(val)) > 0 and not _real_domain(e, pt):
            continue
        found += 1
        if abs(val) > sp.Float("1e-30"):
            return ZeroTest(False, "numeric")
        if found >= points:
            break
    return ZeroTest(None, "undecided")


def _real_domain(e, pt) -> bool:
    for f in e.atoms(sp.log):
        a = f.args[0].xreplace(pt)
        if a.is_number and a.is_negative:
            return False
    return True


def is_zero(e: sp.Basic, seed: int | None = None) -> bool:
    res = zero_test(e, seed=seed)
    if res.value is None:
        raise UndecidedZeroTest(f"cannot decide whether {to_text(e)} vanishes")
    return res.value


# ---------------------------------------------------------------------------
# substitution / differentiation


def substitute(e: sp.Basic, bindings: Mapping[sp.Basic, sp.Basic], ctx: Context | None = None) -> sp.Expr:
    """Simultaneous substitution followed by normalization."""
    bindings = {sp.sympify(k): sp.sympify(v) for k, v in bindings.items()}
    targets = set(bindings)
    for k, v in bindings.items():
        if not isinstance(k, sp.Symbol):
            raise TypeError(f"binding target {k} is not a symbol")
        if v.free_symbols & targets:
            raise ValueError(f"cyclic binding: {k} -> {v}")
    if ctx is not None:
        for k in bindings:
            jv = ctx.jet_info(k)
            if jv is not None and jv.order > 0 and ctx.symbol(jv.dependent) in targets:
                raise ValueError(f"binding both {k} and its dependent {jv.dependent}")
    return normalize(sp.sympify(e).xreplace(bindings))


def partial(e: sp.Expr, s: sp.Symbol) -> sp.Expr:
    """d e / d s without normalization; termwise on expanded polynomials."""
    if not _is_expanded_polynomial(e):
        return sp.diff(e, s)
    out = []
    for term, coeff in e.as_coefficients_dict().items():
        powers = term.as_powers_dict()
        k = powers.get(s, 0)
        if k:
            out.append(coeff * k * sp.Mul(*[b ** (p - 1 if b == s else p) for b, p in powers.items()]))
    return sp.Add(*out)


def differentiate(e: sp.Basic, s: sp.Symbol) -> sp.Expr:
    """Partial derivative, jet variables held fixed."""
    return normalize(partial(sp.sympify(e), s))
