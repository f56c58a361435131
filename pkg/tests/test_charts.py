import pytest
import sympy as sp

from condsym import Context, apply, normalize, parse, parse_chart, parse_field, prolong
from condsym.charts import ChartError, derive_chart, inverse_transform, transform_equation, verify_chart
from condsym.corpus import load_corpus
from condsym.reduction import extract_factored_form

CTX = Context(("x", "t"), ("u",))
ACOUSTIC = "u_tt - u*u_xx"
ACOUSTIC_X = "2*t*d/dx + d/dt + 8*t*d/du"
CHARTED = [p for p in load_corpus() if p.chart_text]


def _chart(lines):
    return parse_chart("\n".join(lines), CTX)


@pytest.mark.parametrize(
    "field,expected",
    [
        ("2*t*d/dx - x*u*d/du", ["x/(2*t)", "t", "u*exp(x^2/(4*t))"]),
        (ACOUSTIC_X, ["t", "x - t^2", "u - 4*t^2"]),
        ("x*d/dx + 2*t*d/dt - 2*u*d/du", ["log(x)", "x^2/t", "t*u"]),
        ("d/dx", ["x", "t", "u"]),
    ],
)
def test_derive_chart(field, expected):
    X = parse_field(field, CTX)
    chart = derive_chart(X)
    assert [normalize(a - parse(b, CTX)) for a, b in zip(chart.forward, expected)] == [0, 0, 0]
    assert verify_chart(X, chart).passed


def test_bad_chart_reports_residual():
    X = parse_field(ACOUSTIC_X, CTX)
    bad = _chart(["s = x", "z = x - t^2", "v = u - 4*t^2", "inverse:", "x = s", "t = (s - z)^(1/2)", "u = v + 4*(s - z)"])
    r = verify_chart(X, bad)
    assert not r.passed and not r.s_ok and r.z_ok and r.v_ok
    assert normalize(r.residuals["Xs-1"] - parse("2*t - 1", CTX)) == 0


def test_wrong_inverse_detected():
    X = parse_field(ACOUSTIC_X, CTX)
    c = _chart(["s = t", "z = x - t^2", "v = u - 4*t^2", "inverse:", "x = z + s^2", "t = s", "u = v + 3*s^2"])
    r = verify_chart(X, c)
    assert r.s_ok and r.z_ok and r.v_ok and not r.inverse_ok


def test_chart_must_be_projectable():
    with pytest.raises(ChartError):
        _chart(["s = t + u", "z = x", "v = u", "inverse:", "x = z", "t = s - v", "u = v"])


def test_chart_parse_errors():
    with pytest.raises(ValueError):
        _chart(["s = t", "z = x", "inverse:", "x = z", "t = s", "u = v"])
    with pytest.raises(ValueError):
        _chart(["s = t", "z = x", "v = u", "inverse:", "x = z", "t = s", "w = v"])


def test_identity_chart_leaves_equation_unchanged():
    chart = derive_chart(parse_field("d/dx", CTX))
    tr = transform_equation(parse(ACOUSTIC, CTX), chart)
    assert tr.expr == parse("v_zz - v*v_ss", chart.chart_ctx)


def test_boussinesq_chart_from_transcript():
    X = parse_field("t*d/dx + d/dt - 2*t*d/du", CTX)
    chart = _chart(["s = t", "z = x - t^2/2", "v = u + t^2", "inverse:", "x = z + s^2/2", "t = s", "u = v - s^2"])
    assert verify_chart(X, chart).passed
    tr = transform_equation(parse("u_tt + u_xxxx + u*u_xx + u_x^2", CTX), chart)
    want = parse("-2 - v_z + v_z^2 + v*v_zz + v_zzzz + v_ss - 2*s*v_sz", chart.chart_ctx)
    assert normalize(tr.expr - want) == 0


@pytest.mark.parametrize("problem", CHARTED, ids=lambda p: p.id)
def test_round_trip_is_proportional(problem):
    chart = parse_chart(problem.chart_text, problem.ctx)
    for delta in problem.equations:
        back = inverse_transform(transform_equation(delta, chart).expr, chart).expr
        ratio = normalize(back / delta)
        assert not problem.ctx.jets_in(ratio), ratio


@pytest.mark.parametrize("problem", CHARTED, ids=lambda p: p.id)
def test_field_becomes_d_ds(problem):
    """In the chart the prolonged field is the partial derivative d/ds with every v-jet held fixed."""
    chart = parse_chart(problem.chart_text, problem.ctx)
    X = problem.field
    for delta in problem.equations:
        lhs = transform_equation(apply(prolong(X, problem.ctx.jet_order(delta)), delta), chart, clear=False).raw
        rhs = sp.diff(transform_equation(delta, chart, clear=False).raw, chart.s)
        assert normalize(lhs - rhs) == 0


def test_two_acoustic_charts_same_reduction():
    delta = parse(ACOUSTIC, CTX)
    a = next(p for p in CHARTED if p.id == "acoustic-cs")
    b = next(p for p in CHARTED if p.id == "acoustic-alt-chart")
    ca, cb = parse_chart(a.chart_text, CTX), parse_chart(b.chart_text, CTX)
    ta, tb = transform_equation(delta, ca).expr, transform_equation(delta, cb).expr
    assert sp.srepr(ta) != sp.srepr(tb)
    ra, rb = extract_factored_form(ta, ca), extract_factored_form(tb, cb)
    assert len(ra.k_parts) == len(rb.k_parts) == 1
    ratio = normalize(ra.K[0] / rb.K[0])
    assert ratio.is_number and ratio != 0
