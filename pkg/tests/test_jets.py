import pytest
from hypothesis import given

from condsym import Context, normalize, parse, substitute
from condsym.fields import characteristic, parse_field
from condsym.jets import DerivativeRanking, leading_jet, multi_indices, prolong_constraint, solve_for, total_derivative
from strategies import CTX, SMALL, jet_poly, small_int

J = CTX.jet


def test_total_derivative_examples():
    assert total_derivative(CTX.u[0], "x", CTX) == J("u", (1, 0))
    assert total_derivative(parse("u_x^2", CTX), "t", CTX) == 2 * J("u", (1, 0)) * J("u", (1, 1))
    assert total_derivative(parse("x*u_x", CTX), "x", CTX) == J("u", (1, 0)) + CTX.x[0] * J("u", (2, 0))


def test_total_derivative_non_polynomial():
    e = parse("exp(x*u)/(1 + t)", CTX)
    d = total_derivative(e, "x", CTX)
    want = parse("(u + x*u_x)*exp(x*u)/(1 + t)", CTX)
    assert normalize(d - want) == 0


def test_unknown_direction():
    with pytest.raises(ValueError):
        total_derivative(CTX.u[0], "y", CTX)


def test_leading_jet():
    r = DerivativeRanking(CTX)
    assert leading_jet(parse("u_t - u_xx", CTX), r) == J("u", (2, 0))
    assert leading_jet(parse("u_tt + u_xxxx + u*u_xx + u_x^2", CTX), r) == J("u", (4, 0))
    with pytest.raises(ValueError):
        leading_jet(parse("x + 1", CTX), r)


def test_ranking_priority_breaks_ties():
    rx = DerivativeRanking(CTX, ("x", "t"))
    rt = DerivativeRanking(CTX, ("t", "x"))
    e = parse("u_xx + u_tt + u_xt", CTX)
    assert leading_jet(e, rx) == J("u", (2, 0))
    assert leading_jet(e, rt) == J("u", (0, 2))


def test_solve_for():
    assert solve_for(parse("u_t - u_xx", CTX), J("u", (0, 1))) == J("u", (2, 0))
    b = parse("u_tt + u_xxxx + u*u_xx + u_x^2", CTX)
    assert solve_for(b, J("u", (4, 0))) == parse("-u_tt - u*u_xx - u_x^2", CTX)
    with pytest.raises(ValueError):
        solve_for(parse("u_x^2", CTX), J("u", (1, 0)))


def test_prolong_constraint_examples():
    cc = Context(("s", "z"), ("v",), chart=True)
    vs = cc.jet("v", (1, 0))
    assert prolong_constraint(vs, 1, cc) == [vs, cc.jet("v", (2, 0)), cc.jet("v", (1, 1))]
    assert prolong_constraint(J("u", (1, 0)), 0, CTX) == [J("u", (1, 0))]
    heat = Context(("x", "t"), ("u",))
    Q = characteristic(parse_field("2*t*d/dx - x*u*d/du", heat))[0]
    assert len(prolong_constraint(Q, 2, heat)) == 6


def test_multi_indices_count():
    assert len(list(multi_indices(2, 3))) == 4
    assert len(list(multi_indices(3, 2))) == 6


@SMALL
@given(jet_poly, jet_poly, small_int)
def test_total_derivative_linear_and_leibniz(f, g, a):
    for n in ("x", "t"):
        D = lambda e: total_derivative(e, n, CTX)
        assert normalize(D(f + a * g) - D(f) - a * D(g)) == 0
        assert normalize(D(f * g) - D(f) * g - f * D(g)) == 0


@SMALL
@given(jet_poly)
def test_solve_for_substitution_vanishes(e):
    r = DerivativeRanking(CTX)
    try:
        j = leading_jet(e, r)
        sol = solve_for(e, j)
    except ValueError:
        return
    assert normalize(substitute(e, {j: sol}, CTX)) == 0
