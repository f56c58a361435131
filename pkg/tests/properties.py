"""Randomized property suites, 1000 cases each.

Run from the acceptance test (criterion 12) so that each suite executes once
per session; the module is not collected on its own.
"""

import sympy as sp
from hypothesis import given

from condsym import apply, check_exact_symmetry, check_invariance, check_true_cs, normalize, prolong
from condsym.fields import apply_evolutionary, characteristic
from condsym.jets import total_derivative
from strategies import CTX, PROPERTY, constant_xi_pairs, expressions, fields, jet_poly, small_int

ORDER = {"invariant": 3, "exact": 2, "trueCS": 1}


@PROPERTY
@given(expressions)
def prop_normalize_idempotent(e):
    n = normalize(e)
    assert normalize(n) == n


@PROPERTY
@given(jet_poly)
def prop_total_derivatives_commute(e):
    dxt = total_derivative(total_derivative(e, "x", CTX), "t", CTX)
    dtx = total_derivative(total_derivative(e, "t", CTX), "x", CTX)
    assert normalize(dxt - dtx) == 0


@PROPERTY
@given(fields(), fields(), small_int, jet_poly)
def prop_prolongation_linear(X, Y, a, e):
    lhs = apply(prolong(X + Y.scaled(sp.Integer(a)), 2), e)
    rhs = apply(prolong(X, 2), e) + a * apply(prolong(Y, 2), e)
    assert normalize(lhs - rhs) == 0


@PROPERTY
@given(fields(), jet_poly)
def prop_evolutionary_identity(X, e):
    # pr X = pr X_Q + xi_i D_i
    lhs = apply(prolong(X, 2), e)
    rhs = apply_evolutionary(X, e) + sum(c * total_derivative(e, n, CTX) for c, n in zip(X.xi, CTX.independents))
    assert normalize(lhs - rhs) == 0


@PROPERTY
@given(constant_xi_pairs())
def prop_verdict_monotone(pair):
    """invariant => exact => trueCS on every random pair."""
    X, delta = pair
    inv = check_invariance(X, delta)
    ex = check_exact_symmetry(X, delta)
    if inv.verdict == "invariant":
        assert ex.verdict == "exact"
    if ex.verdict == "exact":
        assert check_true_cs(X, delta).verdict == "trueCS"
    if characteristic(X)[0] == 0:
        assert inv.verdict == "invariant"
