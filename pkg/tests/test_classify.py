import pytest
import sympy as sp
from hypothesis import given

from condsym import (
    Context,
    LiePointField,
    check_augmented_symmetry,
    check_exact_symmetry,
    check_invariance,
    check_partial_symmetry,
    check_true_cs,
    classify,
    classify_weak_cs,
    parse,
    parse_field,
)
from condsym.classify import iterate_field, match_multipliers
from condsym.corpus import load_corpus
from condsym.jets import prolong_constraint, total_derivative
from condsym.fields import characteristic
from strategies import SMALL, constant_xi_pairs

XT = Context(("x", "t"), ("u",))
HEAT, ACOUSTIC, KDV = "u_t - u_xx", "u_tt - u*u_xx", "u_t + u_xxx + u*u_x"
BOUSS = "u_tt + u_xxxx + u*u_xx + u_x^2"
CORPUS = {p.id: p for p in load_corpus()}


def _case(eq, field, ctx=XT):
    return parse_field(field, ctx), parse(eq, ctx)


@pytest.mark.parametrize(
    "eq,field,label",
    [
        (HEAT, "d/dx", "invariant"),
        (HEAT, "2*t*d/dx - x*u*d/du", "exact"),
        (ACOUSTIC, "2*t*d/dx + d/dt + 8*t*d/du", "trueCS"),
        (BOUSS, "t*d/dx + d/dt - 2*t*d/du", "trueCS"),
        (KDV, "2*x*d/dx + t*d/dt + u*d/du", "weakCS(2)"),
        (HEAT, "u*d/du", "exact"),
    ],
)
def test_classify_examples(eq, field, label):
    X, d = _case(eq, field)
    assert classify(X, d).label() == label


def test_exact_witness_is_multiplier():
    X, d = _case(HEAT, "2*t*d/dx - x*u*d/du")
    rep = check_exact_symmetry(X, d)
    assert rep.path == "substitution" and rep.witnesses["G"] == [[-XT.x[0]]]
    inv = check_invariance(X, d)
    assert inv.verdict != "invariant"


def test_translation_has_zero_multiplier():
    X, d = _case(HEAT, "d/dx")
    assert check_exact_symmetry(X, d).witnesses["G"] == [[0]]


def test_zero_field_is_invariant():
    X = LiePointField(XT, (0, 0), (0,))
    assert check_invariance(X, parse(BOUSS, XT)).verdict == "invariant"


def test_single_equations_of_system_are_not_exact():
    p = CORPUS["rotation-system"]
    assert check_exact_symmetry(p.field, p.equations).verdict == "exact"
    for e in p.equations[:1]:
        assert check_exact_symmetry(p.field, [e]).verdict == "notExact"


def test_conditional_needs_single_equation():
    p = CORPUS["rotation-system"]
    with pytest.raises(ValueError):
        check_true_cs(p.field, p.equations)


@pytest.mark.parametrize("pid", ["heat-exact-multiplier", "heat-translation", "kdv-scaling", "boussinesq-dilation", "rotation-system"])
def test_matching_path_agrees_with_substitution(pid):
    p = CORPUS[pid]
    a = check_exact_symmetry(p.field, p.equations)
    b = check_exact_symmetry(p.field, p.equations, path="matching")
    assert b.path == "matching"
    if a.verdict == "exact":
        assert b.verdict == "exact"
    else:
        assert b.verdict in ("undetermined", "notExact")


def test_failed_ansatz_is_undetermined_not_false():
    X, d = _case(KDV, "2*x*d/dx + t*d/dt + u*d/du")
    rep = check_exact_symmetry(X, d, path="matching", degree=0)
    assert rep.verdict == "undetermined" and not rep.holds
    assert "does not disprove" in rep.notes[0]


def test_match_multipliers_finds_combination():
    e1, e2 = parse("u_t - u_xx", XT), parse("u_x", XT)
    target = parse("x*(u_t - u_xx) + u*u_x", XT)
    G = match_multipliers(target, [e1, e2], XT)
    assert G is not None
    assert sp.simplify(G[0] * e1 + G[1] * e2 - target) == 0
    assert match_multipliers(parse("u_xxx", XT), [e1], XT, degree=0) is None


def test_true_cs_chart_path_agrees():
    p = CORPUS["acoustic-cs"]
    from condsym import parse_chart

    chart = parse_chart(p.chart_text, p.ctx)
    rep = check_true_cs(p.field, p.equations, chart=chart)
    assert rep.verdict == "trueCS" and rep.witnesses["chart.ok"] is True
    assert not any("disagrees" in n for n in rep.notes)


def test_rescaled_field_same_true_cs_verdict():
    d = parse(ACOUSTIC, XT)
    a = parse_field("2*t*d/dx + d/dt + 8*t*d/du", XT)
    assert check_true_cs(a, d).verdict == check_true_cs(a.scaled(1 / (2 * XT.x[1])), d).verdict == "trueCS"


def test_true_cs_implies_sigma_one():
    X, d = _case(ACOUSTIC, "2*t*d/dx + d/dt + 8*t*d/du")
    assert classify_weak_cs(X, d).sigma == 1


def test_sigma_conventions_boussinesq():
    p = CORPUS["boussinesq-weak-order3"]
    rep = classify_weak_cs(p.field, p.equations)
    assert rep.sigma == 3 and rep.witnesses["sigma_with_q"] == 2


def test_sigma_max_bounds_search():
    p = CORPUS["boussinesq-weak-order3"]
    rep = classify_weak_cs(p.field, p.equations, sigma_max=2)
    assert rep.verdict in ("weakCS", "noneUpTo")
    with pytest.raises(ValueError):
        classify_weak_cs(p.field, p.equations, sigma_max=0)


def test_augmented_with_invariant_surface_matches_true_cs():
    X, d = _case(ACOUSTIC, "2*t*d/dx + d/dt + 8*t*d/du")
    Q = characteristic(X)[0]
    E = prolong_constraint(Q, 2, XT)
    assert check_augmented_symmetry(X, d, E).verdict == "exact"


def test_augmented_kdv_with_first_iterate():
    X, d = _case(KDV, "2*x*d/dx + t*d/dt + u*d/du")
    chain = iterate_field(X, d, 1)
    assert chain[1] == parse("-5*u_xxx", XT)
    rep = check_augmented_symmetry(X, d, [chain[1], total_derivative(chain[1], "x", XT)])
    assert rep.verdict == "exact" and rep.witnesses["residuals"] == [0, 0, 0]
    with pytest.raises(ValueError):
        check_augmented_symmetry(X, d, [])


def test_augmented_with_delta_alone_is_exact_test():
    X, d = _case(HEAT, "2*t*d/dx - x*u*d/du")
    assert check_augmented_symmetry(X, d, [d]).verdict == "exact"


def test_partial_symmetry_kdv():
    X, d = _case(KDV, "2*x*d/dx + t*d/dt + u*d/du")
    u = parse("x/t", XT)
    rep = check_partial_symmetry(X, d, candidates=[u, parse("x", XT)])
    assert rep.order == 2 and len(rep.system) == 2
    assert rep.candidates[0][2] is True and rep.candidates[1][2] is False


@SMALL
@given(constant_xi_pairs())
def test_lattice_is_monotone(pair):
    X, d = pair
    inv, ex, tcs = check_invariance(X, d), check_exact_symmetry(X, d), check_true_cs(X, d)
    if inv.verdict == "invariant":
        assert ex.verdict == "exact"
    if ex.verdict == "exact":
        assert tcs.verdict == "trueCS"
    if tcs.verdict == "trueCS":
        assert classify_weak_cs(X, d).sigma == 1


def test_report_serialises():
    X, d = _case(HEAT, "2*t*d/dx - x*u*d/du")
    out = classify(X, d).as_dict()
    assert out["verdict"] == "exact" and out["witnesses"]["G"] == [["-x"]]
