import math
import random

import numpy as np
import pytest

from condsym.corpus import corpus_dir
from condsym.expr import ParseError
from condsym.oracle import (
    OdeFactorizationProblem,
    fundamental_matrix,
    integrate_system,
    liouville_check,
    parse_oracle_problem,
    random_problem,
    self_convergence,
    verify_factorization,
)

FIXTURES = sorted((corpus_dir() / "oracle").glob("*.ode"))


def _load(name):
    return parse_oracle_problem((corpus_dir() / "oracle" / name).read_text())


def test_constant_scalar_closed_form():
    p = _load("constant-scalar.ode")
    traj = integrate_system(p)
    fm = fundamental_matrix(p, traj)
    assert np.max(np.abs(traj.y[:, 0] - np.exp(0.3 * traj.s))) < 1e-9
    assert np.max(np.abs(fm.S[:, 0, 0] - np.exp(-0.3 * fm.s))) < 1e-9


def test_rotation_preserves_norm_and_orthogonality():
    p = _load("rotation.ode")
    traj = integrate_system(p)
    fm = fundamental_matrix(p, traj)
    norms = np.linalg.norm(traj.y, axis=1)
    assert np.max(np.abs(norms - np.linalg.norm(p.y0))) < 1e-8
    for S in fm.S:
        assert np.max(np.abs(S @ S.T - np.eye(2))) < 1e-8


@pytest.mark.parametrize("path", FIXTURES, ids=lambda f: f.stem)
def test_fixture_expectations(path):
    p = parse_oracle_problem(path.read_text())
    assert verify_factorization(p).passed == (p.expect == "pass")


def test_nonlinear_accuracy_checks():
    p = _load("nonlinear.ode")
    assert self_convergence(p) < 1e-7
    assert liouville_check(p) < 1e-6
    rep = verify_factorization(p)
    assert rep.SR_residual < 1e-8 and rep.kappa_residual < p.threshold


def test_convergence_improves_with_tolerance():
    p = _load("nonlinear.ode")
    coarse = verify_factorization(p.with_tolerances(1e3)).kappa_residual
    fine = verify_factorization(p).kappa_residual
    assert fine <= coarse


def test_explicit_sign_flip_fails():
    p = _load("nonlinear.ode")
    assert not verify_factorization(p, sign=1.0).passed


@pytest.mark.parametrize("seed", range(5))
def test_random_problems(seed):
    rng = random.Random(seed)
    p = random_problem(rng, nonlinear=seed % 2 == 0)
    rep = verify_factorization(p)
    if not rep.notes:
        assert rep.passed, rep.as_dict()


def test_callable_problem():
    p = OdeFactorizationProblem(1, lambda s, y: np.array([[math.cos(s)]]), [2.0], 1.5)
    traj = integrate_system(p)
    assert abs(traj.y[-1, 0] - 2.0 * math.exp(math.sin(1.5))) < 1e-8
    assert verify_factorization(p).passed


@pytest.mark.parametrize(
    "text",
    [
        "G: 1\ny0: 1\ns_max: 1",
        "dimension: 2\nG: 1, 0\ny0: 1, 1\ns_max: 1",
        "dimension: 1\nG: 1\ns_max: 1",
        "dimension: 1\nG: 1\ny0: 1\ns_max: 1\ncolour: red",
        "dimension: 1\nG: 1\ny0: 1\ns_max: 1\nexpect: maybe",
        "dimension: 1\nG 1",
    ],
)
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_oracle_problem(text)


def test_invalid_problem_values():
    with pytest.raises(ValueError):
        parse_oracle_problem("dimension: 1\nG: 1\ny0: 1\ns_max: -1")
    with pytest.raises(ValueError):
        parse_oracle_problem("dimension: 2\nG: 1, 0\nG: 0\ny0: 1, 1\ns_max: 1")
