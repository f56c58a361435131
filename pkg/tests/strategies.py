"""Hypothesis strategies shared by the property suites."""

import sympy as sp
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from condsym import Context, LiePointField

CTX = Context(("x", "t"), ("u",), ("c",))
X_, T_ = CTX.x
U = CTX.u[0]
C = CTX.params[0]
JETS = [CTX.jet("u", i) for i in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0)]]

# criterion-level suites run at least this many cases
PROPERTY = settings(
    max_examples=1000,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
SMALL = settings(max_examples=60, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow])

small_int = st.integers(-3, 3)
leaf = st.sampled_from([X_, T_, U, C, *JETS[:4]]) | small_int.map(sp.Integer)


def _combine(children):
    return st.one_of(
        st.tuples(children, children).map(lambda p: p[0] + p[1]),
        st.tuples(children, children).map(lambda p: p[0] * p[1]),
        st.tuples(children, st.integers(2, 3)).map(lambda p: p[0] ** p[1]),
    )


polynomials = st.recursive(leaf, _combine, max_leaves=6)


def _with_kernels(children):
    return st.one_of(
        _combine(children),
        children.map(sp.exp),
        children.map(sp.sin),
        children.map(sp.cos),
        st.tuples(children, st.sampled_from([1 + X_**2, X_ + T_ + 1, T_])).map(lambda p: p[0] / p[1]),
    )


expressions = st.recursive(leaf, _with_kernels, max_leaves=5)

# differential functions of order <= 2, polynomial in jets
base_coeff = st.sampled_from([sp.Integer(1), X_, T_, C, X_ * T_, sp.Integer(-2)])
jet_poly = st.lists(
    st.tuples(base_coeff, st.sampled_from([sp.Integer(1), U, *JETS[:5]]), st.sampled_from([sp.Integer(1), U, *JETS[:3]])),
    min_size=1,
    max_size=4,
).map(lambda terms: sp.Add(*[a * b * c for a, b, c in terms]))

lin = st.tuples(small_int, small_int, small_int).map(lambda c: c[0] + c[1] * X_ + c[2] * T_)


@st.composite
def fields(draw, projectable_xi=lin):
    xi = (draw(projectable_xi), draw(projectable_xi))
    phi = draw(lin) + draw(small_int) * U + draw(st.sampled_from([0, 1])) * draw(small_int) * X_ * U
    return LiePointField(CTX, xi, (phi,))


@st.composite
def constant_xi_pairs(draw):
    """(X, Delta) with constant xi: every verdict of the lattice occurs."""
    xi = (draw(st.sampled_from([1, 2, -1])), draw(small_int))
    kind = draw(st.sampled_from(["translation", "scaling", "generic"]))
    if kind == "translation":
        phi = sp.Integer(0)
    elif kind == "scaling":
        phi = draw(small_int) * U
    else:
        phi = draw(lin) + draw(small_int) * U
    X = LiePointField(CTX, xi, (phi,))
    jets = JETS[:5]
    delta = JETS[1] + sum(draw(small_int) * j for j in draw(st.lists(st.sampled_from(jets), max_size=2)))
    delta += draw(small_int) * draw(st.sampled_from([U * JETS[0], U, JETS[2]]))
    delta += draw(st.sampled_from([0, 0, 0, 1])) * draw(st.sampled_from([X_, T_, X_ * U]))
    return X, delta
