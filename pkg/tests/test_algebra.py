import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from artifact import algebra as alg
from artifact.algebra import AlgebraElement, AlgebraKind
from artifact.errors import KindMismatch, OutOfDomain, Singular

M3 = AlgebraKind.matrix(3)
entries = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


def mat(a):
    return AlgebraElement(M3, a)


matrices = arrays(np.float64, (3, 3), elements=entries).map(mat)


def scaled(x, r):
    n = x.norm()
    return x if n == 0 else x * (r / n)


def test_identity_has_unit_norm():
    for kind in (AlgebraKind.scalar(), AlgebraKind.matrix(4), AlgebraKind.diag(5)):
        assert alg.identity(kind).norm() == 1.0
        assert alg.zero(kind).norm() == 0.0


def test_matrix_norm_is_max_row_sum():
    x = alg.matrix([[1, -2], [3, 0.5]])
    assert x.norm() == 3.5


def test_diag_multiplies_coordinatewise():
    x = alg.diag([1, 2, 3])
    y = alg.diag([4, -1, 0.5])
    assert (x * y) == alg.diag([4, -2, 1.5])
    assert (x * y).norm() == 4.0


def test_kind_mismatch():
    with pytest.raises(KindMismatch):
        alg.scalar(1.0) + alg.matrix([[1.0]])


def test_nonfinite_entries_rejected():
    with pytest.raises(ValueError):
        alg.scalar(math.inf)


def test_exp_of_zero_and_scalar():
    assert alg.exp(alg.zero(M3)) == alg.identity(M3)
    assert abs(float(alg.exp(alg.scalar(1.0)).data) - math.e) < 4e-15


def test_exp_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.normal(size=(4, 4)) * rng.uniform(0.1, 3)
        got = alg.exp(alg.matrix(a)).data
        want = scipy.linalg.expm(a)
        assert np.abs(got - want).max() < 1e-12 * max(1.0, np.abs(want).max())


def test_log_outside_ball_raises():
    with pytest.raises(OutOfDomain):
        alg.log(alg.scalar(2.5))


def test_singular_inverse_raises():
    with pytest.raises(Singular):
        alg.inverse(alg.matrix([[1, 2], [2, 4]]))
    with pytest.raises(Singular):
        alg.inverse(alg.diag([1, 0]))
    assert not alg.is_invertible(alg.matrix([[1, 2], [2, 4]]))


def test_json_round_trip():
    for x in (alg.scalar(0.25), alg.matrix([[1, 2], [3, 4]]), alg.diag([1, -1, 0.5])):
        obj = x.to_json()
        assert set(obj) == {"kind", "n", "data"}
        assert alg.from_json(obj) == x


def test_elements_are_immutable():
    x = alg.matrix([[1, 0], [0, 1]])
    with pytest.raises(AttributeError):
        x.data = None
    with pytest.raises(ValueError):
        x.data[0, 0] = 5.0


@settings(max_examples=200, deadline=None)
@given(matrices, st.floats(0.0, 5.0))
def test_exp_norm_bounds(x, r):
    x = scaled(x, r)
    e = alg.exp(x)
    nx = x.norm()
    assert e.norm() <= math.exp(nx) * (1 + 1e-12)
    assert alg.dist(e, alg.identity(M3)) <= nx * math.exp(nx) * (1 + 1e-12) + 1e-15


@settings(max_examples=100, deadline=None)
@given(matrices, st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_exp_of_commuting_sum(x, p, q):
    x = scaled(x, 1.0)
    ident = alg.identity(M3)

    def poly(c):
        return ident * c[0] + x * c[1] + (x * x) * c[2]

    a, b = poly(p), poly(q)
    lhs = alg.exp(a + b)
    rhs = alg.exp(a) * alg.exp(b)
    assert alg.dist(lhs, rhs) <= 1e-9 * max(1.0, lhs.norm())


@settings(max_examples=200, deadline=None)
@given(matrices)
def test_inverse_of_inverse(x):
    y = alg.identity(M3) * 3.0 + x
    assert alg.dist(alg.inverse(alg.inverse(y)), y) < 1e-10


@settings(max_examples=200, deadline=None)
@given(matrices, st.floats(0.0, 0.95))
def test_exp_log_round_trip(x, r):
    y = alg.identity(M3) + scaled(x, r)
    assert alg.dist(alg.exp(alg.log(y)), y) < 1e-9


def test_norm_submultiplicative_random_pairs():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        x = alg.matrix(rng.normal(size=(3, 3)))
        y = alg.matrix(rng.normal(size=(3, 3)))
        assert (x * y).norm() <= x.norm() * y.norm() + 1e-14


def test_commutator_norm():
    x = alg.matrix([[0, 1], [0, 0]])
    y = alg.matrix([[0, 0], [1, 0]])
    assert alg.commutator_norm(x, y) == 1.0
    assert alg.commutator_norm(x, x) == 0.0
