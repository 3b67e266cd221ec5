import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from families import GeometricFamily, random_geometric

from artifact import algebra as alg
from artifact import stepmap, transfinite
from artifact.errors import NotCommuting, NotLimit
from artifact.ordinal import DyadicTower, GeometricLadder, idx
from artifact.transfinite import Family, finite_family

LOG2_SQUARED = 0.480453013918201424667102526327


def ladder_family(fn, kind=None):
    kind = kind or alg.AlgebraKind.scalar()
    s = GeometricLadder(0.0, 1.0)

    def gen(i):
        s.validate(i)
        return fn(i.coords[0])

    return Family(s, kind, gen, None, None, "ladder")


def test_geometric_ladder_sum():
    res = transfinite.transfinite_sum(ladder_family(lambda n: alg.scalar(0.5**n)), 1e-10)
    assert abs(float(res.value.data) - 2.0) < 1e-10
    assert not res.truncated
    assert res.achieved_tol <= 1e-10


def test_zero_family_sums_to_zero_and_multiplies_to_identity():
    g = GeometricFamily(alg.matrix([[0.0, 0.0], [0.0, 0.0]]), 0.5, 0.5)
    assert transfinite.transfinite_sum(g.family()).value == alg.zero(g.kind)
    prod = transfinite.transfinite_product(transfinite.exp_family(g.family())).value
    assert prod == alg.identity(g.kind)


def test_top_member_is_included():
    f = finite_family([0.0, 0.5, 1.0], [alg.scalar(1.0), alg.scalar(2.0)], top=alg.scalar(4.0))
    assert float(transfinite.transfinite_sum(f).value.data) == 7.0
    assert float(transfinite.transfinite_product(f).value.data) == 8.0


def test_finite_product_multiplies_new_factors_on_the_left():
    a = alg.matrix([[1.0, 1.0], [0.0, 1.0]])
    b = alg.matrix([[1.0, 0.0], [1.0, 1.0]])
    f = finite_family([0.0, 0.5, 1.0], [a, b])
    assert transfinite.transfinite_product(f).value == b * a
    g = finite_family([0.0, 0.5, 1.0], [b, a])
    assert transfinite.transfinite_product(g).value == a * b
    assert b * a != a * b


def test_exp_product_of_double_series():
    f = stepmap.catalog("ex201").values_family()
    s = transfinite.transfinite_sum(f, 1e-9)
    assert abs(float(s.value.data) - LOG2_SQUARED) < 1e-9
    p = transfinite.transfinite_product(transfinite.exp_family(f), 1e-9)
    assert abs(float(p.value.data) - math.exp(LOG2_SQUARED)) < 1e-8
    assert s.limit_points_visited > 0


def test_double_series_is_not_absolutely_summable():
    v = transfinite.abs_summable(stepmap.catalog("ex201").values_family(), 1e-8, 2 * 10**5)
    assert v.verdict == "DivergenceWitness"
    assert "grow" in v.witness


def test_abs_summable_geometric():
    g = GeometricFamily(alg.scalar(1.0), 0.5, 0.5)
    v = transfinite.abs_summable(g.family(), 1e-10)
    assert v.verdict == "Convergent"
    assert abs(v.value - 4.0) < 1e-9
    assert v.details["cross_check"]


def test_exp_sum_identity_for_commuting_diagonals():
    s = DyadicTower(1, 0.0, 1.0)
    kind = alg.AlgebraKind.diag(2)

    def gen(i):
        n0, n1 = i.coords
        return alg.diag([2.0 ** -(n0 + n1 + 1), 3.0 ** -(n0 + n1 + 1)])

    prod, expsum = transfinite.check_exp_sum_identity(Family(s, kind, gen), 1e-10)
    assert alg.dist(prod, expsum) < 1e-9
    # sum of 2^-(n0+n1+1) is 2, of 3^-(n0+n1+1) is 3/4
    assert alg.dist(expsum, alg.diag([math.exp(2.0), math.exp(0.75)])) < 1e-8


def test_exp_sum_identity_rejects_non_commuting_members():
    a = alg.matrix([[0.0, 1.0], [0.0, 0.0]])
    b = alg.matrix([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(NotCommuting):
        transfinite.check_exp_sum_identity(finite_family([0.0, 0.5, 1.0], [a, b]))


def test_tail_limit_check():
    g = GeometricFamily(alg.scalar(1.0), 0.5, 0.5)
    norms = transfinite.tail_limit_check(g.family(), idx(1, 0), 8)
    assert norms == [0.5**n for n in range(8)]
    with pytest.raises(NotLimit):
        transfinite.tail_limit_check(g.family(), idx(1, 1))


def test_budget_truncation_is_reported():
    f = ladder_family(lambda n: alg.scalar(1.0 / (n + 1)))
    res = transfinite.transfinite_sum(f, 1e-8, 2000)
    assert res.truncated
    assert res.achieved_tol == math.inf
    assert res.verdict == "inconclusive"


def test_results_are_deterministic():
    f = stepmap.catalog("ex201").values_family()
    a = transfinite.transfinite_sum(f, 1e-8)
    b = transfinite.transfinite_sum(f, 1e-8)
    assert a.to_json() == b.to_json()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_geometric_sum_matches_closed_form(seed):
    g = random_geometric(np.random.default_rng(seed), "matrix", 2)
    res = transfinite.transfinite_sum(g.family(), 1e-9)
    assert res.achieved_tol <= 1e-9
    assert alg.dist(res.value, g.exact_sum) < 2e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_one_minus_product_positive_when_summable(seed):
    g = random_geometric(np.random.default_rng(seed), "scalar", scale=0.5)
    prod, v = transfinite.check_one_minus_product(g.family(), 1e-9)
    assert v.verdict == "Convergent"
    assert 0.0 < prod < 1.0
    assert 1.0 - v.value <= prod + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_product_norm_bounded_by_exp_of_norm_sum(seed):
    g = random_geometric(np.random.default_rng(seed), "matrix", 3)
    prod = transfinite.transfinite_product(transfinite.shift_family(g.family(), 1.0), 1e-9).value
    assert prod.norm() <= math.exp(g.exact_norm_sum) * (1 + 1e-8)
