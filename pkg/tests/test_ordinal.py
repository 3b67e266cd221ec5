import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.errors import InvalidIndex, NoSuccessor, NotLimit
from artifact.ordinal import TOP, DyadicTower, FiniteSet, GeometricLadder, OrdinalIndex, idx, set_from_json

LADDER = GeometricLadder(0.0, 1.0)
TOWER1 = DyadicTower(1, 0.0, 1.0)
TOWER2 = DyadicTower(2, 0.0, 1.0)


def test_ladder_values():
    assert [LADDER.value(idx(n)) for n in range(4)] == [0.0, 0.5, 0.75, 0.875]
    assert LADDER.value(TOP) == 1.0
    assert LADDER.gap(idx(3)) == 1 / 16


def test_depth_one_tower_values():
    assert TOWER1.value(idx(0, 0)) == 0.0
    assert TOWER1.value(idx(0, 1)) == 0.25
    assert TOWER1.value(idx(1, 0)) == 0.5
    assert TOWER1.value(idx(1, 1)) == 0.625
    assert TOWER1.is_limit(idx(1, 0))
    assert not TOWER1.is_limit(idx(1, 1))
    assert not TOWER1.is_limit(idx(0, 0))


def test_finite_set():
    s = FiniteSet((0.0, 0.3, 1.0))
    assert s.successor(idx(0)) == idx(1)
    assert s.successor(idx(1)).top
    assert s.locate(0.3) == idx(1)
    assert s.locate(1.0).top
    with pytest.raises(NoSuccessor):
        s.successor(TOP)


def test_invalid_index():
    with pytest.raises(InvalidIndex):
        TOWER1.value(idx(1))
    with pytest.raises(InvalidIndex):
        TOWER1.predecessor(idx(1, 0))


def test_approach_requires_limit():
    assert TOWER1.approach(idx(1, 0), 3) == idx(0, 3)
    with pytest.raises(NotLimit):
        TOWER1.approach(idx(1, 1), 3)


def test_json_round_trip():
    for s in (FiniteSet((0.0, 0.5, 1.0)), LADDER, TOWER2):
        assert set_from_json(s.to_json()) == s
    assert set_from_json({"type": "tower", "m": 1, "a": 0, "b": 2}).value(idx(1, 0)) == 1.0


def test_enumerate_prefix_flags_collisions():
    pts, truncated = LADDER.enumerate_prefix(1.0, 10**6)
    assert truncated
    assert len(pts) <= 53
    values = [LADDER.value(p) for p in pts]
    assert all(x < y for x, y in zip(values, values[1:]))


def test_enumerate_prefix_budget():
    pts, truncated = TOWER1.enumerate_prefix(0.5, 5)
    assert truncated and len(pts) == 5


indices1 = st.tuples(st.integers(0, 25), st.integers(0, 25)).map(lambda c: idx(*c))
indices2 = st.tuples(st.integers(0, 15), st.integers(0, 15), st.integers(0, 15)).map(lambda c: idx(*c))


@settings(max_examples=300, deadline=None)
@given(st.one_of(indices1.map(lambda i: (TOWER1, i)), indices2.map(lambda i: (TOWER2, i)),
                 st.integers(0, 45).map(lambda n: (LADDER, idx(n)))))
def test_successor_leaves_no_gap(pair):
    s, i = pair
    nxt = s.successor(i)
    lo, hi = s.value(i), s.value(nxt)
    assert lo < hi
    pts, _ = s.enumerate_prefix(hi, 3, start=i)
    assert pts[0] == i
    assert all(s.value(p) >= hi or p == i for p in pts)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.integers(0, 12))
def test_limit_points_are_approached(n0, n1):
    gamma = idx(n0, 0)
    v = TOWER1.value(gamma)
    for k in range(1, 41):
        m = 0
        while TOWER1.value(TOWER1.approach(gamma, m)) <= v - 2.0**-k:
            m += 1
        below = TOWER1.value(TOWER1.approach(gamma, m))
        assert v - 2.0**-k < below < v


def test_locate_many_matches_locate():
    rng = np.random.default_rng(5)
    for s in (LADDER, TOWER1, TOWER2, FiniteSet((0.0, 0.1, 0.7, 1.0))):
        ts = np.concatenate([rng.uniform(0, 1, 2000), [0.0, 1.0, 0.5, 0.75]])
        got = s.locate_many(ts)
        for t, row in zip(ts, got):
            i = s.locate(float(t))
            assert (row[0] < 0) if i.top else (tuple(row) == i.coords)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1.0))
def test_locate_brackets_point(t):
    i = TOWER2.locate(t)
    if i.top:
        assert t == 1.0
        return
    assert TOWER2.value(i) <= t
    if not TOWER2._collides(i):
        assert t < TOWER2.value(TOWER2.successor(i))


def test_ordering_of_indices():
    assert idx(0, 5) < idx(1, 0) < TOP
    assert OrdinalIndex((), True) == TOP
