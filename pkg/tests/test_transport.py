import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import algebra as alg
from artifact import stepmap, transport
from artifact.errors import InvalidIndex, NotIdempotent, OffSurface
from artifact.transport import ProjectionPath


def plane_projection(n):
    n = np.asarray(n, dtype=float)
    return transport.tangent_projection(n / np.linalg.norm(n))


def reversed_path(P):
    return ProjectionPath(P.kind, P.a, P.b, lambda t: P.fn(P.a + P.b - t),
                          lambda ts: P.eval_many(P.a + P.b - np.asarray(ts)), f"reverse({P.name})")


def test_projection_field_examples():
    north = transport.projection_field(transport.Sphere(), lambda t: np.tile([0.0, 0.0, 1.0], (len(t), 1)))
    assert north(0.3) == alg.matrix(np.diag([1.0, 1.0, 0.0]))
    equator = transport.projection_field(transport.Sphere(), lambda t: np.tile([1.0, 0.0, 0.0], (len(t), 1)))
    assert equator(0.0) == alg.matrix(np.eye(3) - np.outer([1, 0, 0], [1, 0, 0]))
    line = transport.projection_field(transport.Cylinder(),
                                      lambda t: np.stack([np.ones_like(t), np.zeros_like(t), t], axis=-1))
    vals = line.eval_many(np.linspace(0, 1, 9))
    assert np.all(vals == vals[0])
    with pytest.raises(OffSurface):
        transport.projection_field(transport.Sphere(), lambda t: np.tile([2.0, 0.0, 0.0], (len(t), 1)))(0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.1, 2.0))
def test_sampled_projections_are_idempotent(angle, pitch):
    ts = np.linspace(0, 1, 257)
    assert transport.latitude_path(angle).check_idempotent(ts) <= 1e-12
    assert transport.helix_path(pitch).check_idempotent(ts) <= 1e-12


def test_constant_projection():
    P = plane_projection([1.0, 2.0, 2.0])
    path = transport.constant_path(P)
    for m in (1, 2, 7):
        assert alg.dist(transport.haahti_product(path, np.linspace(0, 1, m + 1)), P) < 1e-14
    rep = transport.haahti_refinement(path, 1e-10, 6)
    assert rep.converged and alg.dist(rep.limit, P) < 1e-14
    assert alg.dist(transport.transport_ode_oracle(path, 64), P) == 0.0
    assert transport.scalar_invariance_check(path, [2.0, -1.0, 0.0], [0.0, 1.0, -1.0], report=rep) < 1e-13
    left, right, d = transport.haahti_vs_stieltjes(stepmap.constant_step(P))
    assert d < 1e-14


def test_polyhedral_transport_order():
    P0, P1 = plane_projection([1, 0, 0]), plane_projection([1, 1, 0])
    assert transport.polyhedral_transport([P0]) == P0
    assert transport.polyhedral_transport([P0, P1]) == P1 * P0
    with pytest.raises(NotIdempotent):
        transport.polyhedral_transport([alg.matrix(np.eye(3) * 2)])


def test_cube_corner_commutes_octahedron_corner_does_not():
    cube = transport.cube_corner_faces()
    cp = [cube.projection(k) for k in range(3)]
    fwd = transport.polyhedral_transport(cp)
    assert fwd == transport.polyhedral_transport(cp[::-1])
    assert fwd == alg.matrix(np.zeros((3, 3)))
    octa = transport.octa_corner_faces()
    op = [octa.projection(k) for k in range(3)]
    gap = alg.dist(transport.polyhedral_transport(op), transport.polyhedral_transport(op[::-1]))
    assert gap > 0.01


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.5), st.integers(1, 12))
def test_alternating_planes_decay_like_cosine(theta, count):
    # two planes through the z axis at angle theta; start with a unit vector of the first plane
    # orthogonal to the common line
    P1 = plane_projection([1.0, 0.0, 0.0])
    P2 = plane_projection([math.cos(theta), math.sin(theta), 0.0])
    v = np.array([0.0, 1.0, 0.0])
    factors = [P2 if k % 2 == 0 else P1 for k in range(count)]
    T = transport.polyhedral_transport(factors)
    assert abs(np.linalg.norm(T.data @ v) - math.cos(theta) ** count) < 1e-12


def test_smooth_paths_against_oracle():
    for P in (transport.latitude_path(0.7), transport.helix_path(0.5)):
        rep = transport.haahti_refinement(P, 1e-8, 15)
        assert alg.dist(rep.limit, transport.transport_ode_oracle(P)) < 1e-4


def test_reverse_transport_is_a_contraction():
    P = transport.latitude_path(1.1)
    fwd = transport.haahti_refinement(P, 1e-8, 14).limit.data
    back = transport.haahti_refinement(reversed_path(P), 1e-8, 14).limit.data
    w, vecs = np.linalg.eigh(P(0.0).data)
    tangent = vecs[:, w > 0.5]
    assert np.linalg.norm(back @ fwd @ tangent, 2) <= 1 + 1e-10


def test_finite_projection_chain_identity():
    P0 = plane_projection([1.0, 0.2, 0.0])
    P1 = plane_projection([0.3, 1.0, 0.5])
    P2 = plane_projection([0.1, 0.4, 1.0])
    A = stepmap.finite_step_mapping([0.0, 0.4, 1.0], [P0, P1], P2)
    left, right, d = transport.haahti_vs_stieltjes(A)
    assert d < 1e-10
    assert alg.dist(left, P2 * P1 * P0) < 1e-10


def test_ex711_haahti_exact_and_witness():
    rep = transport.ex711_report(8)
    e1 = alg.basis_diag(transport.ex711_size_for(8), 1)
    assert all(v == e1 for v in rep.haahti.values())
    assert rep.witness_distance == 1.0
    assert rep.ks_verdict == "divergence-witness"
    with pytest.raises(InvalidIndex):
        transport.ex711_path(4)(1 - 2.0**-8)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_ex711_partitions_with_different_jumps_differ_by_one(s, t):
    i, j = transport.ex711_index([s, t])
    path = transport.ex711_path(40)
    d = transport.ex711_witness(path, (0.0, s, 1.0), (0.0, t, 1.0))
    assert d == (0.0 if i == j else 1.0)
