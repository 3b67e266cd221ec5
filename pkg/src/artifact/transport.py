"""Haahti products of projection-valued paths and parallel translation along surfaces.

The Haahti product of a path A over a partition t_0 < ... < t_m is the ordered product
A(t_m) ... A(t_1) A(t_0) of its values at the partition points.  For the field of
orthogonal projections onto the tangent planes of a surface this approximates parallel
translation; the same operator solves T' = P'(t) T, T(a) = P(a), which gives an
independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import algebra as alg
from .algebra import AlgebraElement, AlgebraKind
from .errors import InvalidIndex, NotIdempotent, NotInvertibleJump, OffSurface
from .ordinal import FiniteSet, OrdinalIndex
from .prodint import ConvergenceReport, TaggedPartition, ordered_product_raw, refine
from .stepmap import StepMapping, eval_many
from .stieltjes import ks_step_product, rs_refinement

IDEMPOTENT_TOL = 1e-12
SURFACE_TOL = 1e-9
ODE_DIFF_STEP = 1e-5


# paths


@dataclass
class ProjectionPath:
    """t -> P(l(t)) on [a, b]; ``fn`` returns raw arrays, ``many`` is an optional vectorized form."""

    kind: AlgebraKind
    a: float
    b: float
    fn: Callable[[float], np.ndarray]
    many: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __call__(self, t: float) -> AlgebraElement:
        return AlgebraElement(self.kind, self.fn(float(t)))

    def eval_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.many is not None:
            return self.many(ts)
        return np.stack([self.fn(float(t)) for t in ts])

    def check_idempotent(self, ts) -> float:
        vals = self.eval_many(ts)
        worst = float(np.max(self.kind.norm_raw(self.kind.mul_raw(vals, vals) - vals)))
        if worst > IDEMPOTENT_TOL:
            raise NotIdempotent(f"P(t)^2 differs from P(t) by {worst:.3e}")
        return worst


def constant_path(P: AlgebraElement, a: float = 0.0, b: float = 1.0) -> ProjectionPath:
    data = P.data
    return ProjectionPath(P.kind, a, b, lambda t: data,
                          lambda ts: np.broadcast_to(data, (len(ts),) + data.shape).copy(), "constant")


# surfaces


@dataclass(frozen=True)
class Sphere:
    radius: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)

    def distance(self, x: np.ndarray) -> np.ndarray:
        return np.abs(np.linalg.norm(x - np.asarray(self.center), axis=-1) - self.radius)

    def normal(self, x: np.ndarray) -> np.ndarray:
        d = x - np.asarray(self.center)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


@dataclass(frozen=True)
class Cylinder:
    """Round cylinder around the z axis."""

    radius: float = 1.0

    def distance(self, x: np.ndarray) -> np.ndarray:
        return np.abs(np.hypot(x[..., 0], x[..., 1]) - self.radius)

    def normal(self, x: np.ndarray) -> np.ndarray:
        n = np.stack([x[..., 0], x[..., 1], np.zeros_like(x[..., 0])], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)


@dataclass(frozen=True)
class Polyhedron:
    """Faces as (unit normal, offset) pairs: the plane normal . x = offset."""

    faces: tuple

    def __post_init__(self):
        for n, _ in self.faces:
            if abs(np.linalg.norm(n) - 1.0) > 1e-12:
                raise ValueError("face normals must be unit vectors")

    def _face_of(self, x: np.ndarray) -> np.ndarray:
        dist = np.stack([np.abs(x @ np.asarray(n) - d) for n, d in self.faces], axis=-1)
        return dist.argmin(axis=-1), dist.min(axis=-1)

    def distance(self, x: np.ndarray) -> np.ndarray:
        return self._face_of(x)[1]

    def normal(self, x: np.ndarray) -> np.ndarray:
        idx, _ = self._face_of(x)
        normals = np.asarray([n for n, _ in self.faces], dtype=float)
        return normals[idx]

    def projection(self, k: int) -> AlgebraElement:
        return tangent_projection(np.asarray(self.faces[k][0], dtype=float))


def tangent_projection(normal) -> AlgebraElement:
    """I - n n^T for a unit normal n."""
    n = np.asarray(normal, dtype=float)
    return AlgebraElement(AlgebraKind.matrix(3), np.eye(3) - np.outer(n, n))


def projection_field(S, curve: Callable[[np.ndarray], np.ndarray], a: float = 0.0, b: float = 1.0,
                     name: str = "") -> ProjectionPath:
    """t -> I - n(l(t)) n(l(t))^T; raises OffSurface when l(t) leaves the surface."""

    def many(ts):
        x = np.asarray(curve(np.asarray(ts, dtype=float)), dtype=float).reshape(len(ts), 3)
        off = S.distance(x)
        if np.any(off > SURFACE_TOL):
            raise OffSurface(f"curve point at distance {float(off.max()):.3e} from the surface")
        n = S.normal(x)
        return np.eye(3) - n[:, :, None] * n[:, None, :]

    def fn(t):
        return many(np.array([t]))[0]

    return ProjectionPath(AlgebraKind.matrix(3), a, b, fn, many, name, {"surface": S, "curve": curve})


def latitude_path(polar_angle: float, radius: float = 1.0, loops: float = 1.0) -> ProjectionPath:
    """The circle at a fixed polar angle on a sphere, traversed ``loops`` times over [0, 1]."""
    st, ct = math.sin(polar_angle), math.cos(polar_angle)

    def curve(t):
        phi = 2 * math.pi * loops * t
        return radius * np.stack([st * np.cos(phi), st * np.sin(phi), np.full_like(t, ct)], axis=-1)

    p = projection_field(Sphere(radius), curve, 0.0, 1.0, f"latitude:{polar_angle}")
    p.meta["tangent"] = np.array([0.0, 1.0, 0.0])
    return p


def helix_path(pitch: float, radius: float = 1.0, turns: float = 1.0) -> ProjectionPath:
    """(r cos 2 pi k t, r sin 2 pi k t, pitch t) on the cylinder of radius r."""

    def curve(t):
        phi = 2 * math.pi * turns * t
        return np.stack([radius * np.cos(phi), radius * np.sin(phi), pitch * t], axis=-1)

    return projection_field(Cylinder(radius), curve, 0.0, 1.0, f"helix:{pitch}")


def cube_corner_faces() -> Polyhedron:
    """The three faces of the unit cube that meet at the origin."""
    return Polyhedron(((( -1.0, 0.0, 0.0), 0.0), ((0.0, -1.0, 0.0), 0.0), ((0.0, 0.0, -1.0), 0.0)))


def octa_corner_faces() -> Polyhedron:
    """Three faces of a regular octahedron meeting at a vertex; their projections do not commute."""
    r = 1.0 / math.sqrt(3.0)
    return Polyhedron((((r, r, r), r), ((-r, r, r), r), ((-r, -r, r), r)))


# products


def _ordered_values_product(kind: AlgebraKind, vals: np.ndarray) -> np.ndarray:
    return ordered_product_raw(kind, vals)


def haahti_product(P, D) -> AlgebraElement:
    """P(t_m) ... P(t_1) P(t_0) over the points of D (a partition or a point array)."""
    pts = D.points if isinstance(D, TaggedPartition) else np.asarray(D, dtype=float)
    vals = eval_many(P, pts)
    return AlgebraElement(P.kind, _ordered_values_product(P.kind, vals))


def haahti_refinement(P, tol: float = 1e-8, max_levels: int = 14, start_level: int = 0,
                      extrapolate: bool = True, stop_early: bool = True) -> ConvergenceReport:
    def level(k):
        m = 2**k
        pts = np.linspace(P.a, P.b, m + 1)
        pts[0], pts[-1] = P.a, P.b
        return m, haahti_product(P, pts)

    return refine(level, P.kind, tol, max_levels, start_level, extrapolate=extrapolate, stop_early=stop_early,
                  require_invertible=False)


def polyhedral_transport(projections: list) -> AlgebraElement:
    """P_m ... P_1 P_0 for face projections listed in the order they are crossed."""
    if not projections:
        raise ValueError("need at least one face")
    for k, p in enumerate(projections):
        if alg.dist(p * p, p) > IDEMPOTENT_TOL * max(1.0, p.norm()):
            raise NotIdempotent(f"factor {k} is not idempotent")
    kind = projections[0].kind
    return AlgebraElement(kind, ordered_product_raw(kind, np.stack([p.data for p in projections])))


def transport_ode_oracle(P, steps: int = 4096, diff_step: float = ODE_DIFF_STEP) -> AlgebraElement:
    """RK4 for T' = P'(t) T, T(a) = P(a), with P' by central differences of t -> P(l(t))."""
    a, b = P.a, P.b
    h = (b - a) / steps

    def deriv(t):
        lo, hi = max(a, t - diff_step), min(b, t + diff_step)
        v = eval_many(P, np.array([lo, hi]))
        return (v[1] - v[0]) / (hi - lo)

    T = P(a).data.copy()
    for k in range(steps):
        t = a + k * h
        G0, G1, G2 = deriv(t), deriv(t + h / 2), deriv(t + h)
        k1 = G0 @ T
        k2 = G1 @ (T + h / 2 * k1)
        k3 = G1 @ (T + h / 2 * k2)
        k4 = G2 @ (T + h * k3)
        T = T + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return AlgebraElement(P.kind, T)


def scalar_invariance_check(P, u, v, tol: float = 1e-8, levels: int = 14, report: ConvergenceReport | None = None):
    """|<T u, T v> - <u, v>| with T the refined Haahti product."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    P0 = P(P.a).data
    if np.abs(P0 @ u - u).max() > 1e-9 or np.abs(P0 @ v - v).max() > 1e-9:
        raise ValueError("u and v must be tangent at the start of the path")
    rep = report or haahti_refinement(P, tol, levels)
    T = rep.limit.data
    return abs(float((T @ u) @ (T @ v)) - float(u @ v))


def haahti_vs_stieltjes(P: StepMapping, tol: float = 1e-10, max_levels: int = 16):
    """(Haahti product by refinement, prod (I + dP) * P(a), distance) for idempotent steps."""
    s = P.set
    members = s.index_list() if isinstance(s, FiniteSet) else []
    for i in members + [OrdinalIndex((), True)]:
        z = P.z(i)
        if alg.dist(z * z, z) > IDEMPOTENT_TOL * max(1.0, z.norm()):
            raise NotIdempotent(f"value at {i} is not idempotent")
    if isinstance(s, FiniteSet):
        for i in members[1:] + [OrdinalIndex((), True)]:
            jump = alg.identity(P.kind) + P.z(i) - P.z(s.predecessor(i))
            if not alg.is_invertible(jump):
                raise NotInvertibleJump(f"I + dP is singular at {i}")
    rep = haahti_refinement(P, tol, max_levels)
    right = ks_step_product(P, tol).value * P(P.a)
    return rep.limit, right, alg.dist(rep.limit, right)


# the sequence-space example


def ex711_index(ts) -> np.ndarray:
    """n with 1 - 2**-n < t <= 1 - 2**-(n+1); -1 at t = 0 and t = 1."""
    ts = np.asarray(ts, dtype=float)
    _, e = np.frexp(1.0 - ts)
    n = -e
    return np.where((ts <= 0.0) | (ts >= 1.0), -1, n)


def ex711_path(size: int) -> ProjectionPath:
    """e1 + e_(n+2) on (1 - 2**-n, 1 - 2**-(n+1)], e1 at 0 and 1, in DiagSeq(size).

    Points whose value needs a coordinate beyond ``size`` raise InvalidIndex, so every
    value that is returned is exact.
    """
    kind = AlgebraKind.diag(size)

    def many(ts):
        n = ex711_index(ts)
        pos = np.where(n >= 0, n + 2, 0)  # 1-based coordinate of the second unit vector
        if np.any(pos > size):
            raise InvalidIndex(f"DiagSeq({size}) is too short for coordinate {int(pos.max())}")
        out = np.zeros((len(ts), size))
        out[:, 0] = 1.0
        rows = np.nonzero(pos > 0)[0]
        out[rows, pos[rows] - 1] = 1.0
        return out

    return ProjectionPath(kind, 0.0, 1.0, lambda t: many(np.array([t]))[0], many, "ex711")


def ex711_size_for(levels: int) -> int:
    # uniform partitions with 2**k intervals touch coordinates up to k + 1
    return levels + 3


@dataclass
class Ex711Report:
    haahti: ConvergenceReport
    stieltjes: ConvergenceReport
    witness_partitions: tuple
    witness_distance: float

    @property
    def ks_verdict(self) -> str:
        return "divergence-witness" if self.witness_distance >= 1.0 - 1e-15 else "no-witness"

    def to_json(self) -> dict:
        return {"haahti": self.haahti.to_json(), "stieltjes": self.stieltjes.to_json(),
                "ks": self.ks_verdict, "witness_partitions": [list(p) for p in self.witness_partitions],
                "witness_distance": self.witness_distance}


def ex711_witness(path: ProjectionPath, D1, D2) -> float:
    """|| P(D1) - P(D2) || for the Stieltjes partition products of the path."""
    from .stieltjes import stieltjes_partition_product
    return alg.dist(stieltjes_partition_product(path, D1), stieltjes_partition_product(path, D2))


def ex711_report(levels: int = 12) -> Ex711Report:
    path = ex711_path(ex711_size_for(levels))
    haahti = haahti_refinement(path, 1e-12, levels + 1, extrapolate=False, stop_early=False)
    ks = rs_refinement(path, 1e-12, levels + 1, extrapolate=False, stop_early=False)
    D1 = (0.0, 0.5, 1.0)
    D2 = (0.0, 0.75, 1.0)
    return Ex711Report(haahti, ks, (D1, D2), ex711_witness(path, D1, D2))
