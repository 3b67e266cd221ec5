"""Point-interval functions V, the kernels U they induce, and generalized ODE residuals.

A V-function maps a tag xi and an interval [x, y] containing it to an algebra element.
Three are built from a mapping A:

* linear:     V = I + A(xi)(y - x)
* stieltjes:  V = I + A(y) - A(x)
* vdef:       V = (I + A(y) - A(xi)) (I + A(x) - A(xi))^-1

The kernel U(tau, t) is V(tau, [tau, t]) for t >= tau and V(tau, [t, tau])^-1 below tau.
A candidate solution x of the linear generalized ODE is judged by the partition residual
sum ||x(t_i) - x(t_{i-1}) - (U(xi, t_i) - U(xi, t_{i-1})) x(xi)|| under refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import algebra as alg
from .algebra import AlgebraElement, AlgebraKind
from .errors import Singular
from .prodint import ConvergenceReport, TaggedPartition, ordered_product_raw, refine
from .stepmap import StepMapping
from .transfinite import sample_members

# one-sided limits use h = 2**-k for k in this range
ONE_SIDED_EXPONENTS = range(5, 41)
SETTLE_LAST = 5
# a residual counts as smaller only when it drops by more than rounding noise
DECAY_MARGIN = 1e-9
ZERO_RESIDUAL = 1e-13


@dataclass
class VFunction:
    kind: AlgebraKind
    fn: Callable[[float, float, float], AlgebraElement]
    variant: str = "custom"
    source: object = None
    a: float = 0.0
    b: float = 1.0

    def __call__(self, xi: float, x: float, y: float) -> AlgebraElement:
        return self.fn(xi, x, y)


def _A(A, t: float) -> np.ndarray:
    return A(float(t)).data


def from_a_linear(A) -> VFunction:
    kind = A.kind
    ident = kind.identity_raw()

    def fn(xi, x, y):
        return AlgebraElement(kind, ident + _A(A, xi) * (y - x))

    return VFunction(kind, fn, "linear", A, A.a, A.b)


def from_a_stieltjes(A) -> VFunction:
    kind = A.kind
    ident = kind.identity_raw()

    def fn(xi, x, y):
        return AlgebraElement(kind, ident + (_A(A, y) - _A(A, x)))

    return VFunction(kind, fn, "stieltjes", A, A.a, A.b)


def from_a_vdef(A) -> VFunction:
    kind = A.kind
    ident = kind.identity_raw()

    def fn(xi, x, y):
        Axi = _A(A, xi)
        left = ident + (_A(A, y) - Axi)
        right = alg.inverse_raw(kind, ident + (_A(A, x) - Axi))
        return AlgebraElement(kind, kind.mul_raw(left, right))

    return VFunction(kind, fn, "vdef", A, A.a, A.b)


def constant_v(value: AlgebraElement, a: float = 0.0, b: float = 1.0) -> VFunction:
    return VFunction(value.kind, lambda xi, x, y: value, "custom", None, a, b)


def tilde_v(V: VFunction) -> VFunction:
    """V(xi, [xi, y]) V(xi, [x, xi])."""
    kind = V.kind

    def fn(xi, x, y):
        return AlgebraElement(kind, kind.mul_raw(V(xi, xi, y).data, V(xi, x, xi).data))

    return VFunction(kind, fn, f"tilde({V.variant})", V.source, V.a, V.b)


def u_from_v(V: VFunction, tau: float, t: float) -> AlgebraElement:
    if t >= tau:
        return V(tau, tau, t)
    w = V(tau, t, tau)
    try:
        return alg.inverse(w)
    except Singular:
        raise Singular(f"V({tau}, [{t}, {tau}]) is not invertible") from None


def kernel(V: VFunction) -> Callable[[float, float], AlgebraElement]:
    return lambda tau, t: u_from_v(V, tau, t)


def stieltjes_kernel(A) -> Callable[[float, float], AlgebraElement]:
    """U(tau, t) = I + A(t) - A(tau), the kernel the vdef function induces."""
    kind = A.kind
    ident = kind.identity_raw()
    return lambda tau, t: AlgebraElement(kind, ident + (_A(A, t) - _A(A, tau)))


# residuals


def gode_residual(U, x, D: TaggedPartition) -> float:
    """sum ||x(t_i) - x(t_{i-1}) - (U(xi_i, t_i) - U(xi_i, t_{i-1})) x(xi_i)||."""
    cache: dict = {}

    def xv(t):
        if t not in cache:
            cache[t] = x(t).data
        return cache[t]

    terms = []
    for lo, hi, xi in zip(D.points, D.points[1:], D.tags):
        dU = U(xi, hi).data - U(xi, lo).data
        kind = U(xi, hi).kind
        r = xv(hi) - xv(lo) - kind.mul_raw(dU, xv(xi))
        terms.append(kind.norm_raw(r))
    return float(math.fsum(terms))


def stieltjes_increment_residual(A, x, D: TaggedPartition) -> float:
    """sum ||x(t_i) - x(t_{i-1}) - (A(t_i) - A(t_{i-1})) x(xi_i)||."""
    kind = A.kind
    terms = []
    for lo, hi, xi in zip(D.points, D.points[1:], D.tags):
        r = x(hi).data - x(lo).data - kind.mul_raw(_A(A, hi) - _A(A, lo), x(xi).data)
        terms.append(kind.norm_raw(r))
    return float(math.fsum(terms))


def equivalence_residual(first: VFunction, second: VFunction, D: TaggedPartition) -> float:
    return float(math.fsum(alg.dist(first(xi, lo, hi), second(xi, lo, hi))
                           for lo, hi, xi in zip(D.points, D.points[1:], D.tags)))


@dataclass
class GodeResidualReport:
    partitions: list  # (m, residual)
    verdict: str
    family: str = "uniform"

    def to_json(self) -> dict:
        return {"family": self.family, "verdict": self.verdict,
                "residuals": [{"m": m, "residual": r} for m, r in self.partitions]}


def decay_verdict(residuals: list, window: int = 3) -> str:
    """decaying: strictly smaller at each of the last ``window`` doublings, or already zero."""
    if len(residuals) < window + 1:
        return "not-decaying"
    last = residuals[-window - 1:]
    scale = max(1.0, max(residuals))
    if all(r <= ZERO_RESIDUAL * scale for r in last[1:]):
        return "decaying"
    if all(y < x * (1 - DECAY_MARGIN) for x, y in zip(last, last[1:])):
        return "decaying"
    return "not-decaying"


def jump_aligned_partition(a: float, b: float, m: int, jumps) -> TaggedPartition:
    """Uniform points plus the jump points inside (a, b); tags sit on a jump where an interval touches one."""
    grid = np.linspace(a, b, m + 1)
    grid[0], grid[-1] = a, b
    js = sorted({float(j) for j in jumps if a < j < b})
    pts = np.unique(np.concatenate([grid, js]))
    jset = set(js)
    tags = []
    for lo, hi in zip(pts, pts[1:]):
        if lo in jset:
            tags.append(lo)
        elif hi in jset:
            tags.append(hi)
        else:
            tags.append(lo)
    return TaggedPartition(tuple(pts), tuple(tags))


def residual_sweep(U, x, a: float, b: float, levels: int = 6, start_level: int = 4, tags: str = "left",
                   jumps=None) -> GodeResidualReport:
    """Residuals on 2**k uniform intervals, or jump-aligned partitions when ``jumps`` is given."""
    out = []
    for k in range(start_level, start_level + levels + 1):
        m = 2**k
        D = (jump_aligned_partition(a, b, m, jumps) if jumps is not None
             else TaggedPartition.uniform(a, b, m, tags))
        out.append((m, gode_residual(U, x, D)))
    return GodeResidualReport(out, decay_verdict([r for _, r in out]),
                              "jump-aligned" if jumps is not None else "uniform")


def step_jump_points(A: StepMapping, count: int = 64) -> list:
    s = A.set
    pts = []
    for i in sample_members(s, count):
        if not s._collides(i):
            pts.append(s.value(i))
    return sorted(set(pts))


# regularity conditions on V


@dataclass
class VCondition:
    passed: bool
    witness: str = ""
    values: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"passed": self.passed, "witness": self.witness}


@dataclass
class VConditions:
    identity_at_point: VCondition  # V(t, [t, t]) = I
    splitting: VCondition  # V(t, [x, y]) close to V(t, [t, y]) V(t, [x, t]) as x, y -> t
    right_limits: VCondition  # V(t, [t, y]) settles to an invertible limit as y -> t+
    left_limits: VCondition  # V(t, [x, t]) settles to an invertible limit as x -> t-
    bound_K: float = math.nan

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in (self.identity_at_point, self.splitting, self.right_limits,
                                      self.left_limits))

    def to_json(self) -> dict:
        return {"identity_at_point": self.identity_at_point.to_json(), "splitting": self.splitting.to_json(),
                "right_limits": self.right_limits.to_json(), "left_limits": self.left_limits.to_json(),
                "K": self.bound_K, "wording": "consistent-with"}


def _settled(vals: list, tol: float) -> bool:
    last = vals[-SETTLE_LAST:]
    return all(alg.dist(v, last[-1]) <= tol for v in last)


def probe_points(V: VFunction, probes: int, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    pts = list(rng.uniform(V.a, V.b, probes))
    if isinstance(V.source, StepMapping):
        pts += [p for p in step_jump_points(V.source, probes) if V.a < p < V.b]
    return pts


def check_v_conditions(V: VFunction, probes: int = 16, tol: float = 1e-8, points=None, seed: int = 0) -> VConditions:
    pts = probe_points(V, probes, seed) if points is None else list(points)
    ident = alg.identity(V.kind)
    worst = max(alg.dist(V(t, t, t), ident) for t in pts)
    at_point = VCondition(worst <= tol, f"max ||V(t,[t,t]) - I|| = {worst:.3e}")
    split_ok, right_ok, left_ok = True, True, True
    split_w, right_w, left_w = "", "", ""
    K = 0.0
    for t in pts:
        hs = [2.0**-k for k in ONE_SIDED_EXPONENTS]
        inside = [h for h in hs if V.a <= t - h and t + h <= V.b]
        if inside:
            r = [alg.dist(V(t, t - h, t + h), V(t, t, t + h) * V(t, t - h, t)) for h in inside]
            if r[-1] > tol:
                split_ok, split_w = False, f"residual {r[-1]:.3e} at t = {t}"
        if t < V.b:
            plus = [V(t, t, t + h) for h in hs if t + h <= V.b]
            if plus and not (_settled(plus, tol) and alg.is_invertible(plus[-1])):
                right_ok, right_w = False, f"V(t,[t,y]) does not settle to an invertible limit at t = {t}"
        if t > V.a:
            minus = [V(t, t - h, t) for h in hs if t - h >= V.a]
            if minus:
                if not (_settled(minus, tol) and alg.is_invertible(minus[-1])):
                    left_ok, left_w = False, f"V(t,[x,t]) does not settle to an invertible limit at t = {t}"
                else:
                    near = [w for w, h in zip(minus, [h for h in hs if t - h >= V.a]) if h <= 1e-3]
                    for w in near:
                        K = max(K, w.norm(), alg.inverse(w).norm())
    return VConditions(at_point, VCondition(split_ok, split_w), VCondition(right_ok, right_w),
                       VCondition(left_ok, left_w), K)


# the vdef round trip


@dataclass
class RoundTripReport:
    hypotheses: bool
    convergence: ConvergenceReport
    residuals: GodeResidualReport
    v_conditions: VConditions | None = None
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"hypotheses": self.hypotheses,
                "v_conditions": self.v_conditions.to_json() if self.v_conditions else None,
                "convergence": self.convergence.to_json(),
                "residuals": self.residuals.to_json(), **self.notes}


def _jump_hypotheses(A) -> bool:
    """I + right jump and I - left jump invertible at sampled jump points."""
    if not isinstance(A, StepMapping):
        return True
    s = A.set
    ident = alg.identity(A.kind)
    for i in sample_members(s, 64):
        if s._collides(i) or not any(i.coords):
            continue
        try:
            pred = s.predecessor(i)
        except Exception:
            continue
        left_jump = A.z(i) - A.z(pred)
        if not alg.is_invertible(ident - left_jump):
            return False
    return True


class _GridSolution:
    """W on a fixed uniform grid from the ordered products of V(t_{i-1}, [t_{i-1}, t_i])."""

    def __init__(self, V: VFunction, a: float, b: float, level: int):
        self.kind = V.kind
        m = 2**level
        self.grid = np.linspace(a, b, m + 1)
        self.grid[0], self.grid[-1] = a, b
        vals = [self.kind.identity_raw()]
        acc = self.kind.identity_raw()
        for lo, hi in zip(self.grid, self.grid[1:]):
            acc = self.kind.mul_raw(V(lo, lo, hi).data, acc)
            vals.append(acc)
        self.values = np.stack(vals)
        self.index = {float(t): k for k, t in enumerate(self.grid)}

    def __call__(self, t: float) -> AlgebraElement:
        return AlgebraElement(self.kind, self.values[self.index[float(t)]])


def gode2_roundtrip(A, tol: float = 1e-8, levels: int = 6, start_level: int = 4) -> RoundTripReport:
    """V from A by the vdef formula; W from its refinement products; residuals with U = I + A(t) - A(tau)."""
    hyp = _jump_hypotheses(A)
    V = from_a_vdef(A)

    def level(k):
        m = 2**k
        pts = np.linspace(A.a, A.b, m + 1)
        pts[0], pts[-1] = A.a, A.b
        f = np.stack([V(lo, lo, hi).data for lo, hi in zip(pts, pts[1:])])
        return m, AlgebraElement(A.kind, ordered_product_raw(A.kind, f))

    conv = refine(level, A.kind, tol, levels + 1, start_level, stop_early=False)
    W = _GridSolution(V, A.a, A.b, start_level + levels)
    U = stieltjes_kernel(A)
    res = residual_sweep(U, W, A.a, A.b, levels, start_level)
    return RoundTripReport(hyp, conv, res, check_v_conditions(V, 8, max(tol, 1e-10)))
