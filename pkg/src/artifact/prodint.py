"""Product integrals prod (I + A(t) dt).

Step mappings are evaluated exactly as transfinite products of exp(gap * z).  Arbitrary
mappings go through refinement sweeps on uniform dyadic partitions; the strong-residual
sum measures how well a candidate indefinite integral W fits the factors I + A(xi) dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import algebra as alg
from .algebra import AlgebraElement, AlgebraKind
from .errors import Singular
from .ordinal import DyadicTower, FiniteSet, OrdinalIndex
from .stepmap import RegulatedSample, StepMapping, eval_many
from .transfinite import (DEFAULT_BUDGET, Evaluator, SummabilityVerdict, TransfiniteResult, abs_summable,
                          check_exp_sum_identity, exp_family, richardson, sample_members, transfinite_product)

# consecutive levels whose Richardson error must sit below tol
EXTRAPOLATION_STREAK = 2
ROUNDING_FLOOR = 1e-3


@dataclass(frozen=True)
class TaggedPartition:
    points: tuple
    tags: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        tags = tuple(float(x) for x in self.tags)
        if len(pts) < 2:
            raise ValueError("a partition needs at least one interval")
        if len(tags) != len(pts) - 1:
            raise ValueError("need one tag per interval")
        for lo, hi, x in zip(pts, pts[1:], tags):
            if not lo < hi:
                raise ValueError("points must be strictly increasing")
            if not lo <= x <= hi:
                raise ValueError(f"tag {x} outside [{lo}, {hi}]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "tags", tags)

    @property
    def m(self) -> int:
        return len(self.tags)

    @property
    def a(self) -> float:
        return self.points[0]

    @property
    def b(self) -> float:
        return self.points[-1]

    @classmethod
    def uniform(cls, a: float, b: float, m: int, tags: str = "left") -> "TaggedPartition":
        pts = np.linspace(a, b, m + 1)
        pts[0], pts[-1] = a, b
        return cls.from_points(pts, tags)

    @classmethod
    def from_points(cls, points, tags: str = "left") -> "TaggedPartition":
        pts = np.asarray(points, dtype=float)
        if tags == "left":
            tg = pts[:-1]
        elif tags == "right":
            tg = pts[1:]
        elif tags == "mid":
            tg = 0.5 * (pts[:-1] + pts[1:])
        else:
            raise ValueError(f"unknown tag placement {tags!r}")
        return cls(tuple(pts), tuple(tg))


@dataclass
class ConvergenceReport:
    """Values over a refinement sequence.

    ``limit`` is the best estimate of the limit: the last raw value, or a Richardson
    extrapolation over the levels when that settled first.
    """

    kind: AlgebraKind
    levels: list = field(default_factory=list)  # (level, m, value)
    deltas: list = field(default_factory=list)
    verdict: str = "NotConverged"
    tol: float = 0.0
    limit: AlgebraElement | None = None
    limit_err: float = math.inf
    extrapolated: bool = False
    notes: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.verdict == "Converged"

    @property
    def last(self) -> AlgebraElement:
        return self.levels[-1][2]

    def values(self) -> list:
        return [v for _, _, v in self.levels]

    def rows(self) -> list:
        out = []
        for k, (level, m, v) in enumerate(self.levels):
            d = self.deltas[k - 1] if k else None
            out.append({"level": level, "m": m, "delta": d, "value": v.to_json()})
        return out

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "tol": self.tol,
            "limit": self.limit.to_json() if self.limit is not None else None,
            "limit_err": self.limit_err,
            "extrapolated": self.extrapolated,
            "levels": self.rows(),
            **({"notes": self.notes} if self.notes else {}),
        }


def refine(level_value: Callable[[int], tuple], kind: AlgebraKind, tol: float, max_levels: int,
           start_level: int = 0, min_levels: int = 3, extrapolate: bool = True,
           stop_early: bool = True, require_invertible: bool = True) -> ConvergenceReport:
    """Run ``level_value(k) -> (m, value)`` for k = start_level, ... and judge convergence.

    Converged means the final value is invertible and either the last two deltas are below
    ``tol`` or the Richardson error in 1/m stayed below ``tol`` for two consecutive levels.
    Products of projections are singular by nature; they pass ``require_invertible=False``.
    """
    rep = ConvergenceReport(kind, tol=tol)
    raws: list[np.ndarray] = []
    streak = 0
    prev_err = math.inf
    norm = kind.norm_raw
    for k in range(start_level, start_level + max_levels):
        m, val = level_value(k)
        raws.append(val.data)
        if rep.levels:
            rep.deltas.append(alg.dist(val, rep.levels[-1][2]))
        rep.levels.append((k, m, val))
        rep.limit, rep.limit_err, rep.extrapolated = val, (rep.deltas[-1] if rep.deltas else math.inf), False
        plain = len(rep.deltas) >= 2 and rep.deltas[-1] < tol and rep.deltas[-2] < tol
        if plain:
            rep.limit_err = max(rep.deltas[-2:])
        elif extrapolate and len(raws) >= 3:
            est, err = richardson(raws[-9:], norm)
            # errors far below tol only wobble at rounding level, so they count as non-increasing
            streak = streak + 1 if (err < tol and err <= max(prev_err, ROUNDING_FLOOR * tol)) else 0
            prev_err = err
            # the extrapolated value is the better estimate whenever its error is smaller
            if streak >= EXTRAPOLATION_STREAK or err < rep.limit_err:
                rep.limit, rep.limit_err, rep.extrapolated = AlgebraElement(kind, est), err, True
        ok = (plain or (extrapolate and streak >= EXTRAPOLATION_STREAK)) and len(rep.levels) >= min_levels
        if ok and (not require_invertible or alg.is_invertible(rep.limit)):
            rep.verdict = "Converged"
            if stop_early:
                break
        else:
            rep.verdict = "NotConverged"
    return rep


# ordered products


def ordered_product_raw(kind: AlgebraKind, factors: np.ndarray) -> np.ndarray:
    """factors[m-1] ... factors[1] factors[0]: later factors multiply from the left."""
    arr = np.asarray(factors, dtype=float)
    if len(arr) == 0:
        return kind.identity_raw()
    if kind.variant != "matrix":
        return np.prod(arr, axis=0)
    while len(arr) > 1:
        if len(arr) % 2:
            arr = np.concatenate([arr, kind.identity_raw()[None]])
        arr = np.matmul(arr[1::2], arr[0::2])
    return arr[0]


def linear_factors(A, D: TaggedPartition) -> np.ndarray:
    """I + A(xi_i)(t_i - t_{i-1}) for every interval of D."""
    vals = eval_many(A, D.tags)
    dt = np.diff(np.asarray(D.points))
    kind = A.kind
    return kind.identity_raw() + vals * dt.reshape((-1,) + (1,) * kind.batch_ndim())


def partition_product(A, D: TaggedPartition) -> AlgebraElement:
    return AlgebraElement(A.kind, ordered_product_raw(A.kind, linear_factors(A, D)))


def riemann_product_integral(A, tol: float = 1e-8, max_levels: int = 16, tags: str = "left",
                             start_level: int = 0, extrapolate: bool = True) -> ConvergenceReport:
    """Partition products on m = 2**k uniform intervals, doubling until they settle."""

    def level(k):
        m = 2**k
        return m, partition_product(A, TaggedPartition.uniform(A.a, A.b, m, tags))

    return refine(level, A.kind, tol, max_levels, start_level, extrapolate=extrapolate)


# step mappings


def step_exp_family(A: StepMapping):
    return exp_family(A.weighted_family())


def step_product_integral(A: StepMapping, tol: float = 1e-8, budget: int = DEFAULT_BUDGET) -> TransfiniteResult:
    """Product of exp(gap(alpha) z_alpha) over the steps, later steps to the left."""
    return transfinite_product(step_exp_family(A), tol, budget)


def commutative_product_integral(A: StepMapping, tol: float = 1e-8, budget: int = DEFAULT_BUDGET):
    """(product of exp(gap z), exp of the sum of gap z); raises NotCommuting."""
    return check_exp_sum_identity(A.weighted_family(), tol, budget)


class IndefiniteStepProduct:
    """W(t) = exp((t - gamma) z_gamma) * (product over the steps below gamma), gamma the step holding t.

    Partial products come from one shared evaluator, so limit values are computed once.
    """

    def __init__(self, A: StepMapping, tol: float = 1e-10, budget: int = DEFAULT_BUDGET):
        self.A = A
        self.kind = A.kind
        self._ev = Evaluator(step_exp_family(A), "product", tol, budget)
        self._cache: dict = {}

    def below(self, gamma: OrdinalIndex) -> np.ndarray:
        if gamma not in self._cache:
            self._cache[gamma] = self._ev.below(gamma).value
        return self._cache[gamma]

    def __call__(self, t: float) -> AlgebraElement:
        s = self.A.set
        gamma = s.locate(t)
        base = self.below(gamma)
        if gamma.top:
            return AlgebraElement(self.kind, base)
        head = alg.exp(self.A.z(gamma) * (t - s.value(gamma)))
        return AlgebraElement(self.kind, self.kind.mul_raw(head.data, base))

    def many(self, ts) -> np.ndarray:
        return np.stack([self(float(t)).data for t in ts])


def indefinite_step_product(A: StepMapping, tol: float = 1e-10, budget: int = DEFAULT_BUDGET):
    return IndefiniteStepProduct(A, tol, budget)


# Riemann and Bochner criteria


@dataclass
class RiemannVerdict:
    verdict: str  # bounded | unbounded-witness
    sup_seen: float
    witness: str | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "sup_seen": self.sup_seen, "witness": self.witness}


# the growth certificate: norms along a coordinate axis strictly increase over this many
# consecutive members and end at least this factor above where they started
GROWTH_RUN = 16
GROWTH_FACTOR = 1e6


def _axis_paths(s):
    if isinstance(s, DyadicTower):
        for axis in range(s.ndim):
            def path(k, axis=axis):
                c = [0] * s.ndim
                c[axis] = k
                return OrdinalIndex(tuple(c))
            yield axis, path


def riemann_criterion(A, probe: int = 4096) -> RiemannVerdict:
    """Bounded steps make a step mapping Riemann product integrable; look for unbounded growth."""
    if isinstance(A, RegulatedSample):
        ts = np.linspace(A.a, A.b, probe)
        sup = float(np.max(A.kind.norm_raw(eval_many(A, ts))))
        details = {"bound": A.meta["sup_bound"]} if "sup_bound" in A.meta else {}
        return RiemannVerdict("bounded", sup, None, details)
    s = A.set
    norm_of = A.norm_formula or (lambda i: A.z(i).norm())
    if isinstance(s, FiniteSet):
        sup = max(max(norm_of(i) for i in s.index_list()), A.top_value.norm())
        return RiemannVerdict("bounded", sup)
    sup = A.top_value.norm()
    for i in sample_members(s, probe):
        if not s._collides(i):
            sup = max(sup, norm_of(i))
    # axis paths stay representable up to the dyadic exponent limit
    reach = min(probe, 52 - s.ndim)
    for axis, path in _axis_paths(s):
        norms = [norm_of(path(k)) for k in range(reach)]
        sup = max(sup, max(norms))
        tail = norms[-GROWTH_RUN:]
        increasing = all(y > x for x, y in zip(tail, tail[1:]))
        if len(tail) == GROWTH_RUN and increasing and tail[-1] >= GROWTH_FACTOR * max(norms[0], 1e-300):
            source = "closed form" if A.norm_formula is not None else "evaluated steps"
            witness = (f"step norms along coordinate {axis} increase strictly over the last {GROWTH_RUN} of "
                       f"{reach} members and reach {tail[-1]:.6g} ({source})")
            return RiemannVerdict("unbounded-witness", sup, witness,
                                  {"axis": axis, "norms": norms})
    return RiemannVerdict("bounded", sup)


def bochner_criterion(A: StepMapping, tol: float = 1e-8, budget: int = DEFAULT_BUDGET) -> SummabilityVerdict:
    """Absolute summability of gap(alpha) z_alpha."""
    return abs_summable(A.weighted_family(), tol, budget)


# residual checks


def inverse_many(kind: AlgebraKind, arr: np.ndarray) -> np.ndarray:
    out = np.empty_like(arr)
    for k in range(len(arr)):
        out[k] = alg.inverse_raw(kind, arr[k])
    return out


def _values_of(W, ts) -> np.ndarray:
    if hasattr(W, "many"):
        return W.many(ts)
    return np.stack([W(float(t)).data for t in ts])


def strong_residual(A, W, D: TaggedPartition) -> float:
    """sum of ||I + A(xi)(t_i - t_{i-1}) - W(t_i) W(t_{i-1})^-1|| over D."""
    kind = A.kind
    Wv = _values_of(W, D.points)
    Winv = inverse_many(kind, Wv[:-1])
    ratios = kind.mul_raw(Wv[1:], Winv)
    V = linear_factors(A, D)
    return float(math.fsum(kind.norm_raw(V - ratios)))


def residual_levels(A, W, levels, tags: str = "left") -> list:
    return [(2**k, strong_residual(A, W, TaggedPartition.uniform(A.a, A.b, 2**k, tags))) for k in levels]


def continuity_points(A, samples: int, h: float, seed: int = 0, max_step_norm: float | None = None) -> list:
    """Sample points where A is locally constant (steps) or smooth, at least 2h from any jump."""
    rng = np.random.default_rng(seed)
    if isinstance(A, StepMapping):
        s = A.set
        out = []
        for i in sample_members(s, 64 * samples):
            if s._collides(i):
                continue
            lo, hi = s.value(i), s.value(s.successor(i))
            if hi - lo <= 4 * h:
                continue
            if max_step_norm is not None and A.z(i).norm() > max_step_norm:
                continue
            out.append(lo + (hi - lo) * rng.uniform(0.25, 0.75))
            if len(out) >= samples:
                break
        return out
    return list(rng.uniform(A.a + 2 * h, A.b - 2 * h, samples))


def derivative_check(A, W, samples: int = 50, h: float = 1e-6, points=None, seed: int = 0) -> float:
    """Max relative error of a central difference of W against A(t) W(t)."""
    if points is None:
        # keep the difference quotient's truncation error (|z| h)^2 / 6 well below 1e-6
        points = continuity_points(A, samples, h, seed, max_step_norm=1e-3 / h)
    worst = 0.0
    for t in points:
        Wt = W(t)
        if not alg.is_invertible(Wt):
            raise Singular(f"W({t}) is not invertible")
        fd = (W(t + h) - W(t - h)) / (2 * h)
        exact = A(t) * Wt
        scale = max(exact.norm(), Wt.norm() * 1e-12, 1e-300)
        worst = max(worst, alg.dist(fd, exact) / scale)
    return worst
