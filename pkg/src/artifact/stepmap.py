"""Step mappings with well-ordered steps, right-regulated samples, and the mapping catalog.

A :class:`StepMapping` is constant on every ``[alpha, S(alpha))`` of its well-ordered
set and takes a separate value at the top point.  A :class:`RegulatedSample` wraps an
analytic mapping that has right limits everywhere.  Both can be called as ``A(t)``; any
object with ``kind``, ``a``, ``b`` and ``__call__`` counts as an evaluatable mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import algebra as alg
from .algebra import AlgebraElement, AlgebraKind
from .errors import BadParams, OutOfInterval, UnknownName
from .ordinal import (TOP, DyadicTower, FiniteSet, GeometricLadder, OrdinalIndex, WellOrderedSet,
                      set_from_json)
from .transfinite import Family

DEFAULT_GRID = 4096
EX401_TERMS = 200
RATIONAL_TOL = 1e-12


# mappings


@dataclass
class StepMapping:
    """A(t) = z_alpha on [alpha, S(alpha)), A(b) = z_b."""

    set: WellOrderedSet
    kind: AlgebraKind
    value_fn: Callable[[OrdinalIndex], AlgebraElement]
    top_value: AlgebraElement
    batch: Callable[[tuple, int, int], np.ndarray] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)
    # closed-form norm of z_alpha, used for growth certificates
    norm_formula: Callable[[OrdinalIndex], float] | None = None
    # closed form of gap(alpha) z_alpha when z_alpha alone would overflow
    weighted_batch: Callable[[tuple, int, int], np.ndarray] | None = None

    @property
    def a(self) -> float:
        return self.set.a

    @property
    def b(self) -> float:
        return self.set.b

    def z(self, i: OrdinalIndex) -> AlgebraElement:
        return self.top_value if i.top else self.value_fn(i)

    def z_raw_range(self, prefix: tuple, start: int, stop: int) -> np.ndarray:
        if self.batch is not None:
            return np.asarray(self.batch(prefix, start, stop), dtype=float).reshape((stop - start,) + self.kind.shape)
        if stop <= start:
            return np.zeros((0,) + self.kind.shape)
        return np.stack([self.value_fn(OrdinalIndex(prefix + (n,))).data for n in range(start, stop)])

    def evaluate(self, t: float) -> AlgebraElement:
        if not self.a <= t <= self.b:
            raise OutOfInterval(f"{t} outside [{self.a}, {self.b}]")
        return self.z(self.set.locate(t))

    __call__ = evaluate

    def eval_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if ts.size and (ts.min() < self.a or ts.max() > self.b):
            raise OutOfInterval("points outside the interval")
        coords = self.set.locate_many(ts)
        out = np.empty((len(ts),) + self.kind.shape)
        top = coords[:, 0] < 0
        out[top] = self.top_value.data
        rest = np.nonzero(~top)[0]
        if rest.size:
            prefixes = coords[rest, :-1]
            keys = {tuple(p) for p in prefixes.tolist()}
            for key in keys:
                sel = rest[np.all(prefixes == np.array(key, dtype=np.int64), axis=1)] if key else rest
                n = coords[sel, -1]
                lo, hi = int(n.min()), int(n.max()) + 1
                block = self.z_raw_range(tuple(int(c) for c in key), lo, hi)
                out[sel] = block[n - lo]
        return out

    def right_limit(self, t: float) -> AlgebraElement:
        return self.evaluate(t)

    def values_family(self, include_top: bool = False) -> Family:
        return Family(self.set, self.kind, self.value_fn, self.batch,
                      self.top_value if include_top else None, f"{self.name}:z")

    def weighted_family(self) -> Family:
        """The family gap(alpha) * z_alpha, i.e. the integral of A over each step."""
        s = self.set
        src = self

        if self.weighted_batch is not None:
            wb = self.weighted_batch

            def gen(i):
                s.validate(i)
                return AlgebraElement(src.kind, wb(i.coords[:-1], i.coords[-1], i.coords[-1] + 1)[0])

            return Family(s, self.kind, gen, wb, None, f"{self.name}:gap*z")

        def gen(i):
            return src.value_fn(i) * s.gap(i)

        batch = None
        if isinstance(s, DyadicTower):
            ndim = s.ndim
            width = s.b - s.a

            def batch(prefix, start, stop):
                z = src.z_raw_range(prefix, start, stop)
                n = np.arange(start, stop)
                gaps = np.power(2.0, -(sum(prefix) + n + ndim).astype(float)) * width
                return z * gaps.reshape((-1,) + (1,) * src.kind.batch_ndim())
        elif isinstance(s, FiniteSet):
            pts = np.asarray(s.points)

            def batch(prefix, start, stop):
                z = src.z_raw_range(prefix, start, stop)
                gaps = pts[start + 1: stop + 1] - pts[start:stop]
                return z * gaps.reshape((-1,) + (1,) * src.kind.batch_ndim())

        return Family(s, self.kind, gen, batch, None, f"{self.name}:gap*z")

    def restricted(self, lo: float, hi: float) -> "StepMapping":
        """Restriction to [lo, hi] for a finite step mapping whose points include lo and hi."""
        if not isinstance(self.set, FiniteSet):
            raise ValueError("restriction is only implemented for finite step sets")
        pts = self.set.points
        if lo not in pts or hi not in pts:
            raise ValueError("restriction endpoints must be step points")
        i0, i1 = pts.index(lo), pts.index(hi)
        sub = FiniteSet(pts[i0: i1 + 1])
        vals = [self.value_fn(OrdinalIndex((k,))) for k in range(i0, i1)]
        top = self.z(OrdinalIndex((i1,)) if i1 < len(pts) - 1 else TOP)
        return finite_step_mapping(sub.points, vals, top, name=f"{self.name}[{lo},{hi}]")


@dataclass
class RegulatedSample:
    """An analytic mapping with right limits everywhere on [a, b)."""

    kind: AlgebraKind
    a: float
    b: float
    scalar_fn: Callable[[np.ndarray], np.ndarray] | None = None
    element_fn: Callable[[float], AlgebraElement] | None = None
    right_scalar_fn: Callable[[np.ndarray], np.ndarray] | None = None
    derivative_fn: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)
    unit: AlgebraElement | None = None  # A(t) = scalar(t) * unit when scalar_fn is used

    def _unit(self) -> AlgebraElement:
        return self.unit if self.unit is not None else alg.identity(self.kind)

    def _check(self, t):
        if not self.a <= t <= self.b:
            raise OutOfInterval(f"{t} outside [{self.a}, {self.b}]")

    def evaluate(self, t: float) -> AlgebraElement:
        self._check(t)
        if self.element_fn is not None:
            return self.element_fn(float(t))
        return self._unit() * float(self.scalar_fn(np.array([t], dtype=float))[0])

    __call__ = evaluate

    def eval_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.scalar_fn is not None:
            vals = self.scalar_fn(ts)
            return vals.reshape((-1,) + (1,) * self.kind.batch_ndim()) * self._unit().data
        return np.stack([self.element_fn(float(t)).data for t in ts])

    def right_limit(self, t: float) -> AlgebraElement:
        self._check(t)
        if self.right_scalar_fn is not None:
            return self._unit() * float(self.right_scalar_fn(np.array([t], dtype=float))[0])
        return self.evaluate(t)

    def derivative(self, t: float) -> AlgebraElement:
        if self.derivative_fn is None:
            raise ValueError(f"{self.name} has no derivative formula")
        return self._unit() * float(self.derivative_fn(np.array([t], dtype=float))[0])


def eval_many(A, ts) -> np.ndarray:
    """Stacked raw values of any evaluatable mapping."""
    if hasattr(A, "eval_many"):
        return A.eval_many(ts)
    return np.stack([A(float(t)).data for t in ts])


# constructors


def finite_step_mapping(points, values, top: AlgebraElement, name: str = "") -> StepMapping:
    s = FiniteSet(tuple(points))
    vals = list(values)
    if len(vals) != len(s.points) - 1:
        raise ValueError("need one value per step")
    kind = top.kind
    for v in vals:
        if v.kind != kind:
            raise ValueError("all step values must share the algebra kind")
    data = np.stack([v.data for v in vals])

    def value_fn(i):
        s.validate(i)
        return vals[i.coords[0]]

    def batch(prefix, start, stop):
        return data[start:stop]

    return StepMapping(s, kind, value_fn, top, batch, name)


def two_value(z_a: AlgebraElement, z_b: AlgebraElement, a: float = 0.0, b: float = 1.0) -> StepMapping:
    """A = z_a on [a, b), A(b) = z_b."""
    return finite_step_mapping((a, b), [z_a], z_b, name="two-value")


def constant_step(c: AlgebraElement, a: float = 0.0, b: float = 1.0) -> StepMapping:
    return finite_step_mapping((a, b), [c], c, name="constant")


# G_eps, Lambda_eps and step approximation


@dataclass
class EpsilonPartition:
    eps: float
    points: list
    exhausted: bool


def _oscillation(kind: AlgebraKind, vals: np.ndarray) -> float:
    """sup ||A(s) - A(t)|| over the sampled values."""
    if len(vals) < 2:
        return 0.0
    if kind.variant != "matrix":
        flat = vals.reshape(len(vals), -1)
        return float((flat.max(axis=0) - flat.min(axis=0)).max())
    best = 0.0
    for k in range(len(vals)):
        d = np.abs(vals[k + 1:] - vals[k]).sum(axis=-1).max(axis=-1)
        if d.size:
            best = max(best, float(d.max()))
    return best


def _step_g_epsilon(A: StepMapping, x: float, eps: float, walk: int = 4096) -> float:
    s = A.set
    cur = s.locate(x)
    if cur.top:
        return A.b
    seen = [A.z(cur).data]
    nxt = s.successor(cur)
    for _ in range(walk):
        if nxt.top:
            # the open interval (x, b) never contains b itself
            return A.b
        cand = seen + [A.z(nxt).data]
        if _oscillation(A.kind, np.stack(cand)) > eps:
            return s.value(nxt)
        seen = cand
        if s._collides(nxt):
            break
        nxt = s.successor(nxt)
    # the walk ran into an accumulation of steps; the end of that block bounds G from below
    return s.value(nxt)


def g_epsilon(A, x: float, eps: float, grid: int = DEFAULT_GRID, iters: int = 48) -> float:
    """sup{y in (x, b] : ||A(s) - A(t)|| <= eps for s, t in (x, y)}.

    Exact for step mappings; analytic mappings are sampled on ``grid`` points of the
    open interval and y is found by bisection.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if x >= A.b:
        return A.b
    if isinstance(A, StepMapping):
        return _step_g_epsilon(A, x, eps)

    right = getattr(A, "right_limit", A.evaluate)(x).data

    def osc(y):
        # A(x+) plus samples reaching y; conservative when A jumps exactly at y
        ts = x + (y - x) * np.arange(1, grid + 1) / grid
        return _oscillation(A.kind, np.concatenate([right[None], eval_many(A, ts)]))

    if osc(A.b) <= eps:
        return A.b
    lo, hi = x, A.b
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if osc(mid) <= eps:
            lo = mid
        else:
            hi = mid
    return lo


def build_lambda_eps(A, eps: float, budget: int = 10_000, grid: int = DEFAULT_GRID,
                     min_step: float = 1e-12) -> EpsilonPartition:
    """Finite prefix of the well-ordered partition obtained by iterating G_eps from a."""
    pts = [A.a]
    x = A.a
    while x < A.b:
        if len(pts) > budget:
            return EpsilonPartition(eps, pts, True)
        y = g_epsilon(A, x, eps, grid)
        scale = min_step * max(1.0, abs(A.b - A.a))
        if A.b - y <= scale:
            y = A.b  # rounding residue, not a further step
        elif y - x <= scale:
            # accumulation point; a transfinite continuation would be needed
            return EpsilonPartition(eps, pts, True)
        pts.append(y)
        x = y
    return EpsilonPartition(eps, pts, False)


def approximate_by_step(A, eps: float, budget: int = 10_000, grid: int = DEFAULT_GRID) -> StepMapping:
    """Step mapping with value A(beta+) on each realized step and A(b) at the top."""
    part = build_lambda_eps(A, eps, budget, grid)
    pts = list(part.points)
    if pts[-1] < A.b:
        pts.append(A.b)
    vals = [A.right_limit(p) for p in pts[:-1]]
    m = finite_step_mapping(pts, vals, A(A.b), name=f"{getattr(A, 'name', '')}~{eps}")
    m.meta["exhausted"] = part.exhausted
    return m


# limits of the catalog's convergent series


def _log_tail_integral(integrand_u: Callable[[float], float], u_max: float) -> float:
    """Integral over u in [0, u_max] of an exponentially decaying integrand, in chunks."""
    edges = np.arange(0.0, u_max + 5.0, 5.0)
    return math.fsum(quad(integrand_u, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0]
                     for lo, hi in zip(edges, edges[1:]))


def _positive_series(h: Callable[[np.ndarray], np.ndarray], integrand_u, decay: float, cut: int = 4096) -> float:
    """sum_{n>=1} h(n) for smooth positive h ~ n**-decay: direct sum plus an Euler-Maclaurin tail."""
    n = np.arange(1, cut, dtype=float)
    head = math.fsum(h(n))
    tail = _log_tail_integral(integrand_u, 40.0 / (decay - 1.0) + 50.0)
    d = 1e-2 * cut
    hp = (float(h(np.array([cut + d]))[0]) - float(h(np.array([cut - d]))[0])) / (2 * d)
    return head + tail + float(h(np.array([float(cut)]))[0]) / 2 - hp / 12


def ex32_limit(q: float, C: float) -> float:
    """Sum of the alternating Ex32 series, paired into a positive one."""
    p = 2.0 / q

    def h(n):
        return 1.0 / (C**2 * (2 * n - 0.5) ** p - 0.25)

    cut = 4096

    def integrand(u):
        # h(x) * x with x = cut * e^u, in logs to survive huge x
        lx = math.log(cut) + u
        x = math.exp(lx) if lx < 700 else math.inf
        ly = lx + math.log(2.0) + (math.log1p(-0.25 / x) if math.isfinite(x) else 0.0)
        denom_over_x = C**2 * math.exp(p * ly - lx) - 0.25 * math.exp(-lx)
        return 1.0 / denom_over_x

    return _positive_series(h, integrand, p, cut)


def _ex33_pair(x):
    """g(2x-1) - g(2x) with g(k) = 1/(sqrt(k+1) log(k+1)), without cancellation."""
    a1 = 2.0 * np.asarray(x, dtype=float)  # a + 1 where a = 2x - 1
    delta = 1.0 / a1
    L = np.log(a1)
    r = np.log1p(delta)
    sq = np.sqrt(1.0 + delta)
    num = (delta / (sq + 1.0)) * L + sq * r
    return num / (np.sqrt(a1) * L * sq * (L + r))


def ex33_limit() -> float:
    cut = 4096

    def integrand(u):
        x = cut * math.exp(u)
        return float(_ex33_pair(np.array([x]))[0]) * x

    return _positive_series(_ex33_pair, integrand, 1.5, cut)


# ladder mappings whose values are partial sums


class _PrefixSums:
    """Growing cache of partial sums z_n = sum_{k=1}^n term(k), z_0 = 0, accumulated in order."""

    def __init__(self, term: Callable[[np.ndarray], np.ndarray]):
        self.term = term
        self.sums = np.zeros(1)

    def upto(self, n: int) -> np.ndarray:
        have = len(self.sums) - 1
        if n > have:
            new = max(n, 2 * have, 1024)
            k = np.arange(have + 1, new + 1, dtype=float)
            ext = np.cumsum(np.concatenate([[self.sums[-1]], self.term(k)]))[1:]
            self.sums = np.concatenate([self.sums, ext])
        return self.sums

    def __getitem__(self, n: int) -> float:
        return float(self.upto(n)[n])

    def range(self, start: int, stop: int) -> np.ndarray:
        return self.upto(stop)[start:stop]


def _ladder_partial_sum_mapping(term, limit: float, kind: AlgebraKind, a: float, b: float, name: str,
                                unit: AlgebraElement | None = None) -> StepMapping:
    s = GeometricLadder(a, b)
    sums = _PrefixSums(term)
    u = unit if unit is not None else alg.identity(kind)
    udata = u.data

    def value_fn(i):
        s.validate(i)
        if i.top:
            return u * limit
        return u * sums[i.coords[0]]

    def batch(prefix, start, stop):
        v = sums.range(start, stop)
        return v.reshape((-1,) + (1,) * kind.batch_ndim()) * udata

    m = StepMapping(s, kind, value_fn, u * limit, batch, name)
    m.meta["scalar_sums"] = sums
    m.meta["scalar_limit"] = limit
    m.meta["unit"] = u
    return m


# catalog


def _unit_from(params: dict) -> tuple[AlgebraKind, AlgebraElement]:
    z = params.get("z", 1.0)
    if isinstance(z, AlgebraElement):
        return z.kind, z
    if isinstance(z, dict):
        e = alg.from_json(z)
        return e.kind, e
    kind_spec = params.get("kind", "scalar")
    n = int(params.get("n", 1))
    if kind_spec == "scalar":
        kind = AlgebraKind.scalar()
    elif kind_spec == "matrix":
        kind = AlgebraKind.matrix(n)
    elif kind_spec == "diag":
        kind = AlgebraKind.diag(n)
    else:
        raise BadParams(f"unknown kind {kind_spec!r}")
    return kind, alg.identity(kind) * float(z)


def _tower_mapping(name: str, coef, coef_norm, params, weighted_coef=None) -> StepMapping:
    kind, z = _unit_from(params)
    a, b = float(params.get("a", 0.0)), float(params.get("b", 1.0))
    s = DyadicTower(1, a, b)
    zdata = z.data
    zn = z.norm()

    def value_fn(i):
        s.validate(i)
        n0, n1 = i.coords
        return z * coef(n0, np.array([n1]))[0]

    def batch(prefix, start, stop):
        c = coef(prefix[0], np.arange(start, stop))
        return c.reshape((-1,) + (1,) * kind.batch_ndim()) * zdata

    def norm_formula(i):
        return coef_norm(*i.coords) * zn

    weighted_batch = None
    if weighted_coef is not None:
        width = b - a

        def weighted_batch(prefix, start, stop):
            c = weighted_coef(prefix[0], np.arange(start, stop)) * width
            return c.reshape((-1,) + (1,) * kind.batch_ndim()) * zdata

    return StepMapping(s, kind, value_fn, alg.zero(kind), batch, name, {}, norm_formula, weighted_batch)


def _ex201(params):
    def coef(n0, n1):
        return (-1.0) ** (n0 + n1) / ((n0 + 1.0) * (n1 + 1.0))

    return _tower_mapping("ex201", coef, lambda n0, n1: 1.0 / ((n0 + 1.0) * (n1 + 1.0)), params)


def _ex301(params):
    def coef(n0, n1):
        e = (n0 + n1 + 2).astype(float) if isinstance(n1, np.ndarray) else float(n0 + n1 + 2)
        return (-2.0) ** e / ((n0 + 1.0) * (n1 + 1.0))

    def weighted(n0, n1):
        return np.where((n0 + n1) % 2 == 0, 1.0, -1.0) / ((n0 + 1.0) * (n1 + 1.0))

    return _tower_mapping("ex301", coef, lambda n0, n1: 2.0 ** (n0 + n1 + 2) / ((n0 + 1.0) * (n1 + 1.0)), params,
                          weighted)


def _ex302(params):
    def coef(n0, n1):
        e = (n0 + n1 + 2).astype(float) if isinstance(n1, np.ndarray) else float(n0 + n1 + 2)
        return 2.0**e / ((n0 + 1.0) ** 2 * (n1 + 1.0) ** 2)

    def weighted(n0, n1):
        return 1.0 / ((n0 + 1.0) ** 2 * (n1 + 1.0) ** 2)

    return _tower_mapping("ex302", coef, lambda n0, n1: 2.0 ** (n0 + n1 + 2) / ((n0 + 1.0) ** 2 * (n1 + 1.0) ** 2),
                          params, weighted)


def ex32_term(k, q: float, C: float):
    k = np.asarray(k, dtype=float)
    sgn = np.where(k % 2 == 1, 1.0, -1.0)  # (-1)**(k+1)
    return sgn / (C * (k + sgn / 2) ** (1.0 / q) - sgn / 2)


def _ex32(params):
    q = float(params.get("q", 1.0))
    C = float(params.get("C", 1.0))
    if not 0 < q < 2:
        raise BadParams("ex32 needs q in (0, 2)")
    if not C > 0.5 * (2.0 / 3.0) ** (1.0 / q):
        raise BadParams("ex32 needs C > (1/2)(2/3)**(1/q)")
    kind, z = _unit_from(params)
    a, b = float(params.get("a", 0.0)), float(params.get("b", 1.0))
    m = _ladder_partial_sum_mapping(lambda k: ex32_term(k, q, C), ex32_limit(q, C), kind, a, b, "ex32", z)
    m.meta.update(q=q, C=C)
    return m


def ex33_term(k):
    k = np.asarray(k, dtype=float)
    sgn = np.where(k % 2 == 1, 1.0, -1.0)
    return sgn / (np.sqrt(k + 1) * np.log(k + 1))


def _ex33(params):
    kind, z = _unit_from(params)
    a, b = float(params.get("a", 0.0)), float(params.get("b", 1.0))
    return _ladder_partial_sum_mapping(ex33_term, ex33_limit(), kind, a, b, "ex33", z)


def _is_rational_upto(t: np.ndarray, m: int) -> np.ndarray:
    """t = i/j with j <= m, up to RATIONAL_TOL."""
    t = np.asarray(t, dtype=float)
    hit = np.zeros(t.shape, dtype=bool)
    for j in range(1, m + 1):
        tj = t * j
        hit |= np.abs(tj - np.round(tj)) <= RATIONAL_TOL * j
    return hit


def ex401_values(t, m: int = EX401_TERMS, right: bool = False) -> np.ndarray:
    """Partial sum of the series with m terms; 1 on rationals with denominator <= m.

    With ``right=True`` returns the right limits A(t+).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = np.arange(1, m + 1, dtype=float)
    nt = np.outer(t, n)
    on_grid = np.abs(nt - np.round(nt)) <= RATIONAL_TOL * n
    u = nt - np.ceil(nt)
    u = np.where(on_grid, -1.0, u)  # u -> -1 from above as t moves right off a grid point
    safe_u = np.where(u == 0.0, -1.0, u)
    arg = np.pi / (2 * safe_u)
    terms = (2 * safe_u * np.cos(arg) + (np.pi / 2) * np.sin(arg)) / n**2
    vals = terms.sum(axis=1)
    if not right:
        vals = np.where(_is_rational_upto(t, m), 1.0, vals)
    return vals


def _ex401(params):
    m = int(params.get("m", EX401_TERMS))
    if m < 1:
        raise BadParams("ex401 needs m >= 1")
    kind, z = _unit_from(params)
    n = np.arange(1, m + 1, dtype=float)
    tail = (2 + math.pi / 2) * (math.pi**2 / 6 - math.fsum(1.0 / n**2))
    return RegulatedSample(kind, 0.0, 1.0, lambda t: ex401_values(t, m), None,
                           lambda t: ex401_values(t, m, right=True), None, "ex401",
                           {"terms": m, "tail_bound": tail, "sup_bound": (2 + math.pi / 2) * math.pi**2 / 6}, z)


def sqrtcos_values(t):
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0, t, 1.0)
    return np.where(t > 0, np.sqrt(safe) * np.cos(np.pi / safe), 0.0)


def sqrtcos_derivative(t):
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0, t, 1.0)
    d = np.cos(np.pi / safe) / (2 * np.sqrt(safe)) + np.pi * np.sin(np.pi / safe) / safe**1.5
    return np.where(t > 0, d, 0.0)


def _sqrtcos(params):
    kind, z = _unit_from(params)
    return RegulatedSample(kind, 0.0, 1.0, sqrtcos_values, None, None, sqrtcos_derivative, "sqrtcos",
                           {"product": "exp(-1)"}, z)


def _linear(params):
    kind, c = _unit_from({**params, "z": params.get("c", params.get("z", 1.0))})
    a, b = float(params.get("a", 0.0)), float(params.get("b", 1.0))
    return RegulatedSample(kind, a, b, lambda t: np.asarray(t, dtype=float), None, None,
                           lambda t: np.ones_like(np.asarray(t, dtype=float)), "linear", {}, c)


def _constant(params):
    kind, c = _unit_from({**params, "z": params.get("c", params.get("z", 1.0))})
    a, b = float(params.get("a", 0.0)), float(params.get("b", 1.0))
    return constant_step(c, a, b)


CATALOG = {
    "ex201": (_ex201, "alternating double series on the depth-1 tower; sum (log 2)^2"),
    "ex301": (_ex301, "unbounded steps (-2)^(n0+n1+2)/((n0+1)(n1+1)); product exp((log 2)^2), "
                      "not Riemann, not Bochner"),
    "ex302": (_ex302, "steps 2^(n0+n1+2)/((n0+1)^2(n1+1)^2); product exp((pi^2/6)^2), Bochner"),
    "ex32": (_ex32, "ladder partial sums with paired jumps (q, C); Stieltjes product I"),
    "ex33": (_ex33, "ladder partial sums of (-1)^(k+1)/(sqrt(k+1) log(k+1)); Stieltjes product "
                    "prod_{n>=2}(1+(-1)^n/(sqrt(n) log n))"),
    "ex401": (_ex401, "right-regulated series with second-kind jumps at rationals; bounded, Riemann integrable"),
    "sqrtcos": (_sqrtcos, "sqrt(t) cos(pi/t); Stieltjes product exp(-1), infinite 2-variation"),
    "linear": (_linear, "A(t) = c t; product exp(c (b - a)) type"),
    "constant": (_constant, "A(t) = c; Stieltjes product I"),
}


def catalog(name: str, **params):
    try:
        build = CATALOG[name][0]
    except KeyError:
        raise UnknownName(f"unknown catalog mapping {name!r}") from None
    try:
        return build(params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, BadParams):
            raise
        raise BadParams(str(exc)) from exc


def catalog_names() -> list:
    return list(CATALOG)


def describe(name: str) -> str:
    return CATALOG[name][1]


def mapping_from_json(obj: dict):
    """Mapping from its JSON form: a generator reference or explicit finite steps."""
    if "generator" in obj:
        gen = obj["generator"]
        params = dict(gen.get("params", {}))
        if "set" in obj:
            s = set_from_json(obj["set"])
            params.setdefault("a", s.a)
            params.setdefault("b", s.b)
        return catalog(gen["name"], **params)
    if "values" in obj:
        s = set_from_json(obj["set"])
        if not isinstance(s, FiniteSet):
            raise BadParams("explicit values need a finite set")
        by_pos = {}
        for entry in obj["values"]:
            i = OrdinalIndex.from_json(entry["idx"])
            by_pos[i.coords[0]] = alg.from_json(entry["elem"])
        count = len(s.points) - 1
        if sorted(by_pos) != list(range(count)):
            raise BadParams("explicit values must cover every step exactly once")
        vals = [by_pos[k] for k in range(count)]
        top = alg.from_json(obj["top"]) if "top" in obj else vals[-1]
        return finite_step_mapping(s.points, vals, top, name=obj.get("name", "explicit"))
    raise BadParams("mapping JSON needs 'generator' or 'values'")
