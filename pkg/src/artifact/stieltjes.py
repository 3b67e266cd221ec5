"""Stieltjes product integrals prod (I + dA(t)).

For a step mapping the product is the transfinite product of its jump factors
x_alpha = I + z_alpha - z_pred(alpha), with x = I at the minimum and, when the step
values are continuous from the left at limit elements, x = I there too.  Refinement
sweeps over uniform or step-aligned partitions give an independent route, and the
p-variation probes report explicit lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import algebra as alg
from .algebra import AlgebraElement, AlgebraKind
from .errors import NotIdempotent, PrimitiveMismatch
from .ordinal import DyadicTower, FiniteSet, OrdinalIndex
from .prodint import ConvergenceReport, TaggedPartition, ordered_product_raw, refine
from .stepmap import StepMapping, eval_many
from .transfinite import (DEFAULT_BUDGET, Evaluator, Family, TransfiniteResult, richardson, sample_members,
                          transfinite_product)

# left-limit check: distances at approach members 2**j, j < LIMIT_CHECK_DOUBLINGS
LIMIT_CHECK_DOUBLINGS = 21
# a tail counts as decaying to zero when the distance shrinks by at least this factor
# per doubling on average over the last DECAY_WINDOW checkpoints
DECAY_RATIO = 0.9
DECAY_WINDOW = 8
# the general limit factor must settle over this many consecutive approach members
SETTLE_COUNT = 10
SETTLE_START = 2**16
# p-variation: increments of the p-th power sums that do not shrink below this ratio per
# doubling are read as growth
PVAR_GROWTH_RATIO = 0.97
PVAR_WINDOW = 3
IDEMPOTENT_TOL = 1e-12


# the two-value example


@dataclass
class TwoValueResult:
    value: AlgebraElement
    invertible: bool

    @property
    def verdict(self) -> str:
        return "exists" if self.invertible else "NotInvertible"


def two_value_product(z_a: AlgebraElement, z_b: AlgebraElement) -> TwoValueResult:
    """I + z_b - z_a; the Stieltjes product integral exists exactly when this is invertible."""
    v = AlgebraElement(z_a.kind, z_a.kind.identity_raw() + (z_b.data - z_a.data))
    return TwoValueResult(v, alg.is_invertible(v))


# left limits at limit elements


@dataclass
class LimitCheck:
    point: OrdinalIndex
    consistent: bool
    method: str
    distances: list

    def to_json(self) -> dict:
        return {"point": self.point.to_json(), "consistent": self.consistent, "method": self.method,
                "last_distance": self.distances[-1] if self.distances else None}


def _approach_values(A: StepMapping, gamma: OrdinalIndex, ns) -> np.ndarray:
    s = A.set
    return np.stack([A.z(s.approach(gamma, int(n))).data for n in ns])


def left_limit_check(A: StepMapping, gamma: OrdinalIndex, tol: float) -> LimitCheck:
    """Does z_beta tend to z_gamma as beta increases to the limit element gamma?

    Accepted when the distance at the last checkpoint is below ``tol``, when Richardson
    extrapolation of z_beta lands within ``tol`` of z_gamma, or when the distance shrinks
    geometrically per doubling of the approach index (a tail that is still above ``tol``
    but visibly heading to zero).
    """
    ns = [2**j for j in range(1, LIMIT_CHECK_DOUBLINGS)]
    vals = _approach_values(A, gamma, ns)
    target = A.z(gamma).data
    norm = A.kind.norm_raw
    d = [float(norm(v - target)) for v in vals]
    if d[-1] < tol:
        return LimitCheck(gamma, True, "distance", d)
    est, err = richardson(list(vals[-9:]), norm)
    if err < tol and float(norm(est - target)) < tol:
        return LimitCheck(gamma, True, "extrapolation", d)
    tail = d[-DECAY_WINDOW - 1:]
    if all(y < x for x, y in zip(tail, tail[1:])) and tail[0] > 0:
        rate = (tail[-1] / tail[0]) ** (1.0 / (len(tail) - 1))
        if rate <= DECAY_RATIO:
            return LimitCheck(gamma, True, "geometric decay per doubling", d)
    return LimitCheck(gamma, False, "mismatch", d)


def general_limit_factor(A: StepMapping, gamma: OrdinalIndex, tol: float):
    """lim I + z_gamma - z_beta over the approach to gamma, or None when it does not settle."""
    ns = range(SETTLE_START, SETTLE_START + SETTLE_COUNT)
    vals = A.kind.identity_raw() + A.z(gamma).data - _approach_values(A, gamma, ns)
    norm = A.kind.norm_raw
    spread = max(float(norm(v - vals[-1])) for v in vals)
    return vals[-1] if spread < tol else None


def limit_points_to_check(s, count: int = 8) -> list:
    if isinstance(s, FiniteSet):
        return []
    pts = [OrdinalIndex((), True)]
    if isinstance(s, DyadicTower) and s.ndim > 1:
        for n in range(1, count + 1):
            pts.append(OrdinalIndex((n,) + (0,) * (s.ndim - 1)))
    return pts


# the jump family


def jump_family(A: StepMapping, limit_factors: dict | None = None) -> Family:
    """x at the minimum is I; at a successor I + z - z_pred; at a limit element I unless overridden."""
    s = A.set
    kind = A.kind
    ident = kind.identity_raw()
    overrides = limit_factors or {}

    def at_limit(i):
        return overrides.get(i, ident)

    def gen(i):
        s.validate(i)
        if i.top:
            if isinstance(s, FiniteSet):
                pred = s.predecessor(i)
                return AlgebraElement(kind, ident + (A.top_value.data - A.z(pred).data))
            return AlgebraElement(kind, at_limit(i))
        if i.coords[-1] == 0:
            if isinstance(s, FiniteSet) or not any(i.coords):
                return AlgebraElement(kind, ident)
            return AlgebraElement(kind, at_limit(i))
        pred = s.predecessor(i)
        return AlgebraElement(kind, ident + (A.z(i).data - A.z(pred).data))

    def batch(prefix, start, stop):
        lo = max(start - 1, 0)
        z = A.z_raw_range(prefix, lo, stop)
        out = np.empty((stop - start,) + kind.shape)
        if start == 0:
            first = OrdinalIndex(prefix + (0,))
            out[0] = gen(first).data
            out[1:] = ident + (z[1:] - z[:-1])
        else:
            out[:] = ident + (z[1:] - z[:-1])
        return out

    top = gen(OrdinalIndex((), True))
    return Family(s, kind, gen, batch, top, f"jumps({A.name})")


@dataclass
class KSResult(TransfiniteResult):
    invertible: bool = True
    limit_checks: list = field(default_factory=list)
    mode: str = "continuous"
    inconclusive_limits: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if self.inconclusive_limits or self.truncated:
            return "inconclusive"
        return "convergent" if self.invertible else "not-invertible"

    def to_json(self) -> dict:
        out = super().to_json()
        out.update(verdict=self.verdict, invertible=self.invertible, mode=self.mode,
                   limit_checks=[c.to_json() for c in self.limit_checks])
        return out


def ks_step_product(A: StepMapping, tol: float = 1e-8, budget: int = DEFAULT_BUDGET, mode: str = "continuous",
                    check_limits: bool = True) -> KSResult:
    """Stieltjes product integral of a step mapping as the product of its jump factors.

    ``mode="continuous"`` uses I at limit elements after checking that z is continuous from the
    left there; where that check fails, or with ``mode="general"``, the factor is the settled
    limit of I + z_gamma - z_beta.  Limits that neither match nor settle make the
    result inconclusive.
    """
    if mode not in ("continuous", "general"):
        raise ValueError("mode is 'continuous' or 'general'")
    checks = []
    overrides = {}
    unresolved = []
    if check_limits:
        for gamma in limit_points_to_check(A.set):
            chk = left_limit_check(A, gamma, tol) if mode == "continuous" else None
            if chk is not None:
                checks.append(chk)
            if chk is None or not chk.consistent:
                fac = general_limit_factor(A, gamma, tol)
                if fac is None:
                    unresolved.append(gamma)
                else:
                    overrides[gamma] = fac
    fam = jump_family(A, overrides)
    res = transfinite_product(fam, tol, budget)
    return KSResult(res.value, res.achieved_tol, res.terms_used, res.truncated, res.limit_points_visited,
                    res.extrapolated, alg.is_invertible(res.value), checks, mode, unresolved)


# refinement sweeps


def stieltjes_factors_raw(kind: AlgebraKind, values: np.ndarray) -> np.ndarray:
    """I + A(t_i) - A(t_{i-1}) from the stacked values A(t_0), ..., A(t_m)."""
    return kind.identity_raw() + (values[1:] - values[:-1])


def stieltjes_partition_product(A, points) -> AlgebraElement:
    vals = eval_many(A, points)
    return AlgebraElement(A.kind, ordered_product_raw(A.kind, stieltjes_factors_raw(A.kind, vals)))


def aligned_values(A: StepMapping, count: int) -> np.ndarray:
    """A at the first ``count`` step points followed by A(b), addressed by index."""
    s = A.set
    if isinstance(s, FiniteSet):
        count = min(count, len(s.points) - 1)
        z = A.z_raw_range((), 0, count)
    elif isinstance(s, DyadicTower) and s.ndim == 1:
        z = A.z_raw_range((), 0, count)
    else:
        raise ValueError("aligned partitions need a finite set or a geometric ladder")
    return np.concatenate([z, A.top_value.data[None]])


def aligned_product(A: StepMapping, count: int) -> AlgebraElement:
    vals = aligned_values(A, count)
    return AlgebraElement(A.kind, ordered_product_raw(A.kind, stieltjes_factors_raw(A.kind, vals)))


def rs_refinement(A, tol: float = 1e-8, max_levels: int = 16, aligned: bool = False, start_level: int = 0,
                  extrapolate: bool = True, a: float | None = None, b: float | None = None,
                  stop_early: bool = True) -> ConvergenceReport:
    """Partition products of I + A(t_i) - A(t_{i-1}) on doubling partitions.

    Uniform partitions of [a, b] by default (a sub-interval may be given); ``aligned=True``
    uses the first 2**k step points of a ladder or finite step mapping instead.
    """
    lo = A.a if a is None else a
    hi = A.b if b is None else b

    if aligned:
        def level(k):
            n = 2**k
            return n, aligned_product(A, n)
    else:
        def level(k):
            m = 2**k
            pts = np.linspace(lo, hi, m + 1)
            pts[0], pts[-1] = lo, hi
            return m, stieltjes_partition_product(A, pts)

    return refine(level, A.kind, tol, max_levels, start_level, extrapolate=extrapolate, stop_early=stop_early)


# p-variation


@dataclass
class PVariationEstimate:
    p: float
    lower_bounds: list
    sizes: list
    verdict: str  # FiniteSuggested | GrowthWitness

    def to_json(self) -> dict:
        return {"p": self.p, "verdict": self.verdict, "sizes": self.sizes, "lower_bounds": self.lower_bounds}


@dataclass(frozen=True)
class AlignedPartition:
    """The first ``count`` step points of a ladder or finite step mapping, then b."""

    count: int


def _partition_values(A, part) -> np.ndarray:
    if isinstance(part, AlignedPartition):
        return aligned_values(A, part.count)
    pts = part.points if isinstance(part, TaggedPartition) else part
    return eval_many(A, np.asarray(pts, dtype=float))


def p_sum(A, part, p: float) -> float:
    """sum of ||A(t_i) - A(t_{i-1})||**p over the partition."""
    vals = _partition_values(A, part)
    inc = np.asarray(A.kind.norm_raw(vals[1:] - vals[:-1]), dtype=float)
    return math.fsum(inc**p)


def p_variation_probe(A, p: float, partitions: list) -> PVariationEstimate:
    """Lower bounds (sum ||dA||**p)**(1/p), one per partition.

    With partitions nested in order of doubling size, p-th power sums whose increments
    do not shrink (ratio at least PVAR_GROWTH_RATIO over the last PVAR_WINDOW doublings)
    are reported as a growth witness.  Otherwise the label is FiniteSuggested.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    sums = [p_sum(A, part, p) for part in partitions]
    sizes = [part.count if isinstance(part, AlignedPartition) else
             (part.m if isinstance(part, TaggedPartition) else len(part) - 1) for part in partitions]
    bounds = [s ** (1.0 / p) for s in sums]
    inc = [y - x for x, y in zip(sums, sums[1:])]
    verdict = "FiniteSuggested"
    if len(inc) >= PVAR_WINDOW + 1:
        last = inc[-PVAR_WINDOW - 1:]
        if all(x > 0 for x in last) and all(y >= PVAR_GROWTH_RATIO * x for x, y in zip(last, last[1:])):
            verdict = "GrowthWitness"
    return PVariationEstimate(p, bounds, sizes, verdict)


def harmonic_partitions(a: float, b: float, sizes) -> list:
    """{a} together with a + (b - a)/i for i <= n, one partition per n."""
    out = []
    for n in sizes:
        inner = a + (b - a) / np.arange(n, 0, -1, dtype=float)
        out.append(np.concatenate([[a], inner]))
    return out


# the scalar characterization


@dataclass
class ScalarConditions:
    jumps_invertible: bool
    square_sum: str
    partition_certificate: bool
    details: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return self.jumps_invertible and self.square_sum == "Convergent" and self.partition_certificate

    def to_json(self) -> dict:
        return {"jumps_invertible": self.jumps_invertible, "square_sum": self.square_sum,
                "partition_certificate": self.partition_certificate, **self.details}


def _left_jumps(A: StepMapping) -> Family:
    """The scalar family z_alpha - z_pred(alpha) at successors, 0 elsewhere."""
    fam = jump_family(A)
    return fam.map(lambda x: x - alg.identity(A.kind), batch_fn=lambda arr: arr - 1.0,
                   name=f"dA({A.name})")


def scalar_rs_conditions(f: StepMapping, eps: float = 1e-6, probe: int = 100_000, tol: float = 1e-6,
                         budget: int = DEFAULT_BUDGET) -> ScalarConditions:
    """The three conditions for a scalar step mapping.

    A step mapping is right continuous, so every jump is a left jump at a successor point.
    (1) 1 + jump != 0 over the first ``probe`` members; (2) summability of the squared
    jumps, judged by the summation stop rules at ``tol``; (3) the smallest aligned
    partition, doubling in size, on which the squared gaps between the left limit at
    each right end and the right limit at each left end sum to less than ``eps``.
    """
    if f.kind.variant != "scalar":
        raise ValueError("scalar mapping required")
    s = f.set
    jumps = _left_jumps(f)
    details = {}
    # (1)
    if isinstance(s, FiniteSet):
        vals = np.concatenate([jumps.raw_range((), 0, len(s.points) - 1), jumps.top.data.reshape(1)])
    elif s.ndim == 1:
        vals = jumps.raw_range((), 0, probe)
    else:
        vals = np.concatenate([jumps.raw_range((n,), 0, max(probe // 64, 1)) for n in range(64)])
    bad = np.nonzero(np.abs(1.0 + vals) < 1e-14)[0]
    ok1 = bad.size == 0
    details["min_abs_one_plus_jump"] = float(np.min(np.abs(1.0 + vals)))
    if not ok1:
        details["first_singular_jump"] = int(bad[0])
    # (2)
    squares = jumps.map(lambda x: alg.scalar(float(x.data) ** 2), batch_fn=lambda arr: arr**2)
    from .transfinite import _Diverges
    try:
        # no extrapolation: square sums of slowly decaying jumps converge like 1/log n,
        # so the value is the partial sum where the stop rule fired, a lower bound
        ev = Evaluator(squares, "sum", tol, budget, extrapolate=False, monotone=True)
        ser = ev.total()
        verdict2 = "Convergent" if ser.complete else "Inconclusive"
        details["square_sum_partial"] = float(ser.value) + (float(squares.top.data) if squares.top is not None else 0.0)
        details["square_sum_terms"] = ev.used
    except _Diverges:
        verdict2 = "DivergenceWitness"
    # (3)
    ok3 = False
    if isinstance(s, FiniteSet) or s.ndim == 1:
        n = 1
        while n <= 2**24:
            vals_n = aligned_values(f, n)
            # inside each aligned interval but the last, left and right limits coincide;
            # on the last one the left limit at b is z_b for a ladder and the last step
            # value for a finite set
            full = isinstance(s, FiniteSet) and n >= len(s.points) - 1
            gap = 0.0 if full else float(vals_n[-1] - vals_n[-2]) ** 2
            if gap < eps:
                ok3 = True
                details["certificate_points"] = n + 1
                details["certificate_sum"] = gap
                break
            if isinstance(s, FiniteSet) and n >= len(s.points) - 1:
                break
            n *= 2
    return ScalarConditions(ok1, verdict2, ok3, details)


# substitution


@dataclass
class SubstitutionResult:
    stieltjes: float
    riemann: float
    cutoffs: list
    details: dict = field(default_factory=dict)

    @property
    def distance(self) -> float:
        return abs(self.stieltjes - self.riemann)


def check_primitive(f: Callable, F: Callable, lo: float, b: float, tol: float, probes: int = 8) -> float:
    """max |F(t) - F(lo) - integral_lo^t f| over probe points; raises PrimitiveMismatch."""
    worst = 0.0
    F_lo = float(F(np.array([lo]))[0])
    for t in np.linspace(lo, b, probes + 1)[1:]:
        val, _ = quad(lambda u: float(f(np.array([u]))[0]), lo, t, epsabs=tol / 100, epsrel=1e-12, limit=500)
        worst = max(worst, abs(float(F(np.array([t]))[0]) - F_lo - val))
    if worst > tol / 10:
        raise PrimitiveMismatch(f"F differs from the integral of f by {worst:.3e}")
    return worst


class _ScalarMap:
    """Adapter: a vectorized scalar function as an evaluatable mapping."""

    def __init__(self, F, a, b):
        self.F, self.a, self.b = F, a, b
        self.kind = AlgebraKind.scalar()

    def eval_many(self, ts):
        return np.asarray(self.F(np.asarray(ts, dtype=float)), dtype=float)

    def __call__(self, t):
        return alg.scalar(float(self.eval_many([t])[0]))


def substitution_check(f: Callable, F: Callable, a: float = 0.0, b: float = 1.0, tol: float = 1e-4,
                       cutoff_exponents=None, max_levels: int = 22, primitive_from: float | None = None):
    """(prod (1 + dF), prod (1 + f dt)) for a scalar f with primitive F.

    The second value is exp(F(b) - F(a)).  The first comes from Stieltjes refinement on
    [a, b], or, when that does not settle or ``cutoff_exponents`` is given, on [c, b] for
    c = a + (b - a) 2**-k, completed by exp(F(c) - F(a)) on [a, c].  The primitive is
    checked by adaptive quadrature from ``primitive_from`` (default a).
    """
    check_primitive(f, F, a if primitive_from is None else primitive_from, b, tol)
    Fa = float(F(np.array([a]))[0])
    Fb = float(F(np.array([b]))[0])
    riemann = math.exp(Fb - Fa)
    M = _ScalarMap(F, a, b)
    details = {}
    if cutoff_exponents is None:
        rep = rs_refinement(M, tol / 10, max_levels, start_level=4)
        if rep.converged:
            details["report"] = rep.to_json()
            return SubstitutionResult(float(rep.limit.data), riemann, [], details)
        cutoff_exponents = (2, 3, 4, 5)
    values = []
    cuts = []
    for k in cutoff_exponents:
        c = a + (b - a) * 2.0**-k
        rep = rs_refinement(M, tol / 10, max_levels, start_level=6, a=c, b=b)
        Fc = float(F(np.array([c]))[0])
        values.append(float(rep.limit.data) * math.exp(Fc - Fa))
        cuts.append({"cut": c, "verdict": rep.verdict, "value": values[-1], "levels": len(rep.levels)})
    details["spread"] = max(values) - min(values)
    return SubstitutionResult(values[-1], riemann, cuts, details)


# idempotent values


def idempotent_identity(A: StepMapping, tol: float = 1e-10, budget: int = DEFAULT_BUDGET):
    """(prod (I + dA) * A(a), product of the z_alpha, their distance) for idempotent z."""
    s = A.set
    members = s.index_list() if isinstance(s, FiniteSet) else sample_members(s, 64)
    for i in list(members) + [OrdinalIndex((), True)]:
        z = A.z(i)
        if alg.dist(z * z, z) > IDEMPOTENT_TOL * max(1.0, z.norm()):
            raise NotIdempotent(f"z at {i} is not idempotent")
    ks = ks_step_product(A, tol, budget)
    left = ks.value * A(A.a)
    right = transfinite_product(A.values_family(include_top=True), tol, budget).value
    return left, right, alg.dist(left, right)
