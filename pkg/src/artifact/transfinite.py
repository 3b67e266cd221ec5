"""Transfinite sums and products of families indexed by well-ordered sets.

Evaluation follows the ordinal structure.  At a successor the partial value absorbs
the new member: sums add it, products multiply it in from the left.  At a limit element
the partial value is the limit of the earlier ones.  For a dyadic tower this gives a
nested series: the value at the top is a series over the first coordinate whose terms
are the limits of series over the next coordinate, and so on down to the members.

Each of those series is cut off in one of two ways:

* the next term has norm below the level's tolerance share and the last three term
  norms decrease;
* Richardson extrapolation in 1/N over partial values at N = 8, 16, 32, ... has settled
  below the same share.  At even N an alternating tail expands in powers of 1/N just
  like a monotone one, so both kinds of tail are handled.  Pass ``extrapolate=False``
  to get the first rule alone.

A level at depth d, for its k-th sibling, receives ``tol * 2**-(d+1) / (k+1)``.
Running out of budget stops the whole walk.  The result then holds the exact partial
value over the members visited so far and is flagged ``truncated``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import algebra as alg
from .algebra import AlgebraElement, AlgebraKind
from .errors import DomainViolation, NotCommuting, NotLimit
from .ordinal import FiniteSet, OrdinalIndex, WellOrderedSet

DEFAULT_BUDGET = 1_000_000
FIRST_CHECKPOINT = 8
# sum over k >= 0 of 1/((k+1) log(k+2)**2) is 3.388, rounded up
SIBLING_NORMALIZER = 3.4
# extrapolated tails do not settle below this in double precision
PRECISION_FLOOR = 1e-13
RICHARDSON_MAX_ORDER = 8
# divergence certificate for nonnegative series: partial sums keep growing by a
# nearly constant amount per doubling of the number of terms
GROWTH_MIN_TERMS = 256
GROWTH_RATIO = 0.95
GROWTH_DOUBLINGS = 4


# families


BatchFn = Callable[[tuple, int, int], np.ndarray]


@dataclass
class Family:
    """Lazy assignment index -> algebra element over a well-ordered set.

    ``batch(prefix, start, stop)`` optionally returns the raw arrays of the members
    ``prefix + (n,)`` for ``start <= n < stop`` stacked along a new first axis; it must
    agree with ``gen``.  ``top`` is the member at the top point when it belongs to the
    family's index set.
    """

    set: WellOrderedSet
    kind: AlgebraKind
    gen: Callable[[OrdinalIndex], AlgebraElement]
    batch: BatchFn | None = None
    top: AlgebraElement | None = None
    name: str = ""

    def __call__(self, i: OrdinalIndex) -> AlgebraElement:
        return self.gen(i)

    def raw_range(self, prefix: tuple, start: int, stop: int) -> np.ndarray:
        if self.batch is not None:
            out = np.asarray(self.batch(prefix, start, stop), dtype=float)
            return out.reshape((stop - start,) + self.kind.shape)
        if stop <= start:
            return np.zeros((0,) + self.kind.shape)
        return np.stack([self.gen(OrdinalIndex(prefix + (n,))).data for n in range(start, stop)])

    def map(self, fn: Callable[[AlgebraElement], AlgebraElement], kind: AlgebraKind | None = None,
            batch_fn: Callable[[np.ndarray], np.ndarray] | None = None, top: bool = True,
            name: str = "") -> "Family":
        """Apply ``fn`` member by member; ``batch_fn`` is its stacked-array counterpart."""
        new_kind = kind or self.kind
        src = self

        def gen(i):
            return fn(src.gen(i))

        batch = None
        if batch_fn is not None:
            def batch(prefix, start, stop):
                return batch_fn(src.raw_range(prefix, start, stop))

        new_top = fn(self.top) if (top and self.top is not None) else None
        return Family(self.set, new_kind, gen, batch, new_top, name or self.name)

    def restrict(self, keep: Callable[[AlgebraElement], bool], neutral: AlgebraElement) -> "Family":
        """Replace members failing ``keep`` by ``neutral``; this drops them from a sum or product."""
        nraw = neutral.data
        kind = self.kind
        src = self

        def gen(i):
            x = src.gen(i)
            return x if keep(x) else neutral

        def batch(prefix, start, stop):
            arr = src.raw_range(prefix, start, stop)
            mask = np.array([keep(AlgebraElement(kind, a, check=False)) for a in arr], dtype=bool)
            out = arr.copy()
            out[~mask] = nraw
            return out

        return Family(self.set, kind, gen, batch, self.top, self.name)


def family_from_function(s: WellOrderedSet, kind: AlgebraKind, f: Callable[[OrdinalIndex], AlgebraElement],
                         top: AlgebraElement | None = None, name: str = "") -> Family:
    return Family(s, kind, f, None, top, name)


def finite_family(points, elements, top: AlgebraElement | None = None, name: str = "") -> Family:
    """Family over a finite set; ``elements[k]`` sits at ``points[k]`` for every point below the top."""
    s = FiniteSet(tuple(points))
    elems = list(elements)
    if len(elems) != len(s.points) - 1:
        raise ValueError("need one element per point below the top")
    kind = elems[0].kind

    def gen(i):
        s.validate(i)
        return elems[i.coords[0]]

    def batch(prefix, start, stop):
        return np.stack([e.data for e in elems[start:stop]]) if stop > start else np.zeros((0,) + kind.shape)

    return Family(s, kind, gen, batch, top, name)


def exp_family(f: Family) -> Family:
    kind = f.kind
    return f.map(alg.exp, batch_fn=lambda arr: alg.exp_batch_raw(kind, arr), name=f"exp({f.name})")


def norm_family(f: Family) -> Family:
    kind = f.kind
    sk = AlgebraKind.scalar()
    return f.map(lambda x: alg.scalar(x.norm()), kind=sk,
                 batch_fn=lambda arr: np.asarray(kind.norm_raw(arr), dtype=float).reshape(len(arr)),
                 name=f"|{f.name}|")


def shift_family(f: Family, c: float) -> Family:
    """Family c*I + x_alpha, e.g. c = 1 for (I + x) or, after negation, 1 - p."""
    kind = f.kind
    ident = kind.identity_raw()
    return f.map(lambda x: alg.identity(kind) * c + x, batch_fn=lambda arr: arr + c * ident,
                 name=f"{c}+{f.name}")


def negate_family(f: Family) -> Family:
    return f.map(lambda x: -x, batch_fn=lambda arr: -arr, name=f"-{f.name}")


# results


@dataclass
class TransfiniteResult:
    value: AlgebraElement
    achieved_tol: float
    terms_used: int
    truncated: bool
    limit_points_visited: int
    extrapolated: int = 0

    @property
    def verdict(self) -> str:
        return "inconclusive" if self.truncated else "convergent"

    def to_json(self) -> dict:
        return {
            "value": self.value.to_json(),
            "achieved_tol": self.achieved_tol,
            "terms_used": self.terms_used,
            "truncated": self.truncated,
            "limit_points_visited": self.limit_points_visited,
        }


@dataclass
class SummabilityVerdict:
    verdict: str  # Convergent | Inconclusive | DivergenceWitness
    witness: str | None = None
    value: float | None = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.verdict == "Convergent"

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "witness": self.witness, "value": self.value}


# extrapolation


def richardson(values: list, norm: Callable[[np.ndarray], float], max_order: int = RICHARDSON_MAX_ORDER):
    """Limit estimate and error estimate from partial values at N0 * 2**j.

    Assumes the remainder expands in integer powers of 1/N.  Returns ``(estimate, error)``;
    the error is infinite until three checkpoints exist.
    """
    table: list[list[np.ndarray]] = []
    for j, v in enumerate(values):
        row = [np.asarray(v, dtype=float)]
        for k in range(1, min(j, max_order) + 1):
            row.append(row[k - 1] + (row[k - 1] - table[j - 1][k - 1]) / (2.0**k - 1.0))
        table.append(row)
    j = len(table) - 1
    if j < 2:
        return np.asarray(values[-1], dtype=float), math.inf
    k = len(table[j]) - 1
    est = table[j][k]
    err = max(norm(est - table[j][k - 1]), norm(est - table[j - 1][k - 1]))
    return est, float(err)


# the evaluator


class _Exhausted(Exception):
    pass


class _Diverges(Exception):
    def __init__(self, prefix, checkpoints, increments):
        super().__init__("nonnegative series grows without bound")
        self.prefix = prefix
        self.checkpoints = checkpoints
        self.increments = increments


@dataclass
class _Series:
    value: np.ndarray
    err: float
    complete: bool
    extrapolated: bool


class Evaluator:
    """Ordinal-structured evaluation of one family; caches completed limit values.

    ``op`` is "sum" or "product".  ``monotone`` enables the divergence certificate and
    is only meaningful for nonnegative scalar families.
    """

    def __init__(self, family: Family, op: str, tol: float, budget: int = DEFAULT_BUDGET,
                 extrapolate: bool = True, monotone: bool = False):
        if op not in ("sum", "product"):
            raise ValueError("op must be 'sum' or 'product'")
        if not tol > 0:
            raise ValueError("tol must be positive")
        if budget < 1:
            raise ValueError("budget must be at least 1")
        self.f = family
        self.kind = family.kind
        self.op = op
        self.tol = float(tol)
        self.budget = int(budget)
        self.extrapolate = extrapolate
        self.monotone = monotone
        self.used = 0
        self.limits = 0
        self.extrapolated = 0
        self.exhausted = False
        self._cache: dict[tuple, _Series] = {}
        self._neutral = self.kind.zero_raw() if op == "sum" else self.kind.identity_raw()
        self._ident = self.kind.identity_raw()

    # primitives

    def _norm(self, a) -> float:
        return float(self.kind.norm_raw(a))

    def _term_norms(self, arr: np.ndarray) -> np.ndarray:
        if self.op == "product":
            arr = arr - self._ident
        return np.asarray(self.kind.norm_raw(arr), dtype=float).reshape(len(arr))

    def _fold_chunk(self, acc: np.ndarray, arr: np.ndarray) -> np.ndarray:
        if len(arr) == 0:
            return acc
        if self.op == "sum":
            return acc + arr.sum(axis=0)
        if self.kind.variant == "matrix":
            for x in arr:
                acc = x @ acc
            return acc
        return np.prod(arr, axis=0) * acc

    def _fold(self, acc: np.ndarray, term: np.ndarray) -> np.ndarray:
        if self.op == "sum":
            return acc + term
        return self.kind.mul_raw(term, acc)

    def level_tol(self, depth: int, sibling: int) -> float:
        # the sibling weights sum to less than 1, so nested errors add up to at most tol
        weighted = self.tol * 2.0 ** (-depth - 1) / (SIBLING_NORMALIZER * (sibling + 1) * math.log(sibling + 2) ** 2)
        return max(weighted, PRECISION_FLOOR)

    def _take(self, n: int) -> int:
        room = self.budget - self.used
        if room <= 0:
            self.exhausted = True
            raise _Exhausted()
        return min(n, room)

    # series over one coordinate

    def series(self, prefix: tuple) -> _Series:
        """Limit over the coordinate following ``prefix``; ``()`` means the top point."""
        if prefix in self._cache:
            return self._cache[prefix]
        s = self.f.set
        level = len(prefix)
        innermost = level == s.ndim - 1
        ltol = self.level_tol(level, prefix[-1] if prefix else 0)
        acc = self._neutral.copy()
        checkpoints: list[np.ndarray] = []
        norms_tail: list[float] = []
        child_err = 0.0
        scale = 1.0
        n = 0
        next_cp = FIRST_CHECKPOINT
        result = None
        try:
            while result is None:
                if innermost:
                    want = next_cp - n
                    take = self._take(want)
                    arr = self.f.raw_range(prefix, n, n + take)
                    self.used += take
                    tn = self._term_norms(arr)
                    stop_at = self._plain_stop(norms_tail, tn, ltol)
                    if stop_at is not None:
                        acc = self._fold_chunk(acc, arr[: stop_at + 1])
                        result = _Series(acc, float(tn[stop_at]), True, False)
                        break
                    acc = self._fold_chunk(acc, arr)
                    norms_tail = (norms_tail + tn.tolist())[-3:]
                    n += take
                    if take < want:
                        self.exhausted = True
                        raise _Exhausted()
                else:
                    sub = self.series(prefix + (n,))
                    term = sub.value
                    child_err += sub.err
                    if not sub.complete:
                        acc = self._fold(acc, term)
                        raise _Exhausted()
                    acc = self._fold(acc, term)
                    if self.op == "product":
                        scale = max(scale, self._norm(acc))
                    tn = self._term_norms(term[None])
                    stop_at = self._plain_stop(norms_tail, tn, ltol)
                    norms_tail = (norms_tail + tn.tolist())[-3:]
                    n += 1
                    if stop_at is not None:
                        result = _Series(acc, float(tn[0]), True, False)
                        break
                    if n < next_cp:
                        continue
                # checkpoint reached
                checkpoints.append(acc.copy())
                next_cp *= 2
                if self.monotone:
                    self._growth_check(prefix, checkpoints)
                if self.extrapolate and len(checkpoints) >= 3:
                    est, err = richardson(checkpoints, self._norm)
                    _, prev_err = richardson(checkpoints[:-1], self._norm) if len(checkpoints) > 3 else (None, math.inf)
                    if err < ltol and err <= prev_err:
                        result = _Series(est, err, True, True)
                        self.extrapolated += 1
        except _Exhausted:
            out = _Series(acc, math.inf, False, False)
            return out
        self.limits += 1
        result.err = result.err + child_err * scale
        self._cache[prefix] = result
        return result

    def _plain_stop(self, history: list, norms: np.ndarray, ltol: float):
        """First position whose norm is below ltol after three decreasing norms."""
        seq = list(history[-2:]) + norms.tolist()
        off = len(seq) - len(norms)
        for j in range(max(2, off), len(seq)):
            a, b, c = seq[j - 2], seq[j - 1], seq[j]
            if c < ltol and ((a > b > c) or (a == b == c == 0.0)):
                return j - off
        return None

    def _growth_check(self, prefix, checkpoints):
        cps = [float(np.asarray(c).reshape(-1)[0]) for c in checkpoints]
        if self.op == "product":
            if min(cps) <= 0:
                return
            cps = [math.log(c) for c in cps]
        nterms = [FIRST_CHECKPOINT * 2**j for j in range(len(cps))]
        inc = [b - a for a, b in zip(cps, cps[1:])]
        if len(inc) < GROWTH_DOUBLINGS + 1 or nterms[-1] < GROWTH_MIN_TERMS * 2**GROWTH_DOUBLINGS:
            return
        last = inc[-(GROWTH_DOUBLINGS + 1):]
        if all(x > 0 for x in last) and all(b >= GROWTH_RATIO * a for a, b in zip(last, last[1:])):
            raise _Diverges(prefix, list(zip(nterms, cps)), inc)

    # partial values below an arbitrary member

    def below(self, gamma: OrdinalIndex) -> _Series:
        """Partial value over all members strictly below ``gamma``."""
        s = self.f.set
        if gamma.top:
            return self.total()
        s.validate(gamma)
        acc = self._neutral.copy()
        err = 0.0
        complete = True
        try:
            for level, c in enumerate(gamma.coords):
                prefix = gamma.coords[:level]
                if level == s.ndim - 1:
                    take = self._take(c) if c else 0
                    arr = self.f.raw_range(prefix, 0, take)
                    self.used += take
                    acc = self._fold_chunk(acc, arr)
                    if take < c:
                        raise _Exhausted()
                else:
                    for n in range(c):
                        sub = self.series(prefix + (n,))
                        acc = self._fold(acc, sub.value)
                        err += sub.err
                        if not sub.complete:
                            raise _Exhausted()
        except _Exhausted:
            complete = False
        return _Series(acc, err if complete else math.inf, complete, False)

    def finite_total(self) -> _Series:
        s = self.f.set
        count = len(s.points) - 1
        take = self._take(count)
        arr = self.f.raw_range((), 0, take)
        self.used += take
        acc = self._fold_chunk(self._neutral.copy(), arr)
        return _Series(acc, 0.0 if take == count else math.inf, take == count, False)

    def total(self) -> _Series:
        if isinstance(self.f.set, FiniteSet):
            try:
                return self.finite_total()
            except _Exhausted:
                return _Series(self._neutral.copy(), math.inf, False, False)
        return self.series(())

    def result(self, ser: _Series, include_top: bool = True) -> TransfiniteResult:
        val = ser.value
        if include_top and self.f.top is not None:
            val = self._fold(val, self.f.top.data)
        err = ser.err if ser.complete else self._truncation_err()
        return TransfiniteResult(AlgebraElement(self.kind, val), float(err), self.used,
                                 not ser.complete, self.limits, self.extrapolated)

    def _truncation_err(self) -> float:
        # no certified bound exists after truncation; report infinity
        return math.inf


def _evaluate(f: Family, op: str, tol: float, budget: int, extrapolate: bool) -> TransfiniteResult:
    ev = Evaluator(f, op, tol, budget, extrapolate)
    return ev.result(ev.total())


def transfinite_sum(f: Family, tol: float = 1e-8, budget: int = DEFAULT_BUDGET, *,
                    extrapolate: bool = True) -> TransfiniteResult:
    """Sum over all members, including the top member when the family has one."""
    return _evaluate(f, "sum", tol, budget, extrapolate)


def transfinite_product(f: Family, tol: float = 1e-8, budget: int = DEFAULT_BUDGET, *,
                        extrapolate: bool = True) -> TransfiniteResult:
    """Product with every new member multiplied in from the left."""
    return _evaluate(f, "product", tol, budget, extrapolate)


def partial_below(f: Family, gamma: OrdinalIndex, op: str, tol: float = 1e-10,
                  budget: int = DEFAULT_BUDGET) -> TransfiniteResult:
    ev = Evaluator(f, op, tol, budget)
    return ev.result(ev.below(gamma), include_top=False)


# members used for sampled hypothesis checks


def sample_members(s: WellOrderedSet, count: int = 24) -> list:
    if isinstance(s, FiniteSet):
        return s.index_list()[:count]
    out = []
    k = 0
    while len(out) < count:
        # walk the diagonal layers n_0 + ... + n_m = k
        for coords in _layer(s.ndim, k):
            out.append(OrdinalIndex(coords))
            if len(out) >= count:
                break
        k += 1
    return out


def _layer(ndim: int, total: int):
    if ndim == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _layer(ndim - 1, total - first):
            yield (first,) + rest


# identities between sums, products and norms


def check_exp_sum_identity(f: Family, tol: float = 1e-8, budget: int = DEFAULT_BUDGET,
                           commute_tol: float = 1e-12):
    """(product of exp x_alpha, exp of the sum); they agree when the members commute."""
    members = [f(i) for i in sample_members(f.set)]
    if f.top is not None:
        members.append(f.top)
    for x in members:
        for y in members:
            c = alg.commutator_norm(x, y)
            if c > commute_tol * max(1.0, x.norm() * y.norm()):
                raise NotCommuting(f"sampled commutator norm {c:.3e}")
    prod = transfinite_product(exp_family(f), tol, budget).value
    total = transfinite_sum(f, tol, budget).value
    return prod, alg.exp(total)


def _nonneg_sum(f: Family, tol: float, budget: int):
    ev = Evaluator(f, "sum", tol, budget, monotone=True)
    ser = ev.total()
    return ev, ser


def abs_summable(f: Family, tol: float = 1e-8, budget: int = DEFAULT_BUDGET) -> SummabilityVerdict:
    """Summability of the norms, with the product of (1 + norms) as a cross-check."""
    p = norm_family(f)
    try:
        ev, ser = _nonneg_sum(p, tol, budget)
    except _Diverges as d:
        return _divergence_verdict(d, "partial sums of the norms")
    if not ser.complete:
        return SummabilityVerdict("Inconclusive", "budget exhausted before the norms settled",
                                  details={"terms_used": ev.used})
    total = float(ser.value) + (p.top.data.item() if p.top is not None else 0.0)
    try:
        pev = Evaluator(shift_family(p, 1.0), "product", tol, budget, monotone=True)
        pser = pev.total()
    except _Diverges as d:
        return _divergence_verdict(d, "partial products of 1 + norms")
    details = {"sum": total, "terms_used": ev.used, "achieved_tol": ser.err}
    if pser.complete:
        prod = float(pser.value) * (1.0 + p.top.data.item() if p.top is not None else 1.0)
        details["product_one_plus"] = prod
        # 1 + sum <= product <= exp(sum)
        consistent = 1.0 + total <= prod * (1 + 1e-12) + 2 * tol and math.log(prod) <= total + 2 * tol
        details["cross_check"] = consistent
        if not consistent:
            return SummabilityVerdict("Inconclusive", "sum and product of norms disagree", total, details)
    return SummabilityVerdict("Convergent", None, total, details)


def _divergence_verdict(d: _Diverges, what: str) -> SummabilityVerdict:
    n, v = d.checkpoints[-1]
    inc = d.increments[-1]
    where = "the top point" if not d.prefix else f"the limit closing block {d.prefix}"
    witness = (f"{what} on the series approaching {where} reach {v:.6g} after {n} terms and keep "
               f"growing by at least {min(d.increments[-GROWTH_DOUBLINGS:]):.4g} per doubling (last {inc:.4g})")
    return SummabilityVerdict("DivergenceWitness", witness,
                              details={"checkpoints": d.checkpoints, "increments": d.increments,
                                       "block": list(d.prefix)})


def check_one_minus_product(f: Family, tol: float = 1e-8, budget: int = DEFAULT_BUDGET):
    """(product of 1 - ||x_alpha||, absolute-summability verdict); the product is positive iff convergent."""
    p = norm_family(f)
    for i in sample_members(f.set, 64):
        v = float(p(i).data)
        if v >= 1.0:
            raise DomainViolation(f"||x|| = {v:.6g} >= 1 at {i}")
    if p.top is not None and float(p.top.data) >= 1.0:
        raise DomainViolation("||x|| >= 1 at the top point")
    q = shift_family(negate_family(p), 1.0)
    prod = transfinite_product(q, tol, budget)
    verdict = abs_summable(f, tol, budget)
    value = float(prod.value.data)
    if verdict.verdict == "DivergenceWitness":
        # the norms sum to infinity, so the product is zero; the partial value only bounds it
        verdict.details["partial_product_upper_bound"] = value
        verdict.details["partial_product_truncated"] = prod.truncated
        value = 0.0
    return value, verdict


def tail_limit_check(f: Family, limit_point: OrdinalIndex, k: int = 10, mode: str = "sum") -> list:
    """Norms of x_beta (or x_beta - I for products) along the canonical approach to a limit element."""
    s = f.set
    if isinstance(s, FiniteSet) or not s.is_limit(limit_point):
        raise NotLimit(f"{limit_point} is not a limit element")
    out = []
    for n in range(k):
        x = f(s.approach(limit_point, n))
        if mode == "product":
            x = x - alg.identity(f.kind)
        out.append(x.norm())
    return out
