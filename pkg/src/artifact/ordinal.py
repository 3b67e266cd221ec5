"""Well-ordered subsets of a bounded interval with successor, gap and limit structure.

Three encodings are supported:

* ``FiniteSet``: an explicit increasing list of points; the last one is the top ``b``.
* ``GeometricLadder``: the points ``b - 2**-n * (b - a)`` for ``n >= 0`` plus ``b``.
* ``DyadicTower``: the ladder construction iterated ``m`` times.  A member is addressed
  by ``m + 1`` natural-number coordinates; each extra coordinate places a fresh
  geometric ladder inside a gap of the previous level.

Members below the top are :class:`OrdinalIndex` values with coordinates; the top point
is the index with ``top=True``.  The lexicographic order of coordinates is the order
of the points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering
from typing import Iterator

from .errors import InvalidIndex, NoSuccessor, NotLimit

# beyond this many halvings the dyadic points stop being representable in doubles
MAX_DYADIC_EXPONENT = 52


@total_ordering
@dataclass(frozen=True)
class OrdinalIndex:
    coords: tuple = ()
    top: bool = False

    def _key(self):
        return (1, ()) if self.top else (0, self.coords)

    def __lt__(self, other):
        if not isinstance(other, OrdinalIndex):
            return NotImplemented
        return self._key() < other._key()

    def __repr__(self):
        return "OrdinalIndex(top)" if self.top else f"OrdinalIndex{self.coords}"

    def to_json(self):
        return "top" if self.top else list(self.coords)

    @classmethod
    def from_json(cls, obj) -> "OrdinalIndex":
        if obj == "top":
            return TOP
        if isinstance(obj, int):
            return cls((obj,))
        return cls(tuple(int(c) for c in obj))


TOP = OrdinalIndex((), True)


def idx(*coords: int) -> OrdinalIndex:
    return OrdinalIndex(tuple(int(c) for c in coords))


class WellOrderedSet:
    """Common interface; concrete encodings override the primitive methods."""

    a: float
    b: float

    @property
    def ndim(self) -> int:
        raise NotImplementedError

    @property
    def infinite(self) -> bool:
        raise NotImplementedError

    def minimum(self) -> OrdinalIndex:
        return OrdinalIndex((0,) * self.ndim)

    def top(self) -> OrdinalIndex:
        return TOP

    def validate(self, i: OrdinalIndex) -> None:
        raise NotImplementedError

    def value(self, i: OrdinalIndex) -> float:
        raise NotImplementedError

    def successor(self, i: OrdinalIndex) -> OrdinalIndex:
        raise NotImplementedError

    def predecessor(self, i: OrdinalIndex) -> OrdinalIndex:
        """The member whose successor is ``i``; raises InvalidIndex for limits and the minimum."""
        raise NotImplementedError

    def gap(self, i: OrdinalIndex) -> float:
        return self.value(self.successor(i)) - self.value(i)

    def is_limit(self, i: OrdinalIndex) -> bool:
        raise NotImplementedError

    def approach(self, i: OrdinalIndex, n: int) -> OrdinalIndex:
        """n-th member of the canonical increasing sequence converging to the limit element ``i``."""
        raise NotImplementedError

    def locate(self, t: float) -> OrdinalIndex:
        """The member alpha with value(alpha) <= t < value(successor(alpha)), or top when t == b."""
        raise NotImplementedError

    def locate_many(self, ts):
        """Vectorized :meth:`locate`: an int array of coordinates (rows of -1 mark the top)."""
        import numpy as np

        ts = np.asarray(ts, dtype=float)
        out = np.full((len(ts), self.ndim), -1, dtype=np.int64)
        for k, t in enumerate(ts):
            i = self.locate(float(t))
            if not i.top:
                out[k] = i.coords
        return out

    def enumerate_prefix(self, cutoff: float, budget: int, start: OrdinalIndex | None = None):
        """Members with value < cutoff in increasing order, at most ``budget`` of them.

        Returns ``(indices, truncated)``.  ``start`` skips members below it.  The walk also
        stops, flagged as truncated, when consecutive points would collide in floating point.
        """
        if not self.a <= cutoff <= self.b:
            raise ValueError(f"cutoff {cutoff} outside [{self.a}, {self.b}]")
        if budget < 1:
            raise ValueError("budget must be at least 1")
        cur = self.minimum() if start is None else start
        self.validate(cur)
        out: list[OrdinalIndex] = []
        while not cur.top and self.value(cur) < cutoff:
            if len(out) >= budget:
                return out, True
            nxt = self.successor(cur)
            if not nxt.top and self._collides(cur):
                return out, True
            out.append(cur)
            cur = nxt
        return out, False

    def _collides(self, i: OrdinalIndex) -> bool:
        return False

    def members(self, start: OrdinalIndex | None = None) -> Iterator[OrdinalIndex]:
        """Successor chain from ``start`` (default the minimum); for towers it stays in one block."""
        cur = self.minimum() if start is None else start
        while not cur.top:
            yield cur
            cur = self.successor(cur)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class FiniteSet(WellOrderedSet):
    points: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if len(pts) < 2:
            raise ValueError("a finite set needs at least its minimum and its top")
        if any(q <= p for p, q in zip(pts, pts[1:])):
            raise ValueError("points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def a(self):
        return self.points[0]

    @property
    def b(self):
        return self.points[-1]

    @property
    def ndim(self):
        return 1

    @property
    def infinite(self):
        return False

    def __len__(self):
        return len(self.points)

    def validate(self, i):
        if i.top:
            return
        if len(i.coords) != 1 or not 0 <= i.coords[0] < len(self.points) - 1:
            raise InvalidIndex(f"{i} is not a member below the top of a {len(self.points)}-point set")

    def value(self, i):
        self.validate(i)
        return self.b if i.top else self.points[i.coords[0]]

    def successor(self, i):
        self.validate(i)
        if i.top:
            raise NoSuccessor("the top point has no successor")
        k = i.coords[0] + 1
        return TOP if k == len(self.points) - 1 else OrdinalIndex((k,))

    def predecessor(self, i):
        self.validate(i)
        k = len(self.points) - 1 if i.top else i.coords[0]
        if k == 0:
            raise InvalidIndex("the minimum has no predecessor")
        return OrdinalIndex((k - 1,))

    def gap(self, i):
        return self.value(self.successor(i)) - self.value(i)

    def is_limit(self, i):
        self.validate(i)
        return False

    def approach(self, i, n):
        raise NotLimit("finite sets have no limit elements")

    def locate_many(self, ts):
        import numpy as np

        ts = np.asarray(ts, dtype=float)
        if ts.size and (ts.min() < self.a or ts.max() > self.b):
            raise ValueError("points outside the interval")
        pos = np.searchsorted(np.asarray(self.points), ts, side="right") - 1
        pos = np.where(ts == self.b, -1, pos)
        return pos.reshape(-1, 1).astype(np.int64)

    def locate(self, t):
        if not self.a <= t <= self.b:
            raise ValueError(f"{t} outside [{self.a}, {self.b}]")
        if t == self.b:
            return TOP
        lo, hi = 0, len(self.points) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.points[mid] <= t:
                lo = mid
            else:
                hi = mid
        return OrdinalIndex((lo,))

    def index_list(self) -> list:
        return [OrdinalIndex((k,)) for k in range(len(self.points) - 1)]

    def to_json(self):
        return {"type": "finite", "points": list(self.points)}


@dataclass(frozen=True)
class DyadicTower(WellOrderedSet):
    """Iterated geometric ladders of depth ``m`` on ``[a, b]``; members carry m + 1 coordinates."""

    m: int = 1
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("depth must be nonnegative")
        if not self.a < self.b:
            raise ValueError("need a < b")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def ndim(self):
        return self.m + 1

    @property
    def infinite(self):
        return True

    def validate(self, i):
        if i.top:
            return
        if len(i.coords) != self.ndim or any((not isinstance(c, int)) or c < 0 for c in i.coords):
            raise InvalidIndex(f"{i} needs {self.ndim} natural coordinates")

    @staticmethod
    def _unit_distance_to_top(coords) -> float:
        # 1 - u for the unit tower, accumulated exactly in dyadic arithmetic
        w = 2.0 ** -coords[0]
        g = 2.0 ** (-coords[0] - 1)
        for c in coords[1:]:
            w -= g * (1.0 - 2.0**-c)
            g *= 2.0 ** (-c - 1)
        return w

    def value(self, i):
        self.validate(i)
        if i.top:
            return self.b
        return self.b - self._unit_distance_to_top(i.coords) * (self.b - self.a)

    def successor(self, i):
        self.validate(i)
        if i.top:
            raise NoSuccessor("the top point has no successor")
        c = i.coords
        return OrdinalIndex(c[:-1] + (c[-1] + 1,))

    def predecessor(self, i):
        self.validate(i)
        if i.top or i.coords[-1] == 0:
            raise InvalidIndex(f"{i} is not a successor")
        c = i.coords
        return OrdinalIndex(c[:-1] + (c[-1] - 1,))

    def gap(self, i):
        self.validate(i)
        if i.top:
            raise NoSuccessor("the top point has no successor")
        return 2.0 ** -(sum(i.coords) + self.ndim) * (self.b - self.a)

    def is_limit(self, i):
        self.validate(i)
        if i.top:
            return True
        c = i.coords
        return c[-1] == 0 and any(c)

    def limit_level(self, i: OrdinalIndex) -> int:
        """Position of the coordinate that varies along the canonical approach to ``i``."""
        if i.top:
            return 0
        if not self.is_limit(i):
            raise NotLimit(f"{i} is not a limit element")
        j = max(k for k, c in enumerate(i.coords) if c)
        return j + 1

    def approach(self, i, n):
        level = self.limit_level(i)
        if i.top:
            return OrdinalIndex((n,) + (0,) * self.m)
        c = list(i.coords)
        c[level - 1] -= 1
        c[level] = n
        return OrdinalIndex(tuple(c))

    def _collides(self, i):
        return sum(i.coords) + self.ndim > MAX_DYADIC_EXPONENT

    def locate(self, t):
        if not self.a <= t <= self.b:
            raise ValueError(f"{t} outside [{self.a}, {self.b}]")
        if t == self.b:
            return TOP
        coords: list[int] = []
        for level in range(self.ndim):
            rest = (0,) * (self.ndim - level - 1)

            def val(n):
                return self.value(OrdinalIndex(tuple(coords) + (n,) + rest))

            # largest n with val(n) <= t; doubling then bisection
            hi = 1
            while hi < 4 * MAX_DYADIC_EXPONENT and val(hi) <= t:
                hi *= 2
            lo = 0
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if val(mid) <= t:
                    lo = mid
                else:
                    hi = mid
            coords.append(lo)
        return OrdinalIndex(tuple(coords))

    def _unit_distance_many(self, coords):
        # same operation order as _unit_distance_to_top, so the results agree bit for bit
        import numpy as np

        c0 = coords[:, 0].astype(float)
        w = np.power(2.0, -c0)
        g = np.power(2.0, -c0 - 1)
        for j in range(1, coords.shape[1]):
            c = coords[:, j].astype(float)
            w = w - g * (1.0 - np.power(2.0, -c))
            g = g * np.power(2.0, -c - 1)
        return w

    def locate_many(self, ts):
        import numpy as np

        ts = np.asarray(ts, dtype=float)
        if ts.size and (ts.min() < self.a or ts.max() > self.b):
            raise ValueError("points outside the interval")
        top = ts == self.b
        width = self.b - self.a
        coords = np.zeros((len(ts), self.ndim), dtype=np.int64)
        limit = 4 * MAX_DYADIC_EXPONENT
        for level in range(self.ndim):
            def vals(n):
                c = coords.copy()
                c[:, level] = n
                c[:, level + 1:] = 0
                return self.b - self._unit_distance_many(c) * width

            # largest n with vals(n) <= t, by bisection on [0, limit]
            lo = np.zeros(len(ts), dtype=np.int64)
            hi = np.full(len(ts), limit, dtype=np.int64)
            for _ in range(int(np.ceil(np.log2(limit))) + 1):
                mid = (lo + hi + 1) // 2
                ok = vals(mid) <= ts
                lo = np.where(ok, mid, lo)
                hi = np.where(ok, hi, mid - 1)
            coords[:, level] = lo
        coords[top] = -1
        return coords

    def to_json(self):
        return {"type": "tower", "m": self.m, "a": self.a, "b": self.b}


class GeometricLadder(DyadicTower):
    """The points b - 2**-n (b - a), n >= 0, plus b."""

    def __init__(self, a: float = 0.0, b: float = 1.0):
        super().__init__(0, a, b)

    def __repr__(self):
        return f"GeometricLadder(a={self.a}, b={self.b})"

    def to_json(self):
        return {"type": "ladder", "a": self.a, "b": self.b}


def set_from_json(obj: dict) -> WellOrderedSet:
    kind = obj.get("type")
    if kind == "finite":
        return FiniteSet(tuple(obj["points"]))
    if kind == "ladder":
        return GeometricLadder(float(obj.get("a", 0.0)), float(obj.get("b", 1.0)))
    if kind == "tower":
        return DyadicTower(int(obj["m"]), float(obj.get("a", 0.0)), float(obj.get("b", 1.0)))
    raise ValueError(f"unknown well-ordered set type {kind!r}")


# free-function spellings of the operations


def value(s: WellOrderedSet, i: OrdinalIndex) -> float:
    return s.value(i)


def successor(s: WellOrderedSet, i: OrdinalIndex) -> OrdinalIndex:
    return s.successor(i)


def gap(s: WellOrderedSet, i: OrdinalIndex) -> float:
    return s.gap(i)


def is_limit(s: WellOrderedSet, i: OrdinalIndex) -> bool:
    return s.is_limit(i)


def enumerate_prefix(s: WellOrderedSet, cutoff: float, budget: int, start: OrdinalIndex | None = None):
    return s.enumerate_prefix(cutoff, budget, start)
