"""Concrete unital normed algebras: real scalars, dense matrices, truncated diagonal sequences.

Elements are immutable wrappers around numpy arrays.  The ``*_raw`` helpers on
:class:`AlgebraKind` work on bare arrays and, where it matters, on stacks of
arrays with a leading batch axis; the transfinite engine uses them in its inner
loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real

import numpy as np

from .errors import KindMismatch, OutOfDomain, Singular

EXP_SCALE_TARGET = 0.5
EXP_TERM_RTOL = 1e-18
LOG_TERM_RTOL = 1e-17
LOG_MAX_TERMS = 200_000
PIVOT_RTOL = 1e-13

_VARIANTS = ("scalar", "matrix", "diag")


@dataclass(frozen=True)
class AlgebraKind:
    variant: str
    n: int = 1

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown algebra variant {self.variant!r}")
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.variant == "scalar" and self.n != 1:
            raise ValueError("scalar algebra has n = 1")

    @classmethod
    def scalar(cls) -> "AlgebraKind":
        return cls("scalar", 1)

    @classmethod
    def matrix(cls, n: int) -> "AlgebraKind":
        return cls("matrix", int(n))

    @classmethod
    def diag(cls, n: int) -> "AlgebraKind":
        return cls("diag", int(n))

    @property
    def shape(self) -> tuple:
        if self.variant == "scalar":
            return ()
        if self.variant == "matrix":
            return (self.n, self.n)
        return (self.n,)

    @property
    def commutative(self) -> bool:
        return self.variant != "matrix" or self.n == 1

    def __str__(self):
        return "scalar" if self.variant == "scalar" else f"{self.variant}({self.n})"

    # raw array helpers; every one of them accepts an optional leading batch axis

    def identity_raw(self) -> np.ndarray:
        if self.variant == "scalar":
            return np.array(1.0)
        if self.variant == "matrix":
            return np.eye(self.n)
        return np.ones(self.n)

    def zero_raw(self) -> np.ndarray:
        return np.zeros(self.shape)

    def mul_raw(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.variant == "matrix":
            return a @ b
        return a * b

    def norm_raw(self, a: np.ndarray):
        """Norm of one element, or of every element along a leading batch axis."""
        if self.variant == "scalar":
            return np.abs(a) if np.ndim(a) else abs(float(a))
        if self.variant == "matrix":
            rows = np.abs(a).sum(axis=-1)
            return rows.max(axis=-1) if a.ndim > 2 else float(rows.max())
        m = np.abs(a).max(axis=-1)
        return m if a.ndim > 1 else float(m)

    def batch_ndim(self) -> int:
        return len(self.shape)


class AlgebraElement:
    """Immutable value in one of the concrete algebras."""

    __slots__ = ("kind", "data")

    def __init__(self, kind: AlgebraKind, data, *, check: bool = True):
        arr = np.array(data, dtype=float).reshape(kind.shape)
        if check and not np.all(np.isfinite(arr)):
            raise ValueError("algebra elements must have finite entries")
        arr.flags.writeable = False
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("AlgebraElement is immutable")

    def __repr__(self):
        return f"AlgebraElement({self.kind}, {self.data.tolist()!r})"

    def _same(self, other: "AlgebraElement"):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        if other.kind != self.kind:
            raise KindMismatch(f"{self.kind} vs {other.kind}")
        return other

    def __add__(self, other):
        o = self._same(other)
        if o is NotImplemented:
            return o
        return AlgebraElement(self.kind, self.data + o.data)

    def __sub__(self, other):
        o = self._same(other)
        if o is NotImplemented:
            return o
        return AlgebraElement(self.kind, self.data - o.data)

    def __neg__(self):
        return AlgebraElement(self.kind, -self.data)

    def __mul__(self, other):
        if isinstance(other, Real):
            return AlgebraElement(self.kind, self.data * float(other))
        o = self._same(other)
        if o is NotImplemented:
            return o
        return AlgebraElement(self.kind, self.kind.mul_raw(self.data, o.data))

    def __rmul__(self, other):
        if isinstance(other, Real):
            return AlgebraElement(self.kind, self.data * float(other))
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, Real):
            return AlgebraElement(self.kind, self.data / float(other))
        return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.data, other.data)

    __hash__ = None

    def norm(self) -> float:
        return norm(self)

    def inverse(self) -> "AlgebraElement":
        return inverse(self)

    def exp(self) -> "AlgebraElement":
        return exp(self)

    def log(self) -> "AlgebraElement":
        return log(self)

    def to_json(self) -> dict:
        return to_json(self)


# constructors


def identity(kind: AlgebraKind) -> AlgebraElement:
    return AlgebraElement(kind, kind.identity_raw(), check=False)


def zero(kind: AlgebraKind) -> AlgebraElement:
    return AlgebraElement(kind, kind.zero_raw(), check=False)


def scalar(x: float) -> AlgebraElement:
    return AlgebraElement(AlgebraKind.scalar(), x)


def matrix(rows) -> AlgebraElement:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("matrix elements must be square")
    return AlgebraElement(AlgebraKind.matrix(arr.shape[0]), arr)


def diag(values) -> AlgebraElement:
    arr = np.asarray(values, dtype=float).ravel()
    return AlgebraElement(AlgebraKind.diag(arr.size), arr)


def basis_diag(n: int, *positions: int) -> AlgebraElement:
    """Sum of the unit sequences e^k for the given 1-based positions, truncated to length n."""
    arr = np.zeros(n)
    for k in positions:
        if not 1 <= k <= n:
            raise ValueError(f"position {k} outside truncation length {n}")
        arr[k - 1] = 1.0
    return AlgebraElement(AlgebraKind.diag(n), arr)


# operations


def add(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    return x + y


def mul(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    return x * y


def norm(x: AlgebraElement) -> float:
    return float(x.kind.norm_raw(x.data))


def dist(x: AlgebraElement, y: AlgebraElement) -> float:
    return norm(x - y)


def commutator_norm(x: AlgebraElement, y: AlgebraElement) -> float:
    return norm(x * y - y * x)


def _inverse_matrix_raw(a: np.ndarray) -> np.ndarray:
    # Gauss-Jordan with partial pivoting
    n = a.shape[0]
    scale = float(np.abs(a).sum(axis=1).max())
    if scale == 0.0:
        raise Singular("zero matrix")
    m = np.concatenate([np.array(a, dtype=float), np.eye(n)], axis=1)
    for col in range(n):
        p = col + int(np.argmax(np.abs(m[col:, col])))
        if abs(m[p, col]) < PIVOT_RTOL * scale:
            raise Singular(f"pivot {m[p, col]:.3e} below threshold in column {col}")
        if p != col:
            m[[col, p]] = m[[p, col]]
        m[col] = m[col] / m[col, col]
        factors = m[:, col].copy()
        factors[col] = 0.0
        nz = factors != 0.0
        if nz.any():
            m[nz] -= np.outer(factors[nz], m[col])
    return m[:, n:]


def inverse_raw(kind: AlgebraKind, a: np.ndarray) -> np.ndarray:
    if kind.variant == "matrix":
        return _inverse_matrix_raw(a)
    scale = float(np.max(np.abs(a)))
    if scale == 0.0 or np.any(np.abs(a) < PIVOT_RTOL * scale):
        raise Singular("zero entry in a commutative element")
    return 1.0 / a


def inverse(x: AlgebraElement) -> AlgebraElement:
    return AlgebraElement(x.kind, inverse_raw(x.kind, x.data))


def is_invertible(x: AlgebraElement) -> bool:
    try:
        inverse(x)
    except Singular:
        return False
    return True


def exp_raw(kind: AlgebraKind, a: np.ndarray) -> np.ndarray:
    """Scaling and squaring of the Taylor series."""
    nrm = float(kind.norm_raw(a))
    s = 0
    if nrm > EXP_SCALE_TARGET:
        s = int(math.ceil(math.log2(nrm / EXP_SCALE_TARGET)))
    y = a / (2.0**s)
    total = kind.identity_raw()
    term = kind.identity_raw()
    k = 1
    while True:
        term = kind.mul_raw(term, y) / k
        total = total + term
        if float(kind.norm_raw(term)) <= EXP_TERM_RTOL * float(kind.norm_raw(total)):
            break
        k += 1
    for _ in range(s):
        total = kind.mul_raw(total, total)
    return total


def exp_batch_raw(kind: AlgebraKind, arr: np.ndarray) -> np.ndarray:
    """Exponential of every element in a stack; same arithmetic as :func:`exp_raw` row by row."""
    if kind.variant == "matrix":
        return np.stack([exp_raw(kind, a) for a in arr]) if len(arr) else arr.copy()
    arr = np.asarray(arr, dtype=float)
    if arr.shape[0] == 0:
        return arr.copy()
    nrm = np.asarray(kind.norm_raw(arr), dtype=float)
    s = np.zeros(nrm.shape, dtype=int)
    big = nrm > EXP_SCALE_TARGET
    s[big] = np.ceil(np.log2(nrm[big] / EXP_SCALE_TARGET)).astype(int)
    bshape = (-1,) + (1,) * (arr.ndim - 1)
    y = arr / np.power(2.0, s).reshape(bshape)
    total = np.ones_like(arr)
    term = np.ones_like(arr)
    active = np.ones(nrm.shape, dtype=bool)
    k = 1
    while active.any():
        term = np.where(active.reshape(bshape), term * y / k, term)
        total = np.where(active.reshape(bshape), total + term, total)
        done = kind.norm_raw(term) <= EXP_TERM_RTOL * kind.norm_raw(total)
        active &= ~done
        k += 1
    for j in range(int(s.max())):
        sq = (s > j).reshape(bshape)
        total = np.where(sq, total * total, total)
    return total


def exp(x: AlgebraElement) -> AlgebraElement:
    return AlgebraElement(x.kind, exp_raw(x.kind, x.data))


def log(x: AlgebraElement) -> AlgebraElement:
    """Logarithm by its power series around I; defined only when ||x - I|| < 1."""
    kind = x.kind
    d = x.data - kind.identity_raw()
    r = float(kind.norm_raw(d))
    if r >= 1.0:
        raise OutOfDomain(f"||x - I|| = {r:.6g} >= 1")
    total = kind.zero_raw()
    power = kind.identity_raw()
    for n in range(1, LOG_MAX_TERMS + 1):
        power = kind.mul_raw(power, d)
        term = power * (((-1.0) ** (n - 1)) / n)
        total = total + term
        if float(kind.norm_raw(term)) <= LOG_TERM_RTOL * max(1.0, float(kind.norm_raw(total))):
            break
    return AlgebraElement(kind, total)


# serialization


def to_json(x: AlgebraElement) -> dict:
    return {"kind": x.kind.variant, "n": x.kind.n, "data": [float(v) for v in x.data.ravel()]}


def from_json(obj: dict) -> AlgebraElement:
    try:
        variant = obj["kind"]
        data = obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed algebra element: {obj!r}") from exc
    n = int(obj.get("n", 1))
    if variant == "scalar":
        kind = AlgebraKind.scalar()
    elif variant == "matrix":
        kind = AlgebraKind.matrix(n)
    elif variant == "diag":
        kind = AlgebraKind.diag(n)
    else:
        raise ValueError(f"unknown algebra kind {variant!r}")
    flat = np.asarray(data, dtype=float).ravel()
    if flat.size != int(np.prod(kind.shape, dtype=int)):
        raise ValueError(f"data length {flat.size} does not match {kind}")
    return AlgebraElement(kind, flat)
