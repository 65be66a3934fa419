"""Closed real intervals with outward-rounded double arithmetic.

Rounding is directed only when a result is actually inexact: the exact
rounding error of each sum and product is recovered with error-free
transformations (Knuth's TwoSum, Dekker's TwoProduct) and the float result
is nudged one ulp outward only in the direction the error points.  Exact
operations such as ``[1, 2] + [3, 4]`` therefore return exact endpoints.
"""

from __future__ import annotations

import math
import sys
from typing import Iterable

_INF = math.inf
_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a: float, b: float) -> tuple[float, float]:
    """Return ``(s, e)`` with ``s = fl(a + b)`` and ``a + b == s + e`` exactly."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def _split(a: float) -> tuple[float, float]:
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


# Dekker's product is error-free only while the split cannot overflow and the
# error term cannot underflow.
_SPLIT_MAX = 1e150
_UNDERFLOW = 2.0 ** -969


def _dekker_exact(a: float, b: float, p: float) -> bool:
    if not math.isfinite(p):
        return False
    if abs(a) > _SPLIT_MAX or abs(b) > _SPLIT_MAX:
        return False
    return abs(p) >= _UNDERFLOW or a == 0.0 or b == 0.0


def two_prod(a: float, b: float) -> tuple[float, float]:
    """Return ``(p, e)`` with ``p = fl(a * b)`` and ``a * b == p + e``.

    Outside the range where this is exact (huge operands, results near
    underflow) ``e`` is ``ulp(p)``, which bounds the magnitude of the error
    but not its sign.  For non-finite ``p`` the error is 0.
    """
    p = a * b
    if not _dekker_exact(a, b, p):
        return p, (math.ulp(p) if math.isfinite(p) else 0.0)
    if p == 0.0:
        return p, 0.0
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def add_down(a: float, b: float) -> float:
    s, e = two_sum(a, b)
    if s == _INF and math.isfinite(a) and math.isfinite(b):
        return sys.float_info.max
    return math.nextafter(s, -_INF) if e < 0.0 else s


def add_up(a: float, b: float) -> float:
    s, e = two_sum(a, b)
    if s == -_INF and math.isfinite(a) and math.isfinite(b):
        return -sys.float_info.max
    return math.nextafter(s, _INF) if e > 0.0 else s


def mul_down(a: float, b: float) -> float:
    p = a * b
    if not _dekker_exact(a, b, p):
        if math.isnan(p):
            return p
        return math.nextafter(p, -_INF) if math.isfinite(a) and math.isfinite(b) else p
    _, e = two_prod(a, b)
    return math.nextafter(p, -_INF) if e < 0.0 else p


def mul_up(a: float, b: float) -> float:
    p = a * b
    if not _dekker_exact(a, b, p):
        if math.isnan(p):
            return p
        return math.nextafter(p, _INF) if math.isfinite(a) and math.isfinite(b) else p
    _, e = two_prod(a, b)
    return math.nextafter(p, _INF) if e > 0.0 else p


def sum_up(values: Iterable[float]) -> float:
    """Upper bound on the exact sum of non-negative floats."""
    total = 0.0
    for v in values:
        total = add_up(total, v)
    return total


class Interval:
    """Closed interval ``[lo, hi]`` with ``lo <= hi``.

    Immutable.  Arithmetic operators accept plain numbers on either side.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float | None = None):
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if not lo <= hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    def __reduce__(self):
        return (Interval, (self.lo, self.hi))

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @classmethod
    def symmetric(cls, radius: float) -> "Interval":
        radius = abs(float(radius))
        return cls(-radius, radius)

    @classmethod
    def hull(cls, values: Iterable[float]) -> "Interval":
        values = list(values)
        return cls(min(values), max(values))

    # -- queries -------------------------------------------------------
    @property
    def width(self) -> float:
        return add_up(self.hi, -self.lo)

    @property
    def mid(self) -> float:
        return 0.5 * self.lo + 0.5 * self.hi

    @property
    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, other: "Interval | float") -> bool:
        if isinstance(other, Interval):
            return self.lo <= other.lo and other.hi <= self.hi
        return self.lo <= other <= self.hi

    __contains__ = contains

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def intersection(self, other: "Interval") -> "Interval":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ValueError("intervals are disjoint")
        return Interval(lo, hi)

    def union_hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    # -- arithmetic ----------------------------------------------------
    @staticmethod
    def _coerce(x) -> "Interval":
        return x if isinstance(x, Interval) else Interval(x, x)

    def __add__(self, other) -> "Interval":
        o = self._coerce(other)
        return Interval(add_down(self.lo, o.lo), add_up(self.hi, o.hi))

    __radd__ = __add__

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other) -> "Interval":
        o = self._coerce(other)
        return Interval(add_down(self.lo, -o.hi), add_up(self.hi, -o.lo))

    def __rsub__(self, other) -> "Interval":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Interval":
        o = self._coerce(other)
        if o.lo == o.hi:
            return self.scale(o.lo)
        if self.lo == self.hi:
            return o.scale(self.lo)
        a, b, c, d = self.lo, self.hi, o.lo, o.hi
        lo = min(mul_down(a, c), mul_down(a, d), mul_down(b, c), mul_down(b, d))
        hi = max(mul_up(a, c), mul_up(a, d), mul_up(b, c), mul_up(b, d))
        return Interval(lo, hi)

    __rmul__ = __mul__

    def scale(self, c: float) -> "Interval":
        c = float(c)
        if c == 0.0:
            return Interval(0.0, 0.0)
        if c > 0.0:
            return Interval(mul_down(self.lo, c), mul_up(self.hi, c))
        return Interval(mul_down(self.hi, c), mul_up(self.lo, c))

    def __pow__(self, n: int) -> "Interval":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        if n == 0:
            return Interval(1.0, 1.0)
        if n == 1:
            return self
        lo_abs, hi_abs = abs(self.lo), abs(self.hi)
        if n % 2 == 0:
            if self.lo <= 0.0 <= self.hi:
                return Interval(0.0, _pow_up(max(lo_abs, hi_abs), n))
            small, big = sorted((lo_abs, hi_abs))
            return Interval(_pow_down(small, n), _pow_up(big, n))
        # odd powers are monotone
        lo = -_pow_up(lo_abs, n) if self.lo < 0 else _pow_down(self.lo, n)
        hi = -_pow_down(hi_abs, n) if self.hi < 0 else _pow_up(self.hi, n)
        return Interval(lo, hi)

    def widen(self, radius: float) -> "Interval":
        """Minkowski sum with ``[-radius, radius]``."""
        if radius == 0.0:
            return self
        return Interval(add_down(self.lo, -radius), add_up(self.hi, radius))

    # -- dunder housekeeping ------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"


def _pow_up(x: float, n: int) -> float:
    # x >= 0
    r = 1.0
    for _ in range(n):
        r = mul_up(r, x)
    return r


def _pow_down(x: float, n: int) -> float:
    r = 1.0
    for _ in range(n):
        r = mul_down(r, x)
    return r


def interval_arith(a: Interval, b: Interval, op: str) -> Interval:
    """Apply ``op`` in {"add", "sub", "mul", "scale"} to two intervals.

    For ``scale`` the second argument must be a point interval.
    """
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scale":
        if b.lo != b.hi:
            raise ValueError("scale expects a point interval as its second argument")
        return a.scale(b.lo)
    raise ValueError(f"unknown interval operation {op!r}")
