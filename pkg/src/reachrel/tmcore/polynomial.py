"""Sparse multivariate polynomials over a box domain.

A polynomial is a mapping from exponent tuples to float coefficients.  The
``*_tracked`` helpers perform the arithmetic and additionally return the
exact magnitude of every rounding error they committed, keyed by monomial,
so callers (Taylor models) can fold it into an interval remainder.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .interval import Interval, add_down, add_up, mul_down, mul_up, sum_up, two_prod, two_sum

PRUNE_THRESHOLD = 1e-15

Exponents = tuple[int, ...]
Terms = dict[Exponents, float]
Errors = dict[Exponents, float]


class Domain:
    """Box of input variables; one nonempty interval per variable."""

    __slots__ = ("boxes", "is_canonical")

    def __init__(self, boxes: Iterable[Interval | Sequence[float]]):
        boxes = tuple(b if isinstance(b, Interval) else Interval(*b) for b in boxes)
        if not boxes:
            raise ValueError("a domain needs at least one variable")
        self.boxes = boxes
        self.is_canonical = all(b.lo == -1.0 and b.hi == 1.0 for b in boxes)

    @classmethod
    def unit(cls, dim: int) -> "Domain":
        """The canonical symbolic box ``[-1, 1]^dim``."""
        return _unit_domain(dim)

    @property
    def dim(self) -> int:
        return len(self.boxes)

    def magnitude(self, exps: Exponents) -> float:
        """Upper bound of ``|x^exps|`` over the domain."""
        if self.is_canonical:
            return 1.0
        m = 1.0
        for box, e in zip(self.boxes, exps):
            if e:
                m = mul_up(m, (box ** e).mag)
        return m

    def error_bound(self, errors: Mapping[Exponents, float]) -> float:
        if not errors:
            return 0.0
        if self.is_canonical:
            return sum_up(errors.values())
        return sum_up(mul_up(e, self.magnitude(k)) for k, e in errors.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, Domain) and self.boxes == other.boxes

    def __hash__(self) -> int:
        return hash(self.boxes)

    def __reduce__(self):
        return (Domain, (self.boxes,))

    def __repr__(self) -> str:
        if self.is_canonical:
            return f"Domain.unit({self.dim})"
        return f"Domain({list(self.boxes)!r})"


@lru_cache(maxsize=None)
def _unit_domain(dim: int) -> Domain:
    return Domain([Interval(-1.0, 1.0)] * dim)


class Polynomial:
    """Sparse polynomial ``sum_k c_k x^k`` in ``dim`` variables.

    Zero coefficients are never stored.  Treat instances as immutable.
    """

    __slots__ = ("terms", "dim")

    def __init__(self, terms: Mapping[Sequence[int], float] | None = None, dim: int = 1):
        self.dim = int(dim)
        clean: Terms = {}
        for k, c in (terms or {}).items():
            k = tuple(int(e) for e in k)
            if len(k) != self.dim or any(e < 0 for e in k):
                raise ValueError(f"bad exponent vector {k} for dimension {self.dim}")
            c = float(c)
            if c != 0.0:
                clean[k] = clean.get(k, 0.0) + c
        self.terms = clean

    @classmethod
    def _raw(cls, terms: Terms, dim: int) -> "Polynomial":
        p = cls.__new__(cls)
        p.terms = terms
        p.dim = dim
        return p

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls._raw({}, dim)

    @classmethod
    def constant(cls, c: float, dim: int) -> "Polynomial":
        c = float(c)
        return cls._raw({(0,) * dim: c} if c != 0.0 else {}, dim)

    @classmethod
    def variable(cls, index: int, dim: int, coefficient: float = 1.0) -> "Polynomial":
        if not 0 <= index < dim:
            raise ValueError(f"variable index {index} out of range for dimension {dim}")
        k = tuple(1 if i == index else 0 for i in range(dim))
        return cls._raw({k: float(coefficient)} if coefficient else {}, dim)

    # -- queries -------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def constant_term(self) -> float:
        return self.terms.get((0,) * self.dim, 0.0)

    def coefficient(self, exps: Sequence[int]) -> float:
        return self.terms.get(tuple(exps), 0.0)

    def __call__(self, x) -> float | np.ndarray:
        """Evaluate at a point (length ``dim``) or a batch of shape ``(n, dim)``."""
        x = np.asarray(x, dtype=float)
        batch = x.ndim == 2
        xs = x if batch else x[None, :]
        out = np.zeros(xs.shape[0])
        for k, c in self.terms.items():
            out += c * np.prod(xs ** np.asarray(k), axis=1)
        return out if batch else float(out[0])

    # -- plain arithmetic (rounding ignored) ---------------------------
    def __add__(self, other) -> "Polynomial":
        return add_tracked(self, _as_poly(other, self.dim))[0]

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw({k: -c for k, c in self.terms.items()}, self.dim)

    def __sub__(self, other) -> "Polynomial":
        return add_tracked(self, _as_poly(other, self.dim), -1.0)[0]

    def __rsub__(self, other) -> "Polynomial":
        return _as_poly(other, self.dim) - self

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return mul_tracked(self, other)[0]
        return scale_tracked(self, float(other))[0]

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Polynomial":
        result = Polynomial.constant(1.0, self.dim)
        for _ in range(n):
            result = result * self
        return result

    def split(self, order: int) -> tuple["Polynomial", "Polynomial"]:
        """Return ``(low, high)`` with degree(low) <= order < min degree(high)."""
        low: Terms = {}
        high: Terms = {}
        for k, c in self.terms.items():
            (low if sum(k) <= order else high)[k] = c
        return Polynomial._raw(low, self.dim), Polynomial._raw(high, self.dim)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.dim, frozenset(self.terms.items())))

    def __reduce__(self):
        return (Polynomial._raw, (self.terms, self.dim))

    def __repr__(self) -> str:
        if not self.terms:
            return "Polynomial(0)"
        parts = []
        for k in sorted(self.terms, key=lambda k: (sum(k), k)):
            mono = "*".join(f"x{i}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(k) if e)
            parts.append(f"{self.terms[k]!r}" + (f"*{mono}" if mono else ""))
        return "Polynomial(" + " + ".join(parts) + ")"


def _as_poly(x, dim: int) -> Polynomial:
    if isinstance(x, Polynomial):
        if x.dim != dim:
            raise ValueError(f"dimension mismatch: {x.dim} vs {dim}")
        return x
    return Polynomial.constant(float(x), dim)


def _prune(terms: Terms, errors: Errors) -> None:
    small = [k for k, c in terms.items() if abs(c) < PRUNE_THRESHOLD]
    for k in small:
        c = terms.pop(k)
        if c != 0.0:
            errors[k] = add_up(errors.get(k, 0.0), abs(c))


def add_tracked(p: Polynomial, q: Polynomial, alpha: float = 1.0) -> tuple[Polynomial, Errors]:
    """``p + alpha*q`` with per-monomial rounding error magnitudes (alpha = +-1)."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    terms = dict(p.terms)
    errors: Errors = {}
    for k, c in q.terms.items():
        c = alpha * c
        if k in terms:
            s, e = two_sum(terms[k], c)
            terms[k] = s
            if e:
                errors[k] = abs(e)
        else:
            terms[k] = c
    _prune(terms, errors)
    return Polynomial._raw(terms, p.dim), errors


def scale_tracked(p: Polynomial, c: float) -> tuple[Polynomial, Errors]:
    if c == 0.0:
        return Polynomial.zero(p.dim), {}
    if c == 1.0:
        return p, {}
    terms: Terms = {}
    errors: Errors = {}
    for k, v in p.terms.items():
        prod, e = two_prod(v, c)
        terms[k] = prod
        if e:
            errors[k] = abs(e)
    _prune(terms, errors)
    return Polynomial._raw(terms, p.dim), errors


def mul_tracked(p: Polynomial, q: Polynomial) -> tuple[Polynomial, Errors]:
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    terms: Terms = {}
    errors: Errors = {}
    for k1, c1 in p.terms.items():
        for k2, c2 in q.terms.items():
            k = tuple([a + b for a, b in zip(k1, k2)])
            prod, e = two_prod(c1, c2)
            err = abs(e)
            if k in terms:
                s, e2 = two_sum(terms[k], prod)
                terms[k] = s
                err = add_up(err, abs(e2))
            else:
                terms[k] = prod
            if err:
                errors[k] = add_up(errors.get(k, 0.0), err)
    for k in [k for k, c in terms.items() if c == 0.0]:
        del terms[k]
    _prune(terms, errors)
    return Polynomial._raw(terms, p.dim), errors


def merge_errors(*parts: Mapping[Exponents, float]) -> Errors:
    out: Errors = {}
    for part in parts:
        for k, e in part.items():
            out[k] = add_up(out.get(k, 0.0), e) if k in out else e
    return out


# -- range bounding ---------------------------------------------------------

def monomial_range(exps: Exponents, domain: Domain) -> Interval:
    """Range of ``x^exps`` over the domain; even powers bound exactly."""
    if domain.is_canonical:
        if all(e % 2 == 0 for e in exps):
            return Interval(0.0, 1.0) if any(exps) else Interval(1.0, 1.0)
        return Interval(-1.0, 1.0)
    r = Interval(1.0, 1.0)
    for box, e in zip(domain.boxes, exps):
        if e:
            r = r * (box ** e)
    return r


def _quadratic_range(a: float, b: float, box: Interval) -> Interval:
    """Range of ``a*x^2 + b*x`` on ``box`` (sound, essentially exact)."""
    def at(x: float) -> Interval:
        xi = Interval(x, x)
        return (xi ** 2).scale(a) + xi.scale(b)

    ends = at(box.lo).union_hull(at(box.hi))
    if a == 0.0:
        return ends
    vertex = -b / (2.0 * a)
    slack = 1e-12 * max(1.0, box.mag)
    if box.lo - slack <= vertex <= box.hi + slack:
        # -b^2/(4a) is the global extremum; using it is sound regardless of
        # whether the true vertex falls inside the box
        extremum = -_div(Interval(b, b) ** 2, 4.0 * a)
        ends = ends.union_hull(extremum)
    return ends


def _div(num: Interval, d: float) -> Interval:
    # IEEE division is correctly rounded, so one ulp outward is enough
    def q(n: float, toward: float) -> float:
        r = n / d
        p, e = two_prod(r, d)
        return r if (p == n and e == 0.0) else math.nextafter(r, toward)

    a, b = q(num.lo, -math.inf if d > 0 else math.inf), q(num.hi, math.inf if d > 0 else -math.inf)
    return Interval(min(a, b), max(a, b))


def poly_bounds(p: Polynomial, domain: Domain) -> Interval:
    """Conservative range of ``p`` over ``domain``.

    Monomials are bounded one at a time (even powers exactly) and summed with
    outward rounding, except that the univariate part of each variable up to
    degree two is bounded as a whole quadratic, which is exact.
    """
    if p.dim != domain.dim:
        raise ValueError(f"polynomial dimension {p.dim} does not match domain dimension {domain.dim}")
    if not p.terms:
        return Interval(0.0, 0.0)
    lo = hi = 0.0
    quad: dict[int, list[float]] = {}
    for k, c in p.terms.items():
        nz = [i for i, e in enumerate(k) if e]
        if not nz:
            lo = add_down(lo, c)
            hi = add_up(hi, c)
            continue
        if len(nz) == 1 and k[nz[0]] <= 2:
            ab = quad.setdefault(nz[0], [0.0, 0.0])
            ab[2 - k[nz[0]]] = c
            continue
        r = monomial_range(k, domain)
        if c >= 0.0:
            lo = add_down(lo, mul_down(r.lo, c))
            hi = add_up(hi, mul_up(r.hi, c))
        else:
            lo = add_down(lo, mul_down(r.hi, c))
            hi = add_up(hi, mul_up(r.lo, c))
    for i, (a, b) in quad.items():
        r = _quadratic_range(a, b, domain.boxes[i])
        lo = add_down(lo, r.lo)
        hi = add_up(hi, r.hi)
    return Interval(lo, hi)
