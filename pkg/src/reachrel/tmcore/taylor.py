"""Taylor models: a polynomial over a box domain plus an interval remainder.

Every operation returns a model whose ``poly(x) + remainder`` contains the
exact result for every ``x`` in the domain.  Rounding errors of coefficient
arithmetic and pruned tiny coefficients are charged to the remainder.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .interval import Interval, add_down, add_up, mul_up
from .polynomial import (
    Domain,
    Errors,
    Polynomial,
    add_tracked,
    mul_tracked,
    poly_bounds,
    scale_tracked,
)

DEFAULT_ORDER = 2
_ZERO = Interval(0.0, 0.0)


class TaylorModel:
    """``poly(x) + remainder`` for ``x`` in ``domain``, ``degree(poly) <= order``."""

    __slots__ = ("poly", "remainder", "domain", "order")

    def __init__(self, poly: Polynomial, remainder: Interval = _ZERO,
                 domain: Domain | None = None, order: int = DEFAULT_ORDER):
        if domain is None:
            domain = Domain.unit(poly.dim)
        if poly.dim != domain.dim:
            raise ValueError(f"polynomial dimension {poly.dim} != domain dimension {domain.dim}")
        if order < 0:
            raise ValueError("order must be non-negative")
        if poly.degree > order:
            raise ValueError(f"polynomial degree {poly.degree} exceeds order {order}")
        self.poly = poly
        self.remainder = remainder
        self.domain = domain
        self.order = int(order)

    @classmethod
    def constant(cls, c: float, domain: Domain, order: int = DEFAULT_ORDER) -> "TaylorModel":
        return cls(Polynomial.constant(c, domain.dim), _ZERO, domain, order)

    @classmethod
    def zero(cls, domain: Domain, order: int = DEFAULT_ORDER) -> "TaylorModel":
        return cls(Polynomial.zero(domain.dim), _ZERO, domain, order)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def bounds(self) -> Interval:
        return tm_bounds(self)

    def contains(self, x, value: float) -> bool:
        """Whether ``value`` lies in ``poly(x) + remainder`` (float evaluation)."""
        p = self.poly(np.asarray(x, dtype=float))
        return self.remainder.lo <= value - p <= self.remainder.hi

    def __add__(self, other) -> "TaylorModel":
        if isinstance(other, TaylorModel):
            return tm_add(self, other)
        return tm_add_constant(self, float(other))

    __radd__ = __add__

    def __neg__(self) -> "TaylorModel":
        return TaylorModel(-self.poly, -self.remainder, self.domain, self.order)

    def __sub__(self, other) -> "TaylorModel":
        if isinstance(other, TaylorModel):
            return tm_add(self, -other)
        return tm_add_constant(self, -float(other))

    def __rsub__(self, other) -> "TaylorModel":
        return (-self) + other

    def __mul__(self, other) -> "TaylorModel":
        if isinstance(other, TaylorModel):
            return tm_mul(self, other)
        return tm_scale(self, float(other))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"TaylorModel({self.poly!r}, {self.remainder!r}, order={self.order})"


def _check_compatible(t1: TaylorModel, t2: TaylorModel) -> None:
    if t1.domain is not t2.domain and t1.domain != t2.domain:
        raise ValueError("Taylor models live on different domains")


def _absorb(remainder: Interval, domain: Domain, errors: Errors) -> Interval:
    return remainder.widen(domain.error_bound(errors))


def tm_add(t1: TaylorModel, t2: TaylorModel) -> TaylorModel:
    _check_compatible(t1, t2)
    poly, err = add_tracked(t1.poly, t2.poly)
    rem = _absorb(t1.remainder + t2.remainder, t1.domain, err)
    order = max(t1.order, t2.order)
    return TaylorModel(poly, rem, t1.domain, order)


def tm_add_constant(t: TaylorModel, c: float) -> TaylorModel:
    if c == 0.0:
        return t
    poly, err = add_tracked(t.poly, Polynomial.constant(c, t.dim))
    return TaylorModel(poly, _absorb(t.remainder, t.domain, err), t.domain, t.order)


def tm_scale(t: TaylorModel, c: float) -> TaylorModel:
    poly, err = scale_tracked(t.poly, c)
    return TaylorModel(poly, _absorb(t.remainder.scale(c), t.domain, err), t.domain, t.order)


def tm_truncate(t: TaylorModel, k: int) -> TaylorModel:
    """Drop monomials of total degree above ``k`` into the remainder."""
    if k < 0:
        raise ValueError("truncation order must be non-negative")
    if t.poly.degree <= k:
        return t
    low, high = t.poly.split(k)
    rem = t.remainder + poly_bounds(high, t.domain)
    return TaylorModel(low, rem, t.domain, t.order)


def tm_mul(t1: TaylorModel, t2: TaylorModel, k: int | None = None) -> TaylorModel:
    """Product truncated to order ``k`` (default: the larger operand order).

    remainder = I1*I2 + Int(p1)*I2 + Int(p2)*I1 + Int(r_k) + rounding
    """
    _check_compatible(t1, t2)
    if k is None:
        k = max(t1.order, t2.order)
    if k < 1:
        raise ValueError("multiplication order must be at least 1")
    poly, err = mul_tracked(t1.poly, t2.poly)
    low, high = poly.split(k)
    r1, r2 = t1.remainder, t2.remainder
    rem = r1 * r2
    if r2 != _ZERO:
        rem = rem + poly_bounds(t1.poly, t1.domain) * r2
    if r1 != _ZERO:
        rem = rem + poly_bounds(t2.poly, t2.domain) * r1
    if high.terms:
        rem = rem + poly_bounds(high, t1.domain)
    rem = _absorb(rem, t1.domain, err)
    return TaylorModel(low, rem, t1.domain, k)


def tm_bounds(t: TaylorModel) -> Interval:
    """Minkowski sum of the polynomial range and the remainder."""
    return poly_bounds(t.poly, t.domain) + t.remainder


def tm_from_interval(iv: Interval, var_index: int, domain: Domain,
                     order: int = DEFAULT_ORDER) -> TaylorModel:
    """Affine model ``center + radius * x_i`` over the canonical domain.

    The radius is rounded up so the model always covers ``iv``; when the
    center and radius are representable the bounds reproduce ``iv`` exactly,
    otherwise they exceed it by at most an ulp at each end.
    """
    if not isinstance(iv, Interval):
        iv = Interval(*iv)
    if not 0 <= var_index < domain.dim:
        raise ValueError(f"variable index {var_index} out of range for dimension {domain.dim}")
    if not domain.boxes[var_index] == Interval(-1.0, 1.0):
        raise ValueError("tm_from_interval requires the canonical [-1, 1] box for its variable")
    if not iv.is_finite():
        raise ValueError(f"cannot re-initialize from non-finite interval {iv!r}")
    lo, hi = iv.lo, iv.hi
    c = 0.5 * lo + 0.5 * hi
    if lo == hi:
        return TaylorModel.constant(c, domain, order)
    r = max(add_up(hi, -c), add_up(c, -lo))
    terms = {}
    if c != 0.0:
        terms[(0,) * domain.dim] = c
    terms[tuple(1 if j == var_index else 0 for j in range(domain.dim))] = r
    return TaylorModel(Polynomial._raw(terms, domain.dim), _ZERO, domain, order)


def _two_sum_vec(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod_vec(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = a * b
    split = 134217729.0
    ca = split * a
    ah = ca - (ca - a)
    al = a - ah
    cb = split * b
    bh = cb - (cb - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    # outside the exact range fall back to a one-ulp magnitude bound
    inexact = ((np.abs(a) > 1e150) | (np.abs(b) > 1e150)
               | ((np.abs(p) < 2.0 ** -969) & (a != 0.0) & (b != 0.0)))
    e = np.where(inexact, np.spacing(np.abs(p)), e)
    return p, np.where(np.isfinite(p), e, 0.0)


def _dot_exact_error(w: np.ndarray, x: np.ndarray, bias: np.ndarray | None = None):
    """``w @ x (+ bias)`` in floats plus an upper bound on the absolute error.

    ``w`` is (n_out, n_in), ``x`` is (n_in, K) or (n_out, n_in, K) for a
    per-row operand.  The error bound is zero whenever every product and
    partial sum was exact.
    """
    if x.ndim == 2:
        prods, perr = _two_prod_vec(w[:, :, None], x[None, :, :])
    else:
        prods, perr = _two_prod_vec(w[:, :, None], x)
    err = np.abs(perr).sum(axis=1)
    acc = prods[:, 0, :].copy()
    for j in range(1, prods.shape[1]):
        acc, e = _two_sum_vec(acc, prods[:, j, :])
        err += np.abs(e)
    if bias is not None:
        acc[:, 0], e = _two_sum_vec(acc[:, 0], bias)
        err[:, 0] += np.abs(e)
    # the float accumulation of the error terms is itself inexact
    n = prods.shape[1] + 2
    err *= 1.0 + 4.0 * n * 2.0 ** -53
    return acc, err


def tm_linear_combination(tms: Sequence[TaylorModel], weights: np.ndarray,
                          biases: np.ndarray) -> list[TaylorModel]:
    """Rows of ``weights @ tms + biases`` as Taylor models.

    Coefficients come from one vectorised product over the shared monomial
    basis; every rounding error is recovered with error-free transforms and
    charged to the remainder.  Affine maps keep degrees, so nothing is
    truncated.
    """
    weights = np.asarray(weights, dtype=float)
    biases = np.asarray(biases, dtype=float)
    if weights.ndim != 2:
        raise ValueError("weights must be a matrix")
    n_out, n_in = weights.shape
    if len(tms) != n_in:
        raise ValueError(f"expected {n_in} input models, got {len(tms)}")
    if biases.shape != (n_out,):
        raise ValueError(f"expected {n_out} biases, got shape {biases.shape}")
    if n_in == 0:
        raise ValueError("empty input")
    domain = tms[0].domain
    for t in tms[1:]:
        _check_compatible(tms[0], t)
    order = max(t.order for t in tms)
    dim = domain.dim

    keys: dict[tuple, int] = {(0,) * dim: 0}
    for t in tms:
        for k in t.poly.terms:
            if k not in keys:
                keys[k] = len(keys)
    coef = np.zeros((n_in, len(keys)))
    for j, t in enumerate(tms):
        for k, c in t.poly.terms.items():
            coef[j, keys[k]] = c
    out, coef_err = _dot_exact_error(weights, coef, biases)
    if domain.is_canonical:
        mags = np.ones(len(keys))
    else:
        mags = np.array([domain.magnitude(k) for k in keys])

    # remainder endpoints: pick lo/hi per weight sign
    r_lo = np.array([t.remainder.lo for t in tms])
    r_hi = np.array([t.remainder.hi for t in tms])
    pos = weights >= 0.0
    lo_sel = np.where(pos, r_lo[None, :], r_hi[None, :])[:, :, None]
    hi_sel = np.where(pos, r_hi[None, :], r_lo[None, :])[:, :, None]
    rem_lo, lo_err = _dot_exact_error(weights, lo_sel)
    rem_hi, hi_err = _dot_exact_error(weights, hi_sel)

    key_list = list(keys)
    results = []
    for i in range(n_out):
        row = out[i]
        terms = {}
        slack = 0.0
        for idx in np.flatnonzero(row):
            c = float(row[idx])
            if abs(c) < 1e-15:
                slack = add_up(slack, mul_up(abs(c), float(mags[idx])))
            else:
                terms[key_list[idx]] = c
        e = coef_err[i]
        if e.any():
            slack = add_up(slack, mul_up(float(e @ mags), 1.0 + 1e-12))
        lo = float(rem_lo[i, 0])
        hi = float(rem_hi[i, 0])
        if lo_err[i, 0]:
            lo = add_down(lo, -float(lo_err[i, 0]))
        if hi_err[i, 0]:
            hi = add_up(hi, float(hi_err[i, 0]))
        rem = Interval(lo, hi).widen(slack)
        results.append(TaylorModel(Polynomial._raw(terms, dim), rem, domain, order))
    return results
