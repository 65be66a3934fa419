"""Bernstein-polynomial enclosures of scalar activation functions."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import comb

import numpy as np

from .tmcore import Interval, Polynomial, TaylorModel, tm_add_constant, tm_bounds, tm_mul

DEFAULT_BERNSTEIN_ORDER = 4
DEFAULT_STEPS = 200
EVAL_SLACK = 1e-12


class Activation(str, Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    LINEAR = "linear"

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self is Activation.RELU:
            return np.maximum(y, 0.0)
        if self is Activation.SIGMOID:
            # split form avoids overflow in exp for large |y|
            e = np.exp(-np.abs(y))
            return np.where(y >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        if self is Activation.TANH:
            return np.tanh(y)
        return y.copy()

    @classmethod
    def parse(cls, name: "str | Activation") -> "Activation":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unsupported activation {name!r}; expected one of "
                             f"{[a.value for a in cls]}") from None


@dataclass(frozen=True)
class BernsteinApprox:
    """Fitted Bernstein polynomial of ``activation`` on ``[a, b]``.

    ``centered`` holds power-basis coefficients in ``z = y - center``; that
    form is what gets composed with Taylor models because it stays well
    conditioned far from the origin.  ``error`` is the sampled bound
    ``sup |p - sigma|`` on the range.
    """

    activation: Activation
    range: Interval
    order: int
    steps: int
    center: float
    centered: tuple[float, ...]
    error: float

    @property
    def poly(self) -> Polynomial:
        return _centered_to_power(self.centered, self.center)

    def __call__(self, y):
        return _horner(self.centered, np.asarray(y, dtype=float) - self.center)


def _horner(coeffs, z):
    acc = np.zeros_like(z) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def _bernstein_centered(act: Activation, a: float, b: float, k: int) -> tuple[float, list[float]]:
    """Power-basis coefficients of the degree-k Bernstein polynomial in ``y - center``."""
    w = b - a
    center = 0.5 * a + 0.5 * b
    nodes = act(a + w * np.arange(k + 1) / k)
    # coefficients in s = (y - a)/w:  sum_i f_i C(k,i) s^i (1-s)^(k-i)
    s_coef = np.zeros(k + 1)
    for i in range(k + 1):
        for j in range(i, k + 1):
            s_coef[j] += nodes[i] * comb(k, i) * comb(k - i, j - i) * (-1) ** (j - i)
    # s = 1/2 + z/w  with z = y - center
    z_coef = np.zeros(k + 1)
    for j, cj in enumerate(s_coef):
        if cj == 0.0:
            continue
        for l in range(j + 1):
            z_coef[l] += cj * comb(j, l) * 0.5 ** (j - l) / w ** l
    return center, [float(c) for c in z_coef]


def _centered_to_power(coeffs, center: float) -> Polynomial:
    # sum_j d_j (y - c)^j expanded in powers of y
    out = np.zeros(len(coeffs))
    for j, dj in enumerate(coeffs):
        for l in range(j + 1):
            out[l] += dj * comb(j, l) * (-center) ** (j - l)
    return Polynomial({(l,): c for l, c in enumerate(out)}, dim=1)


def bernstein_fit(act: Activation | str, range: Interval, k: int = DEFAULT_BERNSTEIN_ORDER) -> Polynomial:
    """Degree-``k`` Bernstein polynomial of ``act`` on ``range``, in powers of y.

    A degenerate range returns the constant ``act(a)``.
    """
    act = Activation.parse(act)
    if k < 1:
        raise ValueError("Bernstein order must be at least 1")
    a, b = range.lo, range.hi
    if a == b:
        return Polynomial.constant(float(act(a)), 1)
    center, coeffs = _bernstein_centered(act, a, b, k)
    return _centered_to_power(coeffs, center)


def _midpoint_error(act: Activation, evaluate, a: float, b: float, m: int) -> float:
    step = (b - a) / m
    # i = 0..m inclusive, as in the defining formula; the last midpoint lies
    # half a step beyond b, which can only enlarge the bound
    y = step * (np.arange(m + 1) + 0.5) + a
    gap = np.abs(evaluate(y) - act(y))
    return float(gap.max() + step + EVAL_SLACK)


def bernstein_error(act: Activation | str, p: Polynomial, range: Interval, m: int = DEFAULT_STEPS) -> float:
    """Sampled error bound ``max_i |p(y_i) - act(y_i)| + (b - a)/m`` at midpoints.

    For activations with Lipschitz constant at most one (all supported kinds)
    the added ``(b - a)/m`` term covers the gaps between sample points.
    """
    act = Activation.parse(act)
    if m < 1:
        raise ValueError("sampling steps must be at least 1")
    a, b = range.lo, range.hi
    if a == b:
        return float(abs(p(np.array([a])) - act(a)) + EVAL_SLACK)
    return _midpoint_error(act, lambda y: p(y[:, None]), a, b, m)


def fit_approx(act: Activation | str, range: Interval, k: int = DEFAULT_BERNSTEIN_ORDER,
               m: int = DEFAULT_STEPS) -> BernsteinApprox:
    act = Activation.parse(act)
    a, b = range.lo, range.hi
    if a == b:
        v = float(act(a))
        return BernsteinApprox(act, range, k, m, a, (v,), EVAL_SLACK)
    center, coeffs = _bernstein_centered(act, a, b, k)
    err = _midpoint_error(act, lambda y: _horner(coeffs, y - center), a, b, m)
    return BernsteinApprox(act, range, k, m, center, tuple(coeffs), err)


def compose_activation(t: TaylorModel, act: Activation | str, k: int = DEFAULT_BERNSTEIN_ORDER,
                       m: int = DEFAULT_STEPS) -> TaylorModel:
    """Enclose ``act(f)`` for the function ``f`` enclosed by ``t``.

    Fits a degree-``k`` Bernstein polynomial on the bounds of ``t``, composes
    it with ``t`` by Horner's rule (each product truncated to ``t.order``)
    and adds ``[-eps, eps]`` to the remainder.
    """
    act = Activation.parse(act)
    rng = tm_bounds(t)
    if not rng.is_finite():
        raise ValueError(f"cannot compose an activation on unbounded range {rng!r}")
    approx = fit_approx(act, rng, k, m)
    if len(approx.centered) == 1:
        out = TaylorModel.constant(approx.centered[0], t.domain, t.order)
    else:
        z = tm_add_constant(t, -approx.center)
        coeffs = approx.centered
        out = TaylorModel.constant(coeffs[-1], t.domain, t.order)
        for c in coeffs[-2::-1]:
            out = tm_add_constant(tm_mul(out, z, t.order), c)
    rem = out.remainder.widen(approx.error)
    return TaylorModel(out.poly, rem, out.domain, out.order)
