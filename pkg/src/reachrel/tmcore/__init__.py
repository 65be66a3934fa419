"""Interval, polynomial and Taylor-model arithmetic."""

from .interval import Interval, interval_arith
from .polynomial import Domain, Polynomial, monomial_range, poly_bounds
from .taylor import (
    DEFAULT_ORDER,
    TaylorModel,
    tm_add,
    tm_add_constant,
    tm_bounds,
    tm_from_interval,
    tm_linear_combination,
    tm_mul,
    tm_scale,
    tm_truncate,
)

__all__ = [
    "DEFAULT_ORDER",
    "Domain",
    "Interval",
    "Polynomial",
    "TaylorModel",
    "interval_arith",
    "monomial_range",
    "poly_bounds",
    "tm_add",
    "tm_add_constant",
    "tm_bounds",
    "tm_from_interval",
    "tm_linear_combination",
    "tm_mul",
    "tm_scale",
    "tm_truncate",
]
