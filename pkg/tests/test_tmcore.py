import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enclosure_violations
from reachrel.tmcore import (
    Domain,
    Interval,
    Polynomial,
    TaylorModel,
    interval_arith,
    monomial_range,
    poly_bounds,
    tm_add,
    tm_add_constant,
    tm_bounds,
    tm_from_interval,
    tm_linear_combination,
    tm_mul,
    tm_scale,
    tm_truncate,
)
from reachrel.tmcore.interval import add_down, add_up, mul_down, mul_up, two_prod, two_sum

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


def x(i=0, dim=1, c=1.0):
    return Polynomial.variable(i, dim, c)


def tm(poly, rem=(0.0, 0.0), dim=1, order=2):
    return TaylorModel(poly, Interval(*rem), Domain.unit(dim), order)


class TestRounding:
    @given(finite, finite)
    def test_two_sum_is_error_free(self, a, b):
        s, e = two_sum(a, b)
        assert Fraction(s) + Fraction(e) == Fraction(a) + Fraction(b)

    @given(finite, finite)
    def test_two_prod_error_is_exact_or_bounded(self, a, b):
        p, e = two_prod(a, b)
        exact = Fraction(a) * Fraction(b)
        if abs(p) >= 2.0 ** -969 or a == 0 or b == 0:
            assert Fraction(p) + Fraction(e) == exact
        else:
            assert abs(exact - Fraction(p)) <= Fraction(abs(e))

    @given(st.floats(-1e-160, 1e-160, allow_nan=False), st.floats(-1e-160, 1e-160, allow_nan=False))
    def test_underflowing_products_still_bracketed(self, a, b):
        exact = Fraction(a) * Fraction(b)
        assert Fraction(mul_down(a, b)) <= exact <= Fraction(mul_up(a, b))

    def test_huge_operands_bracketed(self):
        a, b = 3.0e200, 1.0 / 3.0
        exact = Fraction(a) * Fraction(b)
        assert Fraction(mul_down(a, b)) <= exact <= Fraction(mul_up(a, b))

    @given(finite, finite)
    def test_directed_results_bracket_the_exact_value(self, a, b):
        assert Fraction(add_down(a, b)) <= Fraction(a) + Fraction(b) <= Fraction(add_up(a, b))
        assert Fraction(mul_down(a, b)) <= Fraction(a) * Fraction(b) <= Fraction(mul_up(a, b))

    def test_exact_operations_are_not_nudged(self):
        assert add_up(1.0, 2.0) == 3.0
        assert add_down(0.5, 0.25) == 0.75
        assert mul_up(3.0, 0.5) == 1.5

    def test_inexact_sum_rounds_outward(self):
        assert add_down(0.1, 0.2) < add_up(0.1, 0.2)


class TestInterval:
    def test_add(self):
        assert interval_arith(Interval(1, 2), Interval(3, 4), "add") == Interval(4, 6)

    def test_mul_mixed_signs(self):
        assert interval_arith(Interval(-1, 2), Interval(3, 4), "mul") == Interval(-4, 8)

    def test_zero_annihilates(self):
        assert interval_arith(Interval(0, 0), Interval(-9, 9), "mul") == Interval(0, 0)

    def test_sub_and_scale(self):
        assert interval_arith(Interval(1, 2), Interval(3, 4), "sub") == Interval(-3, -1)
        assert interval_arith(Interval(1, 2), Interval(-2, -2), "scale") == Interval(-4, -2)

    def test_scale_needs_a_point(self):
        with pytest.raises(ValueError):
            interval_arith(Interval(1, 2), Interval(0, 1), "scale")

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            interval_arith(Interval(1, 2), Interval(0, 1), "div")

    def test_rejects_inverted_endpoints(self):
        with pytest.raises(ValueError):
            Interval(2.0, 1.0)

    def test_even_power_is_nonnegative(self):
        assert Interval(-1, 1) ** 2 == Interval(0, 1)
        assert Interval(-2, 1) ** 3 == Interval(-8, 1)

    @given(finite, finite, finite, finite)
    def test_mul_brute_force(self, a, b, c, d):
        i1, i2 = Interval(min(a, b), max(a, b)), Interval(min(c, d), max(c, d))
        r = i1 * i2
        for u, v in itertools.product((i1.lo, i1.hi), (i2.lo, i2.hi)):
            assert Fraction(r.lo) <= Fraction(u) * Fraction(v) <= Fraction(r.hi)

    def test_queries(self):
        iv = Interval(-1.0, 3.0)
        assert iv.width == 4.0 and iv.mid == 1.0 and iv.mag == 3.0
        assert 2.0 in iv and Interval(0, 1) in iv
        assert iv.intersects(Interval(3.0, 5.0))
        assert not iv.intersects(Interval(3.5, 5.0))
        assert iv.intersection(Interval(2, 9)) == Interval(2, 3)
        assert iv.union_hull(Interval(5, 6)) == Interval(-1, 6)


class TestPolyBounds:
    def test_affine_two_variables(self):
        p = Polynomial({(0, 0): 1.0, (1, 0): 1.0, (0, 1): -2.0}, 2)
        assert poly_bounds(p, Domain.unit(2)) == Interval(-2, 4)

    def test_zero(self):
        assert poly_bounds(Polynomial.zero(2), Domain.unit(2)) == Interval(0, 0)

    def test_even_power_exact(self):
        assert poly_bounds(x() ** 2, Domain.unit(1)) == Interval(0, 1)
        assert monomial_range((2, 1), Domain.unit(2)) == Interval(-1, 1)
        assert monomial_range((2, 4), Domain.unit(2)) == Interval(0, 1)

    def test_univariate_quadratic_grouping(self):
        p = (x() + 1.0) ** 2 * 0.25
        assert poly_bounds(p, Domain.unit(1)) == Interval(0, 1)

    @settings(max_examples=200, deadline=None)
    @given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                           st.floats(-10, 10, allow_nan=False), max_size=8))
    def test_contains_dense_grid_range(self, terms):
        p = Polynomial(terms, 2)
        b = poly_bounds(p, Domain.unit(2))
        g = np.linspace(-1, 1, 21)
        xx, yy = np.meshgrid(g, g)
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        for pt in pts[::7]:
            exact = sum(Fraction(c) * Fraction(pt[0]) ** e[0] * Fraction(pt[1]) ** e[1]
                        for e, c in p.terms.items())
            assert Fraction(b.lo) <= exact <= Fraction(b.hi)

    def test_general_domain(self):
        d = Domain([(1.0, 2.0)])
        assert poly_bounds(x() ** 2, d) == Interval(1, 4)


class TestTaylorModel:
    def test_add_componentwise(self):
        t = tm_add(tm(x(c=2.0) + 1.0, (-0.1, 0.1)), tm(x(), (0.0, 0.2)))
        assert t.poly == x(c=3.0) + 1.0
        assert t.remainder.contains(Interval(-0.1, 0.3))
        assert t.remainder.width <= 0.4 + 1e-15

    def test_add_zero_is_identity(self):
        t = tm(x(c=2.0) + 1.0, (-0.1, 0.1))
        s = tm_add(t, TaylorModel.zero(t.domain))
        assert s.poly == t.poly and s.remainder == t.remainder

    def test_cancellation(self):
        t = tm_add(tm(x()), tm(-x()))
        assert t.poly.is_zero and t.remainder == Interval(0, 0)

    def test_mul_truncates_into_remainder(self):
        t = tm_mul(tm(x(), order=1), tm(x(), order=1), 1)
        assert t.poly.is_zero
        assert t.remainder.contains(Interval(0, 1))

    def test_mul_identity(self):
        t = tm_mul(tm(x()), TaylorModel.constant(1.0, Domain.unit(1)), 2)
        assert t.poly == x() and t.remainder == Interval(0, 0)

    def test_mul_remainder_cross_term(self):
        t = tm_mul(TaylorModel(Polynomial.constant(2.0, 1), Interval(-0.1, 0.1), Domain.unit(1)),
                   TaylorModel.constant(3.0, Domain.unit(1)))
        assert t.poly == Polynomial.constant(6.0, 1)
        assert t.remainder.contains(Interval(-0.3, 0.3))

    def test_mul_rejects_order_zero(self):
        with pytest.raises(ValueError):
            tm_mul(tm(x()), tm(x()), 0)

    def test_bounds(self):
        assert tm_bounds(tm(x(), (-0.05, 0.05))) == Interval(-1.05, 1.05)
        assert tm_bounds(tm(Polynomial.zero(1), (0.25, 0.5))) == Interval(0.25, 0.5)
        assert tm_bounds(TaylorModel.constant(5.0, Domain.unit(1))) == Interval(5, 5)

    def test_truncate_folds_high_terms(self):
        t = tm_truncate(tm(x() + x() ** 3, order=3), 1)
        assert t.poly == x()
        assert t.remainder.contains(Interval(-1, 1))

    def test_truncate_within_order_unchanged(self):
        t = tm(x() + 1.0, (-0.1, 0.1))
        assert tm_truncate(t, 2) is t

    def test_truncate_constant_to_zero_order(self):
        t = tm(Polynomial.constant(3.0, 1), (-0.1, 0.1))
        s = tm_truncate(t, 0)
        assert s.poly == t.poly and s.remainder == t.remainder

    def test_scale_and_constant_shift(self):
        t = tm_add_constant(tm_scale(tm(x(), (-0.1, 0.1)), -2.0), 1.0)
        assert t.poly == 1.0 - x(c=2.0)
        assert t.remainder == Interval(-0.2, 0.2)

    def test_degree_above_order_rejected(self):
        with pytest.raises(ValueError):
            tm(x() ** 3, order=2)

    def test_contains_point(self):
        t = tm(x(), (-0.1, 0.1))
        assert t.contains([0.5], 0.55) and not t.contains([0.5], 0.7)


class TestFromInterval:
    def test_center_radius_form(self):
        t = tm_from_interval(Interval(0.9, 1.1), 0, Domain.unit(1))
        assert t.poly.coefficient((0,)) == 1.0
        assert t.poly.coefficient((1,)) == pytest.approx(0.1, abs=1e-15)
        assert t.remainder == Interval(0, 0)
        # covers the interval; at most one ulp wider when mid/radius are not representable
        b = tm_bounds(t)
        assert b.contains(Interval(0.9, 1.1))
        assert b.lo >= np.nextafter(0.9, -1) and b.hi <= np.nextafter(1.1, 2)

    def test_unit_interval_is_the_variable(self):
        t = tm_from_interval(Interval(-1, 1), 2, Domain.unit(3))
        assert t.poly == x(2, 3) and t.remainder == Interval(0, 0)

    def test_degenerate_interval_is_constant(self):
        t = tm_from_interval(Interval(5, 5), 1, Domain.unit(2))
        assert t.poly == Polynomial.constant(5.0, 2) and t.remainder == Interval(0, 0)

    @given(st.integers(-2**20, 2**20), st.integers(0, 2**20))
    def test_bounds_exact_for_dyadic_boxes(self, lo, w):
        iv = Interval(lo / 1024, (lo + w) / 1024)
        assert tm_bounds(tm_from_interval(iv, 0, Domain.unit(1))) == iv

    @given(finite, finite)
    def test_bounds_enclose_any_interval(self, a, b):
        iv = Interval(min(a, b), max(a, b))
        out = tm_bounds(tm_from_interval(iv, 0, Domain.unit(1)))
        assert out.contains(iv)
        slack = 2 * math.ulp(iv.mag)
        assert iv.lo - out.lo <= slack and out.hi - iv.hi <= slack

    def test_needs_canonical_variable(self):
        with pytest.raises(ValueError):
            tm_from_interval(Interval(0, 1), 0, Domain([(0.0, 1.0)]))


class TestLinearCombination:
    def test_matches_affine_image(self):
        d = Domain.unit(2)
        ins = [tm_from_interval(Interval(-1, 1), 0, d), tm_from_interval(Interval(0, 2), 1, d)]
        out = tm_linear_combination(ins, np.array([[1.0, -0.5], [2.0, 0.0]]), np.array([0.25, -1.0]))
        assert out[0].poly == Polynomial({(0, 0): -0.25, (1, 0): 1.0, (0, 1): -0.5}, 2)
        assert out[1].poly == Polynomial({(0, 0): -1.0, (1, 0): 2.0}, 2)
        assert all(t.remainder == Interval(0, 0) for t in out)

    def test_remainders_scale_by_weight_magnitude(self):
        out = tm_linear_combination([tm(x(), (-0.1, 0.1))], np.array([[2.0]]), np.array([0.0]))
        assert out[0].poly == x(c=2.0) and out[0].remainder == Interval(-0.2, 0.2)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=6, max_size=6),
           st.floats(-5, 5, allow_nan=False))
    def test_rounding_error_is_charged(self, w, bias):
        d = Domain.unit(2)
        ins = [tm(x(0, 2, 0.1) + 0.3, (-1e-3, 1e-3), 2), tm(x(1, 2, 0.7) - 0.2, (0, 0), 2)]
        out = tm_linear_combination(ins, np.array(w).reshape(3, 2), np.full(3, bias))
        for pt in itertools.product([-1.0, 0.0, 0.37, 1.0], repeat=2):
            for r, t in enumerate(out):
                for e in (-1e-3, 0.0, 1e-3):
                    v = (Fraction(w[2 * r]) * (Fraction(0.1) * Fraction(pt[0]) + Fraction(0.3) + Fraction(e))
                         + Fraction(w[2 * r + 1]) * (Fraction(0.7) * Fraction(pt[1]) - Fraction(0.2))
                         + Fraction(bias))
                    assert Fraction(tm_bounds(t).lo) <= v <= Fraction(tm_bounds(t).hi)
        assert d.dim == 2


class TestEnclosureProperties:
    def test_random_expression_trees(self):
        assert enclosure_violations(300, seed=7) == 0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_add_and_mul_bounds_commute(self, seed):
        rng = np.random.default_rng(seed)
        d = Domain.unit(2)
        a = tm_from_interval(Interval(*sorted(rng.uniform(-2, 2, 2))), 0, d, 3)
        b = tm_from_interval(Interval(*sorted(rng.uniform(-2, 2, 2))), 1, d, 3)
        a = tm_mul(a, b)
        assert tm_bounds(tm_add(a, b)) == tm_bounds(tm_add(b, a))
        assert tm_bounds(tm_mul(a, b)) == tm_bounds(tm_mul(b, a))
