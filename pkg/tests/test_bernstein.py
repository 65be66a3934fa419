import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachrel.bernstein import (
    EVAL_SLACK,
    Activation,
    bernstein_error,
    bernstein_fit,
    compose_activation,
    fit_approx,
)
from reachrel.tmcore import Domain, Interval, Polynomial, TaylorModel, tm_bounds, tm_from_interval

ACTS = list(Activation)


def coeffs(p: Polynomial, k: int) -> np.ndarray:
    return np.array([p.coefficient((i,)) for i in range(k + 1)])


def identity_tm(lo=-1.0, hi=1.0, order=2):
    return tm_from_interval(Interval(lo, hi), 0, Domain.unit(1), order)


class TestActivation:
    def test_values(self):
        y = np.array([-2.0, 0.0, 3.0])
        np.testing.assert_array_equal(Activation.RELU(y), [0.0, 0.0, 3.0])
        np.testing.assert_array_equal(Activation.LINEAR(y), y)
        np.testing.assert_allclose(Activation.SIGMOID(np.array([0.0])), [0.5])
        np.testing.assert_allclose(Activation.TANH(y), np.tanh(y))

    def test_parse(self):
        assert Activation.parse("relu") is Activation.RELU
        assert Activation.parse(Activation.TANH) is Activation.TANH
        with pytest.raises(ValueError, match="unsupported activation"):
            Activation.parse("swish")


class TestBernsteinFit:
    def test_relu_closed_form(self):
        p = bernstein_fit("relu", Interval(-1, 1), 2)
        np.testing.assert_allclose(coeffs(p, 2), [0.25, 0.5, 0.25], atol=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 6])
    def test_linear_is_reproduced(self, k):
        p = bernstein_fit("linear", Interval(-3.0, 5.0), k)
        np.testing.assert_allclose(coeffs(p, k), [0.0, 1.0] + [0.0] * (k - 1), atol=1e-12)

    def test_relu_on_positive_range_is_identity(self):
        p = bernstein_fit("relu", Interval(2, 3), 1)
        np.testing.assert_allclose(coeffs(p, 1), [0.0, 1.0], atol=1e-12)

    def test_degenerate_range_is_constant(self):
        p = bernstein_fit("tanh", Interval(0.5, 0.5), 4)
        assert p.degree == 0 and p.coefficient((0,)) == pytest.approx(np.tanh(0.5), abs=0)

    def test_order_must_be_positive(self):
        with pytest.raises(ValueError):
            bernstein_fit("relu", Interval(0, 1), 0)

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(ACTS), st.floats(-5, 5), st.floats(0.01, 5), st.integers(1, 6))
    def test_endpoint_interpolation(self, act, a, w, k):
        b = a + w
        p = bernstein_fit(act, Interval(a, b), k)
        assert p(np.array([a])) == pytest.approx(float(act(a)), abs=1e-9)
        assert p(np.array([b])) == pytest.approx(float(act(b)), abs=1e-9)


class TestBernsteinError:
    def test_relu_closed_form_error(self):
        p = bernstein_fit("relu", Interval(-1, 1), 2)
        eps = bernstein_error("relu", p, Interval(-1, 1), 100)
        # dense-grid sup of |(y+1)^2/4 - relu(y)| is 0.25, attained at 0
        y = np.linspace(-1, 1, 200001)
        sup = np.max(np.abs((y + 1) ** 2 / 4 - np.maximum(y, 0)))
        assert sup == pytest.approx(0.25, abs=1e-12)
        assert sup <= eps <= 0.25 + 0.02 + 1e-6

    def test_linear_error_is_the_slack(self):
        p = Polynomial.variable(0, 1)
        assert bernstein_error("linear", p, Interval(-1, 1), 50) == pytest.approx(2 / 50 + EVAL_SLACK, abs=1e-15)

    def test_relu_exact_fit_error(self):
        p = Polynomial.variable(0, 1)
        assert bernstein_error("relu", p, Interval(2, 3), 10) == pytest.approx(0.1, abs=1e-11)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(ACTS), st.floats(-4, 4), st.floats(0.01, 4), st.integers(1, 4),
           st.integers(50, 150))
    def test_pointwise_enclosure(self, act, a, w, k, m):
        b = a + w
        approx = fit_approx(act, Interval(a, b), k, m)
        y = np.linspace(a, b, 10 * m + 1)
        assert np.all(np.abs(approx(y) - act(y)) <= approx.error)

    @pytest.mark.parametrize("act", ["sigmoid", "tanh"])
    @pytest.mark.parametrize("rng", [(-2.0, 2.0), (0.5, 3.0), (-4.0, -1.0)])
    def test_error_shrinks_with_more_steps(self, act, rng):
        p = bernstein_fit(act, Interval(*rng), 4)
        assert bernstein_error(act, p, Interval(*rng), 1000) <= bernstein_error(act, p, Interval(*rng), 10) + 1e-9


class TestCompose:
    def test_relu_on_identity(self):
        b = tm_bounds(compose_activation(identity_tm(), "relu", 2, 100))
        assert b.contains(Interval(0, 1))
        assert Interval(-0.28, 1.28).contains(b)

    @pytest.mark.parametrize("act", ACTS)
    def test_constant_input(self, act):
        t = TaylorModel.constant(0.3, Domain.unit(1))
        assert tm_bounds(compose_activation(t, act)).contains(float(act(0.3)))

    def test_linear_only_widens_by_slack(self):
        t = identity_tm(0.0, 2.0)
        out = compose_activation(t, "linear", 4, 200)
        assert out.poly.coefficient((1,)) == pytest.approx(1.0, abs=1e-12)
        assert out.poly.coefficient((0,)) == pytest.approx(1.0, abs=1e-12)
        assert out.remainder.width == pytest.approx(2 * (2.0 / 200), abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(ACTS), st.floats(-3, 3), st.floats(0.05, 3), st.integers(1, 4))
    def test_sampled_enclosure(self, act, lo, w, order):
        t = identity_tm(lo, lo + w, order)
        out = compose_activation(t, act)
        xs = np.linspace(-1, 1, 257)
        ys = np.array([t.poly(np.array([v])) for v in xs]).ravel()
        vals = out.poly(xs[:, None])
        gap = act(ys) - vals
        assert np.all(gap >= out.remainder.lo - 1e-12) and np.all(gap <= out.remainder.hi + 1e-12)

    def test_unbounded_range_rejected(self):
        t = TaylorModel(Polynomial.variable(0, 1), Interval(-np.inf, 0.0), Domain.unit(1))
        with pytest.raises(ValueError):
            compose_activation(t, "tanh")
