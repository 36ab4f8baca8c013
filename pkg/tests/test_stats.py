import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptcover.errors import (
    EmptyInputError,
    LengthMismatchError,
    TooFewPointsError,
    ZeroVarianceError,
)
from conceptcover.stats import distribution_stats, linear_fit, pearson


class TestDistributionStats:
    def test_singleton(self):
        assert distribution_stats([0.5]) == (0.5, 0.5, 0.5, 0.5)

    def test_two_values(self):
        stats = distribution_stats([0.0, 1.0])
        assert stats.mean == 0.5
        assert stats.median == 0.5

    def test_linear_interpolation_quartiles(self):
        # hand computation, type-7 rule: positions (n-1)*q over sorted values
        stats = distribution_stats([1, 2, 3, 4, 5, 6, 7, 8])
        assert stats.q1 == pytest.approx(2.75, abs=1e-12)
        assert stats.median == pytest.approx(4.5, abs=1e-12)
        assert stats.q3 == pytest.approx(6.25, abs=1e-12)
        assert stats.mean == pytest.approx(4.5, abs=1e-12)

    def test_order_does_not_matter(self):
        assert distribution_stats([8, 1, 5, 2, 7, 3, 6, 4]) == distribution_stats(
            [1, 2, 3, 4, 5, 6, 7, 8]
        )

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            distribution_stats([])


class TestPearson:
    def test_perfect_positive(self):
        rho, _ = pearson([1, 2, 3], [1, 2, 3])
        assert rho == pytest.approx(1.0, abs=1e-15)

    def test_perfect_negative(self):
        rho, _ = pearson([1, 2, 3], [3, 2, 1])
        assert rho == pytest.approx(-1.0, abs=1e-15)

    def test_hand_computed_rho_and_p(self):
        # rho = 3/5; t^2 = 1.125 on 2 df -> two-sided p is exactly 0.4
        rho, p = pearson([1, 2, 3, 4], [2, 1, 4, 3])
        assert rho == pytest.approx(0.6, abs=1e-12)
        assert p == pytest.approx(0.4, abs=1e-9)

    def test_p_at_perfect_correlation(self):
        _, p = pearson([1, 2, 3, 4], [2, 4, 6, 8])
        assert p == pytest.approx(0.0, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            pearson([1, 2, 3], [1, 2])

    def test_too_few_points(self):
        with pytest.raises(TooFewPointsError):
            pearson([1, 2], [3, 4])

    def test_zero_variance(self):
        with pytest.raises(ZeroVarianceError):
            pearson([1, 1, 1], [1, 2, 3])
        with pytest.raises(ZeroVarianceError):
            pearson([1, 2, 3], [5, 5, 5])


@settings(deadline=None, max_examples=200)
@given(
    st.integers(0, 2**32 - 1),
    st.floats(0.1, 50.0),
    st.floats(-100.0, 100.0),
)
def test_pearson_scale_shift_invariance(seed, scale, shift):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=8)
    y = rng.normal(size=8)
    base, _ = pearson(list(x), list(y))
    scaled, _ = pearson(list(scale * x + shift), list(y))
    assert scaled == pytest.approx(base, abs=1e-12)
    negated, _ = pearson(list(-scale * x + shift), list(y))
    assert negated == pytest.approx(-base, abs=1e-12)


@settings(deadline=None, max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_pearson_symmetry_and_bounds(seed):
    rng = np.random.default_rng(seed)
    x = list(rng.normal(size=6))
    y = list(rng.normal(size=6))
    rho_xy, p_xy = pearson(x, y)
    rho_yx, p_yx = pearson(y, x)
    assert rho_xy == pytest.approx(rho_yx, abs=1e-15)
    assert p_xy == pytest.approx(p_yx, abs=1e-15)
    assert -1.0 <= rho_xy <= 1.0
    assert 0.0 <= p_xy <= 1.0


class TestLinearFit:
    def test_exact_line(self):
        xs = [0, 1, 2, 3]
        fit = linear_fit(xs, [2 * x + 1 for x in xs])
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.intercept == pytest.approx(1.0, abs=1e-12)

    def test_constant_y(self):
        fit = linear_fit([0, 1, 2], [3, 3, 3])
        assert fit.slope == 0.0
        assert fit.intercept == pytest.approx(3.0, abs=1e-12)

    def test_hand_computed_normal_equations(self):
        fit = linear_fit([0, 1, 2], [0, 1, 1])
        assert fit.slope == pytest.approx(0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(1 / 6, abs=1e-12)

    def test_degenerate_x(self):
        with pytest.raises(ZeroVarianceError):
            linear_fit([2, 2, 2], [1, 2, 3])

    def test_too_few_points(self):
        with pytest.raises(TooFewPointsError):
            linear_fit([1], [1])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            linear_fit([1, 2], [1, 2, 3])


@settings(deadline=None, max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_linear_fit_residuals_orthogonal_to_x(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=7)
    y = rng.normal(size=7)
    fit = linear_fit(list(x), list(y))
    residuals = y - (fit.slope * x + fit.intercept)
    assert abs(residuals.sum()) < 1e-9
    assert abs((residuals * x).sum()) < 1e-9
