import math

import mpmath
import pytest
from hypothesis import assume, given, settings, strategies as st

from critband.errors import DataError, DegenerateFitError, InsufficientDataError
from critband.metrics import read_metrics_csv
from critband.resources import data_path
from critband.stats import (
    GroupComparison,
    compare_groups,
    extrapolate_to_bandwidth,
    pearson_r,
    regress,
    student_t_two_sided_p,
)


def brute_force_pearson(xs, ys):
    """Direct textbook evaluation, no shared code with the implementation."""
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((xs[i] - mx) * (ys[i] - my) for i in range(n))
    den = math.sqrt(sum((x - mx) ** 2 for x in xs)) * math.sqrt(
        sum((y - my) ** 2 for y in ys)
    )
    return num / den


def mpmath_welch(a, b):
    """Welch t and two-sided p with mpmath's independent special functions."""
    na, nb = len(a), len(b)
    ma = mpmath.fsum(a) / na
    mb = mpmath.fsum(b) / nb
    va = mpmath.fsum((x - ma) ** 2 for x in a) / (na - 1)
    vb = mpmath.fsum((x - mb) ** 2 for x in b) / (nb - 1)
    se2a, se2b = va / na, vb / nb
    t = (ma - mb) / mpmath.sqrt(se2a + se2b)
    df = (se2a + se2b) ** 2 / (se2a**2 / (na - 1) + se2b**2 / (nb - 1))
    # two-sided p by direct numerical integration of the t density
    density = lambda u: (
        mpmath.gamma((df + 1) / 2)
        / (mpmath.sqrt(df * mpmath.pi) * mpmath.gamma(df / 2))
        * (1 + u**2 / df) ** (-(df + 1) / 2)
    )
    p = 2 * mpmath.quad(density, [abs(t), mpmath.inf])
    return float(t), float(p), float(df)


class TestRegress:
    def test_exact_line_recovery(self):
        points = [(x, 5.0 - 0.37 * math.log10(x)) for x in (1e6, 1e7, 1e8, 1e9, 1e10)]
        fit = regress(points, x_transform="log10")
        assert fit.slope == pytest.approx(-0.37, abs=1e-12)
        assert fit.intercept == pytest.approx(5.0, abs=1e-12)
        assert fit.pearson_r == pytest.approx(-1.0, abs=1e-12)

    def test_identity_transform_exact_line(self):
        points = [(x, 2.0 + 3.0 * x) for x in (0.0, 1.0, 2.0, 5.0)]
        fit = regress(points, x_transform="identity")
        assert fit.slope == pytest.approx(3.0, abs=1e-12)
        assert fit.intercept == pytest.approx(2.0, abs=1e-12)
        assert fit.pearson_r == pytest.approx(1.0, abs=1e-12)

    def test_reference_table_bw_ood_correlation(self):
        # the nine-row reference table: r must match the brute force to
        # 1e-12 and be negative (wider bandwidth, worse OOD accuracy)
        metrics = read_metrics_csv(data_path("reference_metrics.csv"))
        bw = [m.bandwidth_octaves for m in metrics]
        ood = [m.ood_accuracy for m in metrics]
        assert len(bw) == 9
        r = pearson_r(bw, ood)
        assert r == pytest.approx(brute_force_pearson(bw, ood), abs=1e-12)
        assert r < 0

    def test_constant_x_degenerate(self):
        with pytest.raises(DegenerateFitError):
            regress([(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)], x_transform="identity")

    def test_too_few_points(self):
        with pytest.raises(InsufficientDataError):
            regress([(1.0, 1.0), (2.0, 2.0)], x_transform="identity")

    def test_log10_rejects_nonpositive_x(self):
        with pytest.raises(DataError):
            regress([(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)], x_transform="log10")

    def test_permutation_invariant(self):
        points = [(1.0, 2.0), (2.0, 2.5), (4.0, 5.0), (8.0, 4.0)]
        a = regress(points, x_transform="identity")
        b = regress(list(reversed(points)), x_transform="identity")
        assert a == b

    @given(
        scale_x=st.floats(0.1, 10.0),
        shift_x=st.floats(-5.0, 5.0),
        scale_y=st.one_of(st.floats(0.1, 10.0), st.floats(-10.0, -0.1)),
        shift_y=st.floats(-5.0, 5.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_pearson_affine_invariance(self, scale_x, shift_x, scale_y, shift_y):
        xs = [0.0, 1.0, 3.0, 4.0, 7.0]
        ys = [1.0, 0.5, 2.5, 2.0, 4.0]
        base = pearson_r(xs, ys)
        moved = pearson_r(
            [scale_x * x + shift_x for x in xs], [scale_y * y + shift_y for y in ys]
        )
        expected = base if scale_y > 0 else -base
        assert moved == pytest.approx(expected, abs=1e-12)


class TestExtrapolate:
    def test_closed_form_value(self):
        fit = regress(
            [(x, 5.0 - 0.37 * math.log10(x)) for x in (1e6, 1e8, 1e10)],
            x_transform="log10",
        )
        result = extrapolate_to_bandwidth(fit, target_bw=1.0)
        assert result == pytest.approx(10.0 ** (4.0 / 0.37), rel=1e-9)

    def test_target_equal_to_intercept_gives_one(self):
        fit = regress(
            [(x, 5.0 - 0.37 * math.log10(x)) for x in (1e6, 1e8, 1e10)],
            x_transform="log10",
        )
        assert extrapolate_to_bandwidth(fit, target_bw=fit.intercept) == pytest.approx(1.0)

    def test_flat_slope_errors(self):
        fit = regress(
            [(1e6, 2.0), (1e7, 2.0), (1e8, 2.0)], x_transform="log10"
        )
        with pytest.raises(DegenerateFitError, match="never crosses"):
            extrapolate_to_bandwidth(fit, target_bw=1.0)

    @given(
        slope=st.floats(-2.0, -0.05),
        intercept=st.floats(1.0, 8.0),
        x0=st.floats(6.0, 11.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_inverts_regress_on_exact_lines(self, slope, intercept, x0):
        xs = [10.0**e for e in (6.0, 7.5, 9.0, 10.5)]
        points = [(x, intercept + slope * math.log10(x)) for x in xs]
        fit = regress(points, x_transform="log10")
        y0 = intercept + slope * x0
        assert math.log10(extrapolate_to_bandwidth(fit, y0)) == pytest.approx(
            x0, abs=1e-9
        )


class TestCompareGroups:
    def test_identical_groups(self):
        result = compare_groups([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert result.welch_t == 0.0
        assert result.approx_p == pytest.approx(1.0, abs=1e-12)

    def test_against_brute_force(self):
        a, b = [1.0, 2.0, 3.0], [4.0, 5.0, 6.0]
        result = compare_groups(a, b)
        t_ref, p_ref, df_ref = mpmath_welch(a, b)
        assert result.welch_t == pytest.approx(t_ref, abs=1e-12)
        assert result.degrees_of_freedom == pytest.approx(df_ref, abs=1e-10)
        assert result.approx_p == pytest.approx(p_ref, abs=1e-8)

    @given(
        a=st.lists(st.floats(-10, 10), min_size=2, max_size=8),
        b=st.lists(st.floats(-10, 10), min_size=2, max_size=8),
    )
    @settings(max_examples=40, deadline=None)
    def test_randomized_against_mpmath(self, a, b):
        assume(len(set(a)) > 1 and len(set(b)) > 1)
        result = compare_groups(a, b)
        t_ref, p_ref, _ = mpmath_welch(a, b)
        assert result.welch_t == pytest.approx(t_ref, rel=1e-9, abs=1e-12)
        assert result.approx_p == pytest.approx(p_ref, abs=1e-8)

    def test_group_of_one_rejected(self):
        with pytest.raises(InsufficientDataError):
            compare_groups([1.0], [2.0, 3.0])

    def test_zero_variance_equal_means_degenerate(self):
        result = compare_groups([2.0, 2.0], [2.0, 2.0])
        assert result.degenerate is True
        assert result.approx_p == 1.0

    def test_zero_variance_distinct_means(self):
        result = compare_groups([1.0, 1.0], [2.0, 2.0])
        assert result.welch_t == -math.inf
        assert result.approx_p == 0.0


class TestStudentT:
    @given(t=st.floats(0.0, 20.0), df=st.floats(1.0, 50.0))
    @settings(max_examples=40, deadline=None)
    def test_against_mpmath_integration(self, t, df):
        density = lambda u: (
            mpmath.gamma((df + 1) / 2)
            / (mpmath.sqrt(df * mpmath.pi) * mpmath.gamma(df / 2))
            * (1 + u**2 / df) ** (-(df + 1) / 2)
        )
        expected = float(2 * mpmath.quad(density, [t, mpmath.inf]))
        assert student_t_two_sided_p(t, df) == pytest.approx(expected, abs=1e-8)
