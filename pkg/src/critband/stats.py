"""Cross-model statistics: OLS regression, extrapolation, Welch's t.

Covers the three analyses run over per-model metrics: bandwidth against
log10 parameter count with extrapolation to a target bandwidth (where does
the trend line hit the one-octave human level?), the bandwidth comparison
between training-data groups, and the bandwidth/shape-bias correlations
with OOD accuracy.

The two-sided p-value of Welch's t uses the regularized incomplete beta
function; accuracy is the 1e-8 of that evaluation, exactness is not
claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import betainc

from .errors import DataError, DegenerateFitError, InsufficientDataError


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    pearson_r: float
    n: int
    x_transform: str  # "log10" | "identity"

    def predict(self, x: float) -> float:
        return self.intercept + self.slope * self._transform(x)

    def _transform(self, x: float) -> float:
        if self.x_transform == "log10":
            if not x > 0:
                raise DataError(f"log10 transform needs x > 0, got {x}")
            return math.log10(x)
        return float(x)


@dataclass(frozen=True)
class GroupComparison:
    group_a_label: str
    group_b_label: str
    mean_a: float
    mean_b: float
    sd_a: float
    sd_b: float
    n_a: int
    n_b: int
    welch_t: float
    degrees_of_freedom: float
    approx_p: float
    degenerate: bool = False


def pearson_r(xs, ys) -> float:
    n = len(xs)
    if n != len(ys):
        raise DataError("x and y lengths differ")
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    var_x = sum((x - mean_x) ** 2 for x in xs)
    var_y = sum((y - mean_y) ** 2 for y in ys)
    if var_x == 0 or var_y == 0:
        raise DegenerateFitError("zero variance; correlation undefined")
    return cov / math.sqrt(var_x * var_y)


def regress(points, x_transform: str = "log10") -> RegressionResult:
    """Ordinary least squares of y on transformed x, with Pearson r."""
    if x_transform not in ("log10", "identity"):
        raise DataError(f"unknown x_transform {x_transform!r}")
    if len(points) < 3:
        raise InsufficientDataError(f"regression needs >= 3 points, got {len(points)}")
    if x_transform == "log10":
        bad = [x for x, _ in points if not x > 0]
        if bad:
            raise DataError(f"log10 transform needs x > 0; offending values: {bad[:5]}")
        xs = [math.log10(x) for x, _ in points]
    else:
        xs = [float(x) for x, _ in points]
    ys = [float(y) for _, y in points]
    n = len(points)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    if sxx == 0:
        raise DegenerateFitError("zero x-variance; regression undefined")
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    syy = sum((y - mean_y) ** 2 for y in ys)
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    # flat y: slope 0 is a valid (if useless) fit; report r = 0 rather than
    # failing, since only zero x-variance makes the regression undefined
    r = sxy / math.sqrt(sxx * syy) if syy > 0 else 0.0
    return RegressionResult(
        slope=slope,
        intercept=intercept,
        pearson_r=r,
        n=n,
        x_transform=x_transform,
    )


def extrapolate_to_bandwidth(fit: RegressionResult, target_bw: float = 1.0) -> float:
    """Parameter count at which the fitted trend reaches the target bandwidth."""
    if fit.x_transform != "log10":
        raise DataError("extrapolation requires a log10-transformed regression")
    if fit.slope >= 0:
        raise DegenerateFitError(
            f"slope {fit.slope} is non-negative; the trend never crosses "
            f"bandwidth {target_bw} from above"
        )
    return 10.0 ** ((target_bw - fit.intercept) / fit.slope)


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t via the regularized incomplete beta."""
    if df <= 0:
        raise DataError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def compare_groups(a, b, group_a_label: str = "a", group_b_label: str = "b") -> GroupComparison:
    """Welch's unequal-variance t-test with Welch-Satterthwaite df."""
    if len(a) < 2 or len(b) < 2:
        raise InsufficientDataError(
            f"each group needs >= 2 values, got {len(a)} and {len(b)}"
        )
    n_a, n_b = len(a), len(b)
    mean_a = sum(a) / n_a
    mean_b = sum(b) / n_b
    var_a = sum((v - mean_a) ** 2 for v in a) / (n_a - 1)
    var_b = sum((v - mean_b) ** 2 for v in b) / (n_b - 1)
    se2_a, se2_b = var_a / n_a, var_b / n_b
    denom = se2_a + se2_b
    if denom == 0:
        if mean_a == mean_b:
            return GroupComparison(
                group_a_label, group_b_label, mean_a, mean_b,
                math.sqrt(var_a), math.sqrt(var_b), n_a, n_b,
                welch_t=0.0, degrees_of_freedom=float(n_a + n_b - 2),
                approx_p=1.0, degenerate=True,
            )
        t = math.inf if mean_a > mean_b else -math.inf
        return GroupComparison(
            group_a_label, group_b_label, mean_a, mean_b,
            math.sqrt(var_a), math.sqrt(var_b), n_a, n_b,
            welch_t=t, degrees_of_freedom=float(n_a + n_b - 2),
            approx_p=0.0, degenerate=False,
        )
    t = (mean_a - mean_b) / math.sqrt(denom)
    df = denom**2 / (se2_a**2 / (n_a - 1) + se2_b**2 / (n_b - 1))
    return GroupComparison(
        group_a_label=group_a_label,
        group_b_label=group_b_label,
        mean_a=mean_a,
        mean_b=mean_b,
        sd_a=math.sqrt(var_a),
        sd_b=math.sqrt(var_b),
        n_a=n_a,
        n_b=n_b,
        welch_t=t,
        degrees_of_freedom=df,
        approx_p=student_t_two_sided_p(t, df),
    )
