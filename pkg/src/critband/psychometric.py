"""Per-band 50%-threshold estimation from noise-ladder accuracies.

Accuracy against log2(noise SD) is modeled as a descending logistic with
both asymptotes fixed: the upper one at the model's unperturbed baseline
accuracy, the lower one at chance for the 16-way task (1/16).  Only the
midpoint and slope are fitted, so the SD at which the curve crosses the
accuracy criterion (absolute 50% by default) has a closed form.

Bands where the criterion is out of reach are censored, never imputed:
``floor`` when the baseline itself is at or below the criterion, and
``never_drops`` when the fitted crossing lies beyond the tested SD range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .bands import FrequencyBand
from .errors import DataError, InsufficientDataError
from .predictions import CellAccuracy

CHANCE_16 = 1.0 / 16.0

MEASURED = "measured"
NEVER_DROPS = "never_drops"
FLOOR = "floor"


@dataclass(frozen=True)
class PsychometricFit:
    band: FrequencyBand
    midpoint_log2_sd: float
    slope: float  # <= 0: more noise never helps
    upper: float  # baseline accuracy at sd = 0
    lower: float  # chance level
    rss: float
    n_cells: int


@dataclass(frozen=True)
class ThresholdPoint:
    band: FrequencyBand
    threshold_sd: float | None
    baseline_accuracy: float
    censoring: str  # measured | never_drops | floor


def logistic_accuracy(log2_sd, midpoint, slope, upper, lower):
    """Descending logistic on the log2-SD axis."""
    z = slope * (np.asarray(log2_sd, dtype=float) - midpoint)
    return lower + (upper - lower) / (1.0 + np.exp(-z))


def fit_psychometric(
    cells: list[CellAccuracy],
    baseline: float,
    chance_level: float = CHANCE_16,
) -> PsychometricFit:
    """Least-squares logistic fit for one band's nonzero-SD cells.

    Asymptotes are fixed (upper = baseline, lower = chance); initialization
    is deterministic: midpoint at the cell nearest the 50% level, slope -1.
    """
    cells = [c for c in cells if c.sd > 0]
    if len(cells) < 3:
        band = cells[0].band if cells else None
        raise InsufficientDataError(
            f"band {band}: {len(cells)} nonzero-SD cells, need at least 3"
        )
    bands = {c.band for c in cells}
    if len(bands) != 1 or None in bands:
        raise DataError(f"cells span multiple bands: {sorted(b.center_freq for b in bands if b)}")
    band = cells[0].band
    if not 0 <= baseline <= 1:
        raise DataError(f"baseline accuracy {baseline} outside [0, 1]")
    if baseline <= chance_level:
        raise DataError(
            f"baseline accuracy {baseline} is at or below chance {chance_level}; "
            "psychometric fit undefined"
        )

    x = np.array([math.log2(c.sd) for c in cells])
    y = np.array([c.accuracy for c in cells])
    nearest = int(np.argmin(np.abs(y - 0.5)))
    x0 = np.array([x[nearest], -1.0])

    def residuals(params):
        return logistic_accuracy(x, params[0], params[1], baseline, chance_level) - y

    result = least_squares(
        residuals,
        x0,
        bounds=([-np.inf, -np.inf], [np.inf, 0.0]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    midpoint, slope = result.x
    return PsychometricFit(
        band=band,
        midpoint_log2_sd=float(midpoint),
        slope=float(slope),
        upper=float(baseline),
        lower=float(chance_level),
        rss=float(np.sum(result.fun**2)),
        n_cells=len(cells),
    )


def extract_threshold(
    fit: PsychometricFit,
    sd_ladder: list[float],
    criterion: float = 0.5,
) -> ThresholdPoint:
    """Closed-form SD at which the fitted curve crosses the criterion.

    Censoring: ``floor`` when baseline <= criterion (including the exact
    boundary, where the crossing degenerates to sd -> 0+), ``never_drops``
    when the crossing lies above the ladder maximum or the curve is flat.
    """
    if not sd_ladder:
        raise DataError("empty sd ladder")
    sd_min, sd_max = min(sd_ladder), max(sd_ladder)
    if fit.upper <= criterion:
        return ThresholdPoint(fit.band, None, fit.upper, FLOOR)
    if not fit.lower < criterion:
        raise DataError(
            f"criterion {criterion} at or below the lower asymptote {fit.lower}"
        )
    if fit.slope == 0.0:
        return ThresholdPoint(fit.band, None, fit.upper, NEVER_DROPS)
    p = (criterion - fit.lower) / (fit.upper - fit.lower)
    crossing_log2 = fit.midpoint_log2_sd + math.log(p / (1.0 - p)) / fit.slope
    # censor in log space; exponentiating first can overflow when a
    # near-flat fit pushes the crossing far beyond the ladder
    if crossing_log2 > math.log2(sd_max):
        return ThresholdPoint(fit.band, None, fit.upper, NEVER_DROPS)
    threshold = 2.0**crossing_log2
    if threshold <= sd_min:
        # criterion already passed below the tested range
        return ThresholdPoint(fit.band, None, fit.upper, FLOOR)
    return ThresholdPoint(fit.band, float(threshold), fit.upper, MEASURED)


def baseline_from_cells(cells: list[CellAccuracy]) -> float:
    """Accuracy of the shared sd = 0 cell."""
    zero = [c for c in cells if c.sd == 0]
    if not zero:
        raise DataError("no sd = 0 baseline cell present")
    if len(zero) > 1:
        raise DataError("multiple sd = 0 baseline cells present")
    return zero[0].accuracy


def thresholds_for_all_bands(
    cells: list[CellAccuracy],
    sd_ladder: list[float],
    criterion: float = 0.5,
    chance_level: float = CHANCE_16,
) -> tuple[list[ThresholdPoint], list[PsychometricFit]]:
    """Group cells by band, fit each, and extract thresholds.

    The shared baseline row (band None, sd 0) feeds every band's upper
    asymptote.
    """
    baseline = baseline_from_cells(cells)
    by_band: dict[FrequencyBand, list[CellAccuracy]] = {}
    for cell in cells:
        if cell.band is not None:
            by_band.setdefault(cell.band, []).append(cell)
    points, fits = [], []
    for band in sorted(by_band, key=lambda b: b.center_freq):
        if baseline <= criterion:
            # criterion unreachable from the start; no fit to run
            points.append(ThresholdPoint(band, None, baseline, FLOOR))
            continue
        fit = fit_psychometric(by_band[band], baseline, chance_level)
        fits.append(fit)
        points.append(extract_threshold(fit, sd_ladder, criterion))
    return points, fits


THRESHOLD_CSV_HEADER = [
    "band_center",
    "band_width",
    "band_transition",
    "baseline_accuracy",
    "threshold_sd",
    "censoring",
    "midpoint_log2_sd",
    "slope",
    "rss",
    "n_cells",
]


def write_thresholds_csv(path, points: list[ThresholdPoint], fits: list[PsychometricFit]) -> None:
    import csv

    fit_by_band = {f.band: f for f in fits}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(THRESHOLD_CSV_HEADER)
        for pt in points:
            fit = fit_by_band.get(pt.band)
            writer.writerow(
                [
                    repr(pt.band.center_freq),
                    repr(pt.band.width_octaves),
                    repr(pt.band.transition_octaves),
                    repr(pt.baseline_accuracy),
                    repr(pt.threshold_sd) if pt.threshold_sd is not None else "",
                    pt.censoring,
                    repr(fit.midpoint_log2_sd) if fit else "",
                    repr(fit.slope) if fit else "",
                    repr(fit.rss) if fit else "",
                    fit.n_cells if fit else "",
                ]
            )


def read_thresholds_csv(path) -> list[ThresholdPoint]:
    import csv

    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != THRESHOLD_CSV_HEADER:
            raise DataError(f"{path}: unexpected thresholds CSV header")
        for row in reader:
            band = FrequencyBand(
                float(row["band_center"]),
                float(row["band_width"]),
                float(row["band_transition"]),
            )
            points.append(
                ThresholdPoint(
                    band=band,
                    threshold_sd=float(row["threshold_sd"]) if row["threshold_sd"] else None,
                    baseline_accuracy=float(row["baseline_accuracy"]),
                    censoring=row["censoring"],
                )
            )
    return points
