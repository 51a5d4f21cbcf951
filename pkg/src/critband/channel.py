"""Gaussian channel fit over log2-frequency and the bandwidth it implies.

Each usable band contributes one point: x = log2(center frequency) and
sensitivity s = 1/threshold_sd (small thresholds mean the band matters).
A three-parameter Gaussian s(x) = A * exp(-(x - mu)^2 / (2 sigma^2)) is
fitted by damped Gauss-Newton with deterministic initialization from the
data extrema, and the channel bandwidth is the full width at half maximum
on the octave axis:

    bandwidth = 2 * sqrt(2 ln 2) * sigma

Humans sit at one octave; typical classifiers are several times wider.
Censored bands never enter the fit.  An alternative fit in log-sensitivity
space (a quadratic in x, solved in closed form) is available via
``fit_target="log_sensitivity"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bands import FrequencyBand
from .errors import (
    ConvergenceError,
    DataError,
    DegenerateFitError,
    InsufficientDataError,
)
from .psychometric import MEASURED, ThresholdPoint

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

MAX_ITERATIONS = 200
STEP_TOLERANCE = 1e-10
SIGMA_DEGENERATE = 1e3


@dataclass(frozen=True)
class ChannelFit:
    peak_log2_freq: float  # octaves above 1 cycle/image
    sigma_octaves: float
    peak_sensitivity: float
    bandwidth_octaves: float  # FWHM_PER_SIGMA * sigma, by construction
    n_points: int
    residual: float  # sum of squared residuals in sensitivity units
    censored_bands: list[FrequencyBand] = field(default_factory=list)
    fit_target: str = "sensitivity"
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "peak_log2_freq": self.peak_log2_freq,
            "sigma_octaves": self.sigma_octaves,
            "peak_sensitivity": self.peak_sensitivity,
            "bandwidth_octaves": self.bandwidth_octaves,
            "n_points": self.n_points,
            "residual": self.residual,
            "censored_bands": [b.to_dict() for b in self.censored_bands],
            "fit_target": self.fit_target,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelFit":
        return cls(
            peak_log2_freq=float(d["peak_log2_freq"]),
            sigma_octaves=float(d["sigma_octaves"]),
            peak_sensitivity=float(d["peak_sensitivity"]),
            bandwidth_octaves=float(d["bandwidth_octaves"]),
            n_points=int(d["n_points"]),
            residual=float(d["residual"]),
            censored_bands=[FrequencyBand.from_dict(b) for b in d.get("censored_bands", [])],
            fit_target=d.get("fit_target", "sensitivity"),
            iterations=int(d.get("iterations", 0)),
        )


def bandwidth_from_sigma(sigma_octaves: float) -> float:
    """Full width at half maximum, in octaves."""
    if not sigma_octaves > 0:
        raise DegenerateFitError(f"sigma must be positive, got {sigma_octaves}")
    return FWHM_PER_SIGMA * sigma_octaves


def gaussian_channel(params, x):
    """Channel model A * exp(-(x - mu)^2 / (2 sigma^2)) at log2-frequency x."""
    amp, mu, sigma = params
    x = np.asarray(x, dtype=float)
    return amp * np.exp(-((x - mu) ** 2) / (2.0 * sigma**2))


def gaussian_channel_jacobian(params, x):
    """Analytic Jacobian of the model wrt (A, mu, sigma), shape (n, 3)."""
    amp, mu, sigma = params
    x = np.asarray(x, dtype=float)
    envelope = np.exp(-((x - mu) ** 2) / (2.0 * sigma**2))
    d_amp = envelope
    d_mu = amp * envelope * (x - mu) / sigma**2
    d_sigma = amp * envelope * (x - mu) ** 2 / sigma**3
    return np.stack([d_amp, d_mu, d_sigma], axis=1)


def _points_to_arrays(points: list[ThresholdPoint]):
    usable = [p for p in points if p.censoring == MEASURED and p.threshold_sd]
    censored = [p.band for p in points if p.censoring != MEASURED]
    if len(usable) < 3:
        names = ", ".join(f"{b.center_freq:g}" for b in censored) or "none"
        raise InsufficientDataError(
            f"{len(usable)} usable threshold points, need at least 3 for the "
            f"3-parameter channel fit (censored band centers: {names})"
        )
    x = np.array([p.band.log2_center for p in usable])
    s = np.array([1.0 / p.threshold_sd for p in usable])
    if len(set(x.tolist())) != len(x):
        raise DataError("duplicate band centers among usable points")
    return x, s, censored


def _fit_sensitivity(x, s):
    """Damped Gauss-Newton on raw sensitivities, deterministic start."""
    peak = int(np.argmax(s))
    params = np.array([s[peak], x[peak], 1.0])
    if np.ptp(s) == 0:
        raise DegenerateFitError("all sensitivities equal; channel has no peak")

    def ssr(p):
        return float(np.sum((s - gaussian_channel(p, x)) ** 2))

    trace = [ssr(params)]
    for iteration in range(1, MAX_ITERATIONS + 1):
        residual = s - gaussian_channel(params, x)
        jac = gaussian_channel_jacobian(params, x)
        step, *_ = np.linalg.lstsq(jac, residual, rcond=None)
        if not np.all(np.isfinite(step)):
            raise DegenerateFitError("singular normal equations in channel fit")
        # damping: halve until the step is admissible and reduces the SSR
        damp = 1.0
        current = trace[-1]
        while damp >= 2.0**-40:
            candidate = params + damp * step
            if candidate[0] > 0 and candidate[2] > 0:
                value = ssr(candidate)
                if value <= current:
                    break
            damp *= 0.5
        else:
            # no admissible descent direction left: converged if the full
            # step is already negligible
            if np.linalg.norm(step) <= STEP_TOLERANCE * max(np.linalg.norm(params), 1.0):
                break
            raise ConvergenceError(
                "channel fit stalled without meeting the step tolerance",
                last_params=params.tolist(),
                residual_trace=trace,
            )
        params = candidate
        trace.append(value)
        if abs(params[2]) > SIGMA_DEGENERATE:
            raise DegenerateFitError(
                f"sigma diverged to {params[2]:.3g} octaves; data supply no peak"
            )
        if np.linalg.norm(damp * step) <= STEP_TOLERANCE * max(np.linalg.norm(params), 1.0):
            break
    else:
        raise ConvergenceError(
            f"channel fit did not converge in {MAX_ITERATIONS} iterations",
            last_params=params.tolist(),
            residual_trace=trace,
        )
    return params, trace[-1], iteration


def _fit_log_sensitivity(x, s):
    """Closed-form quadratic fit of ln s; exact in one linear solve."""
    if np.any(s <= 0):
        raise DataError("log-sensitivity fit requires positive sensitivities")
    coeffs = np.polyfit(x, np.log(s), 2)
    a, b, c = coeffs
    if not a < 0:
        raise DegenerateFitError(
            "log-sensitivity quadratic is not concave; channel has no peak"
        )
    sigma = math.sqrt(-1.0 / (2.0 * a))
    mu = b * sigma**2
    amp = math.exp(c + mu**2 / (2.0 * sigma**2))
    params = np.array([amp, mu, sigma])
    residual = float(np.sum((s - gaussian_channel(params, x)) ** 2))
    return params, residual, 1


def fit_channel(points: list[ThresholdPoint], fit_target: str = "sensitivity") -> ChannelFit:
    """Fit the Gaussian channel to non-censored threshold points."""
    x, s, censored = _points_to_arrays(points)
    if fit_target == "sensitivity":
        params, residual, iterations = _fit_sensitivity(x, s)
    elif fit_target == "log_sensitivity":
        params, residual, iterations = _fit_log_sensitivity(x, s)
    else:
        raise DataError(f"unknown fit_target {fit_target!r}")
    amp, mu, sigma = (float(v) for v in params)
    sigma = abs(sigma)
    return ChannelFit(
        peak_log2_freq=mu,
        sigma_octaves=sigma,
        peak_sensitivity=amp,
        bandwidth_octaves=bandwidth_from_sigma(sigma),
        n_points=len(x),
        residual=residual,
        censored_bands=censored,
        fit_target=fit_target,
        iterations=iterations,
    )
