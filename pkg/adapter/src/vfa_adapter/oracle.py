"""Planted-oracle channel: the accuracy function behind the oracle runner.

A Gaussian channel over log2-frequency drives a descending logistic in
log2(noise SD) whose 50% crossing sits exactly at the channel's threshold
for that band.  Correctness per stimulus comes from stratified sampling:
within each (band, SD) cell the stimuli are ranked by a salted hash and the
stimulus at rank k is answered correctly iff (k + 0.5)/n < accuracy.  The
realized per-cell frequency therefore stays within 1/(2n) of the target
probability (plain independent flips would add binomial noise larger than
the downstream recovery tolerance), and re-runs are bit-identical.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class OracleChannel:
    peak_sensitivity: float = 10.0
    peak_log2_freq: float = 3.0  # 8 cycles/image
    bandwidth_octaves: float = 2.0
    baseline_accuracy: float = 0.9
    chance_level: float = 1.0 / 16.0
    logistic_slope: float = -2.0
    salt: str = "oracle"

    def __post_init__(self):
        if not self.baseline_accuracy > 0.5:
            raise ValueError("oracle baseline must exceed 0.5")
        if not self.logistic_slope < 0:
            raise ValueError("oracle logistic slope must be negative")

    @property
    def sigma_octaves(self) -> float:
        return self.bandwidth_octaves / FWHM_PER_SIGMA

    def accuracy(self, band_center: float | None, sd: float) -> float:
        if band_center is None or sd == 0:
            return self.baseline_accuracy
        x = math.log2(band_center)
        sensitivity = self.peak_sensitivity * math.exp(
            -((x - self.peak_log2_freq) ** 2) / (2.0 * self.sigma_octaves**2)
        )
        threshold = 1.0 / sensitivity
        upper, lower, k = self.baseline_accuracy, self.chance_level, self.logistic_slope
        p = (0.5 - lower) / (upper - lower)
        midpoint = math.log2(threshold) - math.log(p / (1.0 - p)) / k
        z = k * (math.log2(sd) - midpoint)
        if z >= 0:
            logistic = 1.0 / (1.0 + math.exp(-z))
        else:  # avoid overflow for strongly negative z
            e = math.exp(z)
            logistic = e / (1.0 + e)
        return lower + (upper - lower) * logistic

    def rank_key(self, stimulus_id: str) -> bytes:
        return hashlib.sha256(f"{self.salt}|{stimulus_id}".encode("utf-8")).digest()

    def correct_ids(self, cell_stimulus_ids: list[str], accuracy: float) -> set[str]:
        """Stratified correctness assignment for one cell."""
        ordered = sorted(cell_stimulus_ids, key=self.rank_key)
        n = len(ordered)
        return {sid for k, sid in enumerate(ordered) if (k + 0.5) / n < accuracy}
