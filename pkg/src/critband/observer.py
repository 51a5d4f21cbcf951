"""Synthetic observer: analytic prediction logs for validating the pipeline.

The observer owns a planted Gaussian channel.  Its sensitivity to a band
centered at frequency f is s(x) = A * exp(-(x - mu)^2 / (2 sigma^2)) with
x = log2(f), its noise threshold is 1/s, and its accuracy on a stimulus
follows a descending logistic in log2(SD) that crosses 50% exactly at that
threshold.  Logs are fabricated per manifest cell with deterministic
rounding (no RNG), so a pipeline run over them must recover the planted
bandwidth; this closes the loop without touching any real model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import FWHM_PER_SIGMA
from .errors import ConfigError
from .predictions import PredictionRecord, write_prediction_log
from .psychometric import CHANCE_16
from .resources import load_superclasses
from .stimuli import StimulusManifest


@dataclass(frozen=True)
class SyntheticObserver:
    peak_sensitivity: float = 10.0
    peak_log2_freq: float = 3.0  # 8 cycles/image
    bandwidth_octaves: float = 2.0
    baseline_accuracy: float = 0.9
    chance_level: float = CHANCE_16
    logistic_slope: float = -2.0
    model_id: str = "synthetic-observer"

    def __post_init__(self):
        if not self.baseline_accuracy > 0.5:
            raise ConfigError(
                "observer baseline must exceed the 50% criterion or every band "
                "is floor-censored"
            )
        if not self.logistic_slope < 0:
            raise ConfigError("observer logistic slope must be negative")

    @property
    def sigma_octaves(self) -> float:
        return self.bandwidth_octaves / FWHM_PER_SIGMA

    def sensitivity(self, center_freq: float) -> float:
        x = math.log2(center_freq)
        return self.peak_sensitivity * math.exp(
            -((x - self.peak_log2_freq) ** 2) / (2.0 * self.sigma_octaves**2)
        )

    def threshold_sd(self, center_freq: float) -> float:
        return 1.0 / self.sensitivity(center_freq)

    def accuracy(self, center_freq: float | None, sd: float) -> float:
        """Closed-form accuracy for one (band, SD) cell; sd = 0 is baseline."""
        if center_freq is None or sd == 0:
            return self.baseline_accuracy
        upper, lower, k = self.baseline_accuracy, self.chance_level, self.logistic_slope
        p = (0.5 - lower) / (upper - lower)
        midpoint = math.log2(self.threshold_sd(center_freq)) - math.log(p / (1 - p)) / k
        z = k * (math.log2(sd) - midpoint)
        return lower + (upper - lower) / (1.0 + math.exp(-z))

    def to_dict(self) -> dict:
        return {
            "peak_sensitivity": self.peak_sensitivity,
            "peak_log2_freq": self.peak_log2_freq,
            "bandwidth_octaves": self.bandwidth_octaves,
            "baseline_accuracy": self.baseline_accuracy,
            "chance_level": self.chance_level,
            "logistic_slope": self.logistic_slope,
            "model_id": self.model_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticObserver":
        return cls(**d)


def generate_observer_log(
    manifest: StimulusManifest,
    observer: SyntheticObserver,
    out_path,
    superclasses: list[str] | None = None,
) -> int:
    """Write one prediction per manifest entry; returns the record count.

    Within each (band, SD) cell the first round(acc * n) stimuli (by id) are
    answered correctly, the rest get a deterministic wrong superclass.
    """
    labels = superclasses if superclasses is not None else load_superclasses()
    by_cell: dict[tuple, list] = {}
    for entry in manifest.entries:
        center = entry.band.center_freq if entry.band else None
        by_cell.setdefault((center, entry.target_sd), []).append(entry)

    records = []
    for (center, sd), entries in sorted(
        by_cell.items(), key=lambda kv: (kv[0][0] or 0.0, kv[0][1])
    ):
        acc = observer.accuracy(center, sd)
        entries = sorted(entries, key=lambda e: e.stimulus_id)
        n_correct = int(math.floor(acc * len(entries) + 0.5))
        for i, entry in enumerate(entries):
            truth = manifest.sources[entry.source_id].true_superclass
            if i < n_correct:
                label = truth
            else:
                wrong = labels[(labels.index(truth) + 1) % len(labels)]
                label = wrong
            records.append(
                PredictionRecord(
                    stimulus_id=entry.stimulus_id,
                    raw_label=label,
                    model_id=observer.model_id,
                )
            )
    records.sort(key=lambda r: r.stimulus_id)
    write_prediction_log(out_path, records)
    return len(records)
