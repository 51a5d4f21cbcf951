"""Robustness metrics: OOD accuracy and shape bias.

OOD accuracy is the unweighted arithmetic mean of per-dataset accuracies
over the configured 17-dataset collection (dataset-level averaging, not
pooled trials; a ``partial`` flag permits running on a subset).  Shape bias
is the fraction of cue-consistent responses that follow shape on
cue-conflict images:

    shape_bias = acc_shape / (acc_shape + acc_texture)

Trials matching neither label cancel out of the ratio, so adding them is a
no-op by construction.  :class:`ModelMetrics` collects the per-model triple
(bandwidth, OOD accuracy, shape bias) together with size and training-data
tags for the report tables.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

from .errors import DataError, UndefinedMetricError
from .resources import load_ood_dataset_tags


@dataclass(frozen=True)
class DatasetAccuracy:
    dataset_tag: str
    accuracy: float
    n_trials: int

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise DataError(f"accuracy {self.accuracy} outside [0, 1]")


@dataclass(frozen=True)
class CueConflictTrial:
    stimulus_id: str
    shape_label: str
    texture_label: str
    predicted: str | None  # None when the raw label was unmapped

    def __post_init__(self):
        if self.shape_label == self.texture_label:
            raise DataError(
                f"{self.stimulus_id}: shape and texture labels are both "
                f"{self.shape_label!r}; not a cue conflict"
            )


@dataclass(frozen=True)
class ModelMetrics:
    model_id: str
    bandwidth_octaves: float | None = None
    ood_accuracy: float | None = None
    shape_bias: float | None = None
    param_count: int | None = None
    zero_shot: bool | None = None
    clip_supervised: bool | None = None
    in1k: bool | None = None
    trained_in22k: bool | None = None
    group: str | None = None

    def __post_init__(self):
        for name in ("ood_accuracy", "shape_bias"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise DataError(f"{name} {value} outside [0, 1]")
        if self.param_count is not None and not self.param_count > 0:
            raise DataError(f"param_count must be positive, got {self.param_count}")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "bandwidth_octaves": self.bandwidth_octaves,
            "ood_accuracy": self.ood_accuracy,
            "shape_bias": self.shape_bias,
            "param_count": self.param_count,
            "zero_shot": self.zero_shot,
            "clip_supervised": self.clip_supervised,
            "in1k": self.in1k,
            "trained_in22k": self.trained_in22k,
            "group": self.group,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelMetrics":
        return cls(
            model_id=d["model_id"],
            bandwidth_octaves=d.get("bandwidth_octaves"),
            ood_accuracy=d.get("ood_accuracy"),
            shape_bias=d.get("shape_bias"),
            param_count=d.get("param_count"),
            zero_shot=d.get("zero_shot"),
            clip_supervised=d.get("clip_supervised"),
            in1k=d.get("in1k"),
            trained_in22k=d.get("trained_in22k"),
            group=d.get("group"),
        )


def ood_accuracy(
    per_dataset: list[DatasetAccuracy],
    expected_tags: list[str] | None = None,
    partial: bool = False,
) -> float:
    """Unweighted mean accuracy across the configured OOD datasets."""
    if expected_tags is None:
        expected_tags = load_ood_dataset_tags()
    tags = [d.dataset_tag for d in per_dataset]
    dupes = sorted({t for t in tags if tags.count(t) > 1})
    if dupes:
        raise DataError(f"duplicate dataset tags: {', '.join(dupes)}")
    unknown = sorted(set(tags) - set(expected_tags))
    if unknown:
        raise DataError(f"unknown dataset tags: {', '.join(unknown)}")
    missing = sorted(set(expected_tags) - set(tags))
    if missing and not partial:
        raise DataError(
            f"missing dataset tags (pass partial=True to allow): {', '.join(missing)}"
        )
    if not per_dataset:
        raise DataError("no dataset accuracies given")
    return sum(d.accuracy for d in per_dataset) / len(per_dataset)


def shape_bias(trials: list[CueConflictTrial]) -> float:
    """Shape responses over cue-consistent responses on cue-conflict data."""
    if not trials:
        raise DataError("no cue-conflict trials given")
    n_shape = sum(1 for t in trials if t.predicted == t.shape_label)
    n_texture = sum(1 for t in trials if t.predicted == t.texture_label)
    if n_shape + n_texture == 0:
        raise UndefinedMetricError(
            "no cue-consistent responses: shape bias is undefined"
        )
    # count ratio == acc_shape / (acc_shape + acc_texture) with the trial
    # total cancelled exactly, so neither-label trials cannot move it even
    # at the last bit
    return n_shape / (n_shape + n_texture)


def write_metrics_json(path, metrics: list[ModelMetrics]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([m.to_dict() for m in metrics], fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_metrics_json(path) -> list[ModelMetrics]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    return [ModelMetrics.from_dict(d) for d in data]


def read_ood_truth_csv(path) -> dict[str, tuple[str, str]]:
    """Ground-truth listing: stimulus_id -> (dataset_tag, true_superclass)."""
    truth = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"stimulus_id", "dataset_tag", "true_superclass"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(
                f"{path}: truth CSV needs columns stimulus_id,dataset_tag,true_superclass"
            )
        for row in reader:
            sid = row["stimulus_id"].strip()
            if sid in truth:
                raise DataError(f"{path}: duplicate stimulus_id {sid!r}")
            truth[sid] = (row["dataset_tag"].strip(), row["true_superclass"].strip())
    return truth


def read_cueconflict_truth_csv(path) -> dict[str, tuple[str, str]]:
    """Cue-conflict listing: stimulus_id -> (shape_label, texture_label)."""
    truth = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"stimulus_id", "shape_label", "texture_label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(
                f"{path}: truth CSV needs columns stimulus_id,shape_label,texture_label"
            )
        for row in reader:
            sid = row["stimulus_id"].strip()
            if sid in truth:
                raise DataError(f"{path}: duplicate stimulus_id {sid!r}")
            truth[sid] = (row["shape_label"].strip(), row["texture_label"].strip())
    return truth


def score_ood_directory(
    ood_dir,
    truth: dict[str, tuple[str, str]],
    mapping,
    expected_tags: list[str] | None = None,
    partial: bool = False,
) -> tuple[list[DatasetAccuracy], float]:
    """Score one prediction log per dataset (``<tag>.jsonl``) in a directory."""
    from pathlib import Path

    from .predictions import read_prediction_log

    if expected_tags is None:
        expected_tags = load_ood_dataset_tags()
    per_dataset = []
    for log_path in sorted(Path(ood_dir).glob("*.jsonl")):
        tag = log_path.stem
        n = correct = 0
        for _, record in read_prediction_log(log_path):
            if record.stimulus_id not in truth:
                raise DataError(
                    f"{log_path}: stimulus {record.stimulus_id!r} absent from truth listing"
                )
            true_tag, true_label = truth[record.stimulus_id]
            if true_tag != tag:
                raise DataError(
                    f"{log_path}: stimulus {record.stimulus_id!r} belongs to dataset "
                    f"{true_tag!r}, not {tag!r}"
                )
            n += 1
            correct += int(mapping(record.raw_label) == true_label)
        if n == 0:
            raise DataError(f"{log_path}: empty prediction log")
        per_dataset.append(DatasetAccuracy(tag, correct / n, n))
    return per_dataset, ood_accuracy(per_dataset, expected_tags, partial=partial)


def score_cueconflict(
    log_path,
    truth: dict[str, tuple[str, str]],
    mapping,
) -> tuple[list[CueConflictTrial], float]:
    """Build cue-conflict trials from a prediction log and score shape bias."""
    from .predictions import read_prediction_log

    trials = []
    for _, record in read_prediction_log(log_path):
        if record.stimulus_id not in truth:
            raise DataError(
                f"{log_path}: stimulus {record.stimulus_id!r} absent from cue-conflict listing"
            )
        shape_label, texture_label = truth[record.stimulus_id]
        trials.append(
            CueConflictTrial(
                stimulus_id=record.stimulus_id,
                shape_label=shape_label,
                texture_label=texture_label,
                predicted=mapping(record.raw_label),
            )
        )
    return trials, shape_bias(trials)


_BOOL = {"yes": True, "no": False, "": None}


def read_metrics_csv(path) -> list[ModelMetrics]:
    """Load model metrics from CSV (the bundled reference table's format)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(
                ModelMetrics(
                    model_id=row["model_id"],
                    group=row.get("group") or None,
                    zero_shot=_BOOL[row.get("zero_shot", "")],
                    clip_supervised=_BOOL[row.get("clip_supervised", "")],
                    in1k=_BOOL[row.get("in1k", "")],
                    trained_in22k=_BOOL[row.get("trained_in22k", "")],
                    param_count=int(row["param_count"]) if row.get("param_count") else None,
                    bandwidth_octaves=float(row["bandwidth_octaves"])
                    if row.get("bandwidth_octaves")
                    else None,
                    ood_accuracy=float(row["ood_accuracy"]) if row.get("ood_accuracy") else None,
                    shape_bias=float(row["shape_bias"]) if row.get("shape_bias") else None,
                )
            )
    return out


def load_metrics_any(path) -> list[ModelMetrics]:
    """Load metrics from a JSON file, a CSV file, or a directory of either."""
    from pathlib import Path

    path = Path(path)
    if path.is_dir():
        out = []
        for child in sorted(path.iterdir()):
            if child.suffix == ".json":
                out.extend(read_metrics_json(child))
            elif child.suffix == ".csv":
                out.extend(read_metrics_csv(child))
        if not out:
            raise DataError(f"{path}: no metrics files found")
        return out
    if path.suffix == ".csv":
        return read_metrics_csv(path)
    return read_metrics_json(path)
