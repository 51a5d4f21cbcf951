"""Prediction-record ingestion and superclass mapping.

The prediction log is the language-neutral boundary with model runners:
JSON lines of {stimulus_id, raw_label, model_id[, raw_confidence]}.  A
record is correct iff the superclass mapping sends its raw label to the
stimulus's true superclass; raw labels missing from the mapping score as
incorrect (dropping them would inflate accuracy in the 16-way task).

Ingestion folds records into per-(band, sd) accuracy cells.  The fold is
a commutative count merge, so permuting log lines cannot change the result,
and duplicate (stimulus_id, model_id) pairs resolve last-write-wins with a
surfaced warning count.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterable

from .bands import FrequencyBand
from .errors import MappingError, PredictionLogError
from .resources import load_superclasses
from .stimuli import StimulusManifest


@dataclass(frozen=True)
class PredictionRecord:
    stimulus_id: str
    raw_label: str
    model_id: str
    raw_confidence: float | None = None


@dataclass
class SuperclassMapping:
    table: dict[str, str]
    superclasses: list[str]

    def __call__(self, raw_label: str) -> str | None:
        return self.table.get(raw_label)


@dataclass(frozen=True)
class CellAccuracy:
    band: FrequencyBand | None  # None is the shared sd=0 baseline cell
    sd: float
    n_trials: int
    n_correct: int

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_trials


@dataclass
class IngestStats:
    n_records: int = 0
    n_duplicates: int = 0
    duplicate_ids: list[str] = field(default_factory=list)


def load_mapping(path, superclasses=None) -> SuperclassMapping:
    """Load a raw_label -> superclass CSV (header ``raw_label,superclass``)."""
    superclasses = list(superclasses if superclasses is not None else load_superclasses())
    allowed = set(superclasses)
    table: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["raw_label", "superclass"]:
            raise MappingError(
                f"{path}: expected header 'raw_label,superclass', got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            raw = row["raw_label"].strip()
            target = row["superclass"].strip()
            if raw in table:
                raise MappingError(f"{path}:{lineno}: duplicate raw_label {raw!r}")
            if target not in allowed:
                raise MappingError(
                    f"{path}:{lineno}: superclass {target!r} is not in the "
                    "configured superclass set"
                )
            table[raw] = target
    return SuperclassMapping(table=table, superclasses=superclasses)


def read_prediction_log(path) -> Iterable[tuple[int, PredictionRecord]]:
    """Yield (lineno, record) pairs; malformed lines raise with their number."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PredictionLogError(f"{path}:{lineno}: malformed line: {exc}") from exc
            try:
                record = PredictionRecord(
                    stimulus_id=rec["stimulus_id"],
                    raw_label=str(rec["raw_label"]),
                    model_id=rec["model_id"],
                    raw_confidence=(
                        float(rec["raw_confidence"])
                        if rec.get("raw_confidence") is not None
                        else None
                    ),
                )
            except KeyError as exc:
                raise PredictionLogError(
                    f"{path}:{lineno}: missing field {exc.args[0]!r}"
                ) from exc
            if not record.model_id:
                raise PredictionLogError(f"{path}:{lineno}: empty model_id")
            yield lineno, record


def write_prediction_log(path, records: Iterable[PredictionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "stimulus_id": rec.stimulus_id,
                "raw_label": rec.raw_label,
                "model_id": rec.model_id,
            }
            if rec.raw_confidence is not None:
                obj["raw_confidence"] = rec.raw_confidence
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def ingest_predictions(
    log_path,
    manifest: StimulusManifest,
    mapping: SuperclassMapping,
    stats: IngestStats | None = None,
) -> list[CellAccuracy]:
    """Fold a prediction log into per-(band, sd) accuracy cells.

    Cells with zero records are absent from the output, not zero-accuracy.
    Unknown stimulus ids are collected and reported together.
    """
    index = manifest.entry_index()
    unknown: list[str] = []
    # last-write-wins on (stimulus_id, model_id)
    latest: dict[tuple[str, str], PredictionRecord] = {}
    n_dup = 0
    dup_ids = []
    for _, record in read_prediction_log(log_path):
        if record.stimulus_id not in index:
            unknown.append(record.stimulus_id)
            continue
        key = (record.stimulus_id, record.model_id)
        if key in latest:
            n_dup += 1
            dup_ids.append(record.stimulus_id)
        latest[key] = record
    if unknown:
        shown = ", ".join(sorted(set(unknown))[:10])
        raise PredictionLogError(
            f"{log_path}: {len(unknown)} records reference unknown stimulus ids: {shown}"
        )
    if stats is not None:
        stats.n_records = len(latest)
        stats.n_duplicates = n_dup
        stats.duplicate_ids = sorted(set(dup_ids))

    counts: dict[tuple[FrequencyBand | None, float], list[int]] = {}
    for (stimulus_id, _), record in latest.items():
        entry = index[stimulus_id]
        truth = manifest.sources[entry.source_id].true_superclass
        correct = mapping(record.raw_label) == truth
        cell = counts.setdefault((entry.band, entry.target_sd), [0, 0])
        cell[0] += 1
        cell[1] += int(correct)

    def sort_key(item):
        band, sd = item[0]
        center = band.center_freq if band is not None else 0.0
        return (center, sd)

    return [
        CellAccuracy(band=band, sd=sd, n_trials=n, n_correct=c)
        for (band, sd), (n, c) in sorted(counts.items(), key=sort_key)
    ]


CELL_CSV_HEADER = [
    "band_center",
    "band_width",
    "band_transition",
    "sd",
    "n_trials",
    "n_correct",
    "accuracy",
]


def write_cells_csv(path, cells: list[CellAccuracy]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CELL_CSV_HEADER)
        for cell in cells:
            if cell.band is None:
                band_cols = ["", "", ""]
            else:
                band_cols = [
                    repr(cell.band.center_freq),
                    repr(cell.band.width_octaves),
                    repr(cell.band.transition_octaves),
                ]
            writer.writerow(
                band_cols
                + [repr(cell.sd), cell.n_trials, cell.n_correct, repr(cell.accuracy)]
            )


def read_cells_csv(path) -> list[CellAccuracy]:
    cells = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CELL_CSV_HEADER:
            raise PredictionLogError(f"{path}: unexpected cells CSV header")
        for row in reader:
            band = None
            if row["band_center"]:
                band = FrequencyBand(
                    float(row["band_center"]),
                    float(row["band_width"]),
                    float(row["band_transition"]),
                )
            cells.append(
                CellAccuracy(
                    band=band,
                    sd=float(row["sd"]),
                    n_trials=int(row["n_trials"]),
                    n_correct=int(row["n_correct"]),
                )
            )
    return cells
