"""Pipeline orchestration: validated config, staged execution, run summary.

``run_pipeline`` wires the measurement stages over one output root:

    gen-stimuli -> [observer] -> ingest -> fit-thresholds -> fit-channel
    -> [report] -> [analyze]

The CLI never runs model inference; prediction logs either exist already
(``prediction_log``) or are fabricated by the synthetic-observer stage for
validation runs.  All referenced input paths are checked before anything is
written.  A lockfile serializes runs per output root, every stage's status
lands in ``run_summary.json``, and identical inputs produce identical
outputs (with timestamps suppressed, byte-identical ones).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bands import FrequencyBand, default_band_ladder
from .channel import ChannelFit, fit_channel
from .errors import ConfigError, CritbandError
from .metrics import ModelMetrics, read_metrics_csv, read_metrics_json, write_metrics_json
from .observer import SyntheticObserver, generate_observer_log
from .predictions import (
    IngestStats,
    ingest_predictions,
    load_mapping,
    read_cells_csv,
    write_cells_csv,
)
from .psychometric import (
    CHANCE_16,
    read_thresholds_csv,
    thresholds_for_all_bands,
    write_thresholds_csv,
)
from .report import emit_channel_figure, emit_report
from .resources import data_path
from .stimuli import (
    DEFAULT_SD_LADDER,
    generate_stimuli,
    load_corpus,
    read_manifest,
)

LOCKFILE = ".critband.lock"

DEFAULT_STAGES = ["gen-stimuli", "ingest", "fit-thresholds", "fit-channel"]
KNOWN_STAGES = [
    "gen-stimuli",
    "observer",
    "ingest",
    "fit-thresholds",
    "fit-channel",
    "report",
    "analyze",
]


@dataclass
class PipelineConfig:
    out_root: str
    corpus_dir: str | None = None
    labels_csv: str | None = None
    mapping_csv: str | None = None  # None -> bundled identity mapping
    prediction_log: str | None = None
    bands: list[FrequencyBand] = field(default_factory=lambda: default_band_ladder(224))
    sd_ladder: list[float] = field(default_factory=lambda: list(DEFAULT_SD_LADDER))
    seeds_per_cell: int = 1
    image_size: int = 224
    base_seed: int = 0
    workers: int = 1
    model_id: str = "model"
    threshold_criterion: float = 0.5
    chance_level: float = CHANCE_16
    channel_fit_target: str = "sensitivity"
    target_bandwidth: float = 1.0
    observer: SyntheticObserver | None = None
    analysis_metrics: str | None = None  # metrics JSON/CSV for the analyze stage
    stages: list[str] = field(default_factory=lambda: list(DEFAULT_STAGES))

    def to_dict(self) -> dict:
        return {
            "out_root": self.out_root,
            "corpus_dir": self.corpus_dir,
            "labels_csv": self.labels_csv,
            "mapping_csv": self.mapping_csv,
            "prediction_log": self.prediction_log,
            "bands": [b.to_dict() for b in self.bands],
            "sd_ladder": self.sd_ladder,
            "seeds_per_cell": self.seeds_per_cell,
            "image_size": self.image_size,
            "base_seed": self.base_seed,
            "workers": self.workers,
            "model_id": self.model_id,
            "threshold_criterion": self.threshold_criterion,
            "chance_level": self.chance_level,
            "channel_fit_target": self.channel_fit_target,
            "target_bandwidth": self.target_bandwidth,
            "observer": self.observer.to_dict() if self.observer else None,
            "analysis_metrics": self.analysis_metrics,
            "stages": self.stages,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {
            "out_root",
            "corpus_dir",
            "labels_csv",
            "mapping_csv",
            "prediction_log",
            "bands",
            "sd_ladder",
            "seeds_per_cell",
            "image_size",
            "base_seed",
            "workers",
            "model_id",
            "threshold_criterion",
            "chance_level",
            "channel_fit_target",
            "target_bandwidth",
            "observer",
            "analysis_metrics",
            "stages",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "out_root" not in d:
            raise ConfigError("config needs an out_root")
        kwargs = dict(d)
        if "bands" in kwargs:
            kwargs["bands"] = [FrequencyBand.from_dict(b) for b in kwargs["bands"]]
        if kwargs.get("observer"):
            kwargs["observer"] = SyntheticObserver.from_dict(kwargs["observer"])
        return cls(**kwargs)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_pipeline_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}") from exc
    return PipelineConfig.from_dict(raw)


def save_pipeline_config(config: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _mapping_path(config: PipelineConfig):
    return config.mapping_csv if config.mapping_csv else data_path("identity16.csv")


def validate_config(config: PipelineConfig) -> None:
    """Fail fast, before any output is written.  Errors name the path."""
    unknown = [s for s in config.stages if s not in KNOWN_STAGES]
    if unknown:
        raise ConfigError(f"unknown stages: {', '.join(unknown)}")
    stages = set(config.stages)
    required: list[tuple[str, str]] = []
    if "gen-stimuli" in stages:
        if not config.corpus_dir or not config.labels_csv:
            raise ConfigError("gen-stimuli stage needs corpus_dir and labels_csv")
        required += [("corpus_dir", config.corpus_dir), ("labels_csv", config.labels_csv)]
    if "ingest" in stages:
        required.append(("mapping_csv", str(_mapping_path(config))))
        needs_log = "observer" not in stages and config.observer is None
        if needs_log:
            if not config.prediction_log:
                raise ConfigError(
                    "ingest stage needs prediction_log (or a synthetic observer)"
                )
            required.append(("prediction_log", config.prediction_log))
    if "analyze" in stages:
        if not config.analysis_metrics:
            raise ConfigError("analyze stage needs analysis_metrics")
        required.append(("analysis_metrics", config.analysis_metrics))
    for name, value in required:
        if not Path(str(value)).exists():
            raise ConfigError(f"{name} path does not exist: {value}")


@dataclass
class StageStatus:
    name: str
    status: str  # ok | error | skipped
    detail: str = ""


@dataclass
class RunResult:
    out_root: Path
    stages: list[StageStatus]
    channel: ChannelFit | None = None

    def ok(self) -> bool:
        return all(s.status == "ok" for s in self.stages)


def run_pipeline(
    config: PipelineConfig,
    no_timestamp: bool = False,
    quiet: bool = False,
) -> RunResult:
    """Execute the configured stages under the output root."""
    validate_config(config)
    out_root = Path(config.out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    lock = out_root / LOCKFILE

    def log(message):
        if not quiet:
            print(message)

    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output root is locked by another run: {lock} (remove it if stale)"
        ) from None
    with os.fdopen(fd, "w") as fh:
        fh.write(str(os.getpid()))

    result = RunResult(out_root=out_root, stages=[])
    state: dict = {}
    try:
        for stage in config.stages:
            log(f"[critband] stage {stage}")
            try:
                _run_stage(stage, config, out_root, state, no_timestamp)
            except CritbandError as exc:
                result.stages.append(StageStatus(stage, "error", str(exc)))
                _write_summary(config, out_root, result, no_timestamp)
                raise
            result.stages.append(StageStatus(stage, "ok"))
        result.channel = state.get("channel")
        _write_summary(config, out_root, result, no_timestamp)
    finally:
        lock.unlink(missing_ok=True)
    return result


def _run_stage(stage, config, out_root, state, no_timestamp):
    if stage == "gen-stimuli":
        corpus = load_corpus(config.corpus_dir, config.labels_csv)
        state["manifest"] = generate_stimuli(
            corpus,
            config.bands,
            config.sd_ladder,
            config.seeds_per_cell,
            config.image_size,
            out_root / "stimuli",
            base_seed=config.base_seed,
            workers=config.workers,
        )
    elif stage == "observer":
        manifest = state.get("manifest") or read_manifest(out_root / "stimuli" / "manifest.jsonl")
        state["manifest"] = manifest
        observer = config.observer or SyntheticObserver(model_id=config.model_id)
        generate_observer_log(manifest, observer, out_root / "predictions.jsonl")
        state["log"] = out_root / "predictions.jsonl"
    elif stage == "ingest":
        manifest = state.get("manifest") or read_manifest(out_root / "stimuli" / "manifest.jsonl")
        state["manifest"] = manifest
        if config.observer is not None and "log" not in state:
            generate_observer_log(
                manifest, config.observer, out_root / "predictions.jsonl"
            )
            state["log"] = out_root / "predictions.jsonl"
        log_path = state.get("log") or config.prediction_log
        mapping = load_mapping(_mapping_path(config))
        stats = IngestStats()
        cells = ingest_predictions(log_path, manifest, mapping, stats=stats)
        if stats.n_duplicates:
            print(
                f"[critband] warning: {stats.n_duplicates} duplicate predictions "
                "resolved last-write-wins"
            )
        write_cells_csv(out_root / "cells.csv", cells)
        state["cells"] = cells
    elif stage == "fit-thresholds":
        cells = state.get("cells") or read_cells_csv(out_root / "cells.csv")
        sd_ladder = sorted({c.sd for c in cells} | set(config.sd_ladder))
        points, fits = thresholds_for_all_bands(
            cells,
            sd_ladder,
            criterion=config.threshold_criterion,
            chance_level=config.chance_level,
        )
        write_thresholds_csv(out_root / "thresholds.csv", points, fits)
        state["thresholds"] = points
    elif stage == "fit-channel":
        points = state.get("thresholds") or read_thresholds_csv(out_root / "thresholds.csv")
        channel = fit_channel(points, fit_target=config.channel_fit_target)
        with open(out_root / "channel.json", "w", encoding="utf-8") as fh:
            json.dump(channel.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        emit_channel_figure(
            points, channel, out_root / "channel.svg", timestamp=not no_timestamp
        )
        state["channel"] = channel
    elif stage == "report":
        channel = state.get("channel")
        if channel is None:
            with open(out_root / "channel.json", encoding="utf-8") as fh:
                channel = ChannelFit.from_dict(json.load(fh))
        metrics = [
            ModelMetrics(
                model_id=config.model_id
                if config.observer is None
                else config.observer.model_id,
                bandwidth_octaves=channel.bandwidth_octaves,
            )
        ]
        write_metrics_json(out_root / "metrics.json", metrics)
        emit_report(
            metrics,
            out_root / "report",
            target_bw=config.target_bandwidth,
            timestamp=not no_timestamp,
        )
    elif stage == "analyze":
        path = Path(config.analysis_metrics)
        metrics = (
            read_metrics_csv(path) if path.suffix == ".csv" else read_metrics_json(path)
        )
        emit_report(
            metrics,
            out_root / "analysis",
            target_bw=config.target_bandwidth,
            timestamp=not no_timestamp,
        )
    else:  # pragma: no cover - guarded by validate_config
        raise ConfigError(f"unknown stage {stage}")


def _write_summary(config, out_root, result, no_timestamp):
    summary = {
        "config_hash": config.config_hash(),
        "critband_version": __version__,
        "numpy_version": np.__version__,
        "stages": [
            {"name": s.name, "status": s.status, "detail": s.detail}
            for s in result.stages
        ],
    }
    if not no_timestamp:
        from datetime import datetime, timezone

        summary["completed_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(out_root / "run_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
