"""The adapter loop: manifest in, prediction log out.

Exactly one record per manifest entry, written append-only in manifest
order; stimuli that fail to decode are skipped and listed in the sidecar
error file ``<log>.errors`` (always written, possibly empty), so

    log line count == manifest entry count - sidecar line count

holds by construction.  With a deterministic runner, re-running an
identical config reproduces the log byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .manifest import Manifest, read_manifest
from .runners import MODES, RunnerError, build_runner


@dataclass
class AdapterConfig:
    manifest: str
    model: str  # builtin:mean-pixel | builtin:oracle | torchvision:<arch> | clip:<hub-id>
    mode: str  # top1_imagenet1k | superclass_direct | zero_shot_text
    out: str
    batch_size: int = 32
    device: str = "cpu"
    model_preprocess: bool = False  # False: trust manifest pixels, normalize only
    weights: str | None = None  # torchvision weight-enum name (needs hub access)
    weights_path: str | None = None  # local state dict
    seed: int = 0
    oracle: dict | None = None  # OracleChannel overrides for builtin:oracle

    def __post_init__(self):
        if self.mode not in MODES:
            raise RunnerError(f"unknown mode {self.mode!r} (expected one of {MODES})")
        if self.batch_size < 1:
            raise RunnerError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class AdapterResult:
    n_records: int
    failures: list[tuple[str, str]] = field(default_factory=list)


def _decode(path, image_size: int) -> np.ndarray:
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        if rgb.size != (image_size, image_size):
            raise ValueError(
                f"stimulus is {rgb.size[0]}x{rgb.size[1]}, manifest says {image_size}"
            )
        return np.asarray(rgb, dtype=float) / 255.0


def run_adapter(config: AdapterConfig, quiet: bool = True) -> AdapterResult:
    manifest: Manifest = read_manifest(config.manifest)
    runner = build_runner(config, manifest)
    out_path = Path(config.out)
    sidecar_path = Path(str(out_path) + ".errors")
    result = AdapterResult(n_records=0)

    with open(out_path, "w", encoding="utf-8") as log:
        batch_entries, batch_images = [], []

        def flush():
            if not batch_entries:
                return
            labels = runner.predict(batch_entries, batch_images)
            for entry, label in zip(batch_entries, labels):
                log.write(
                    json.dumps(
                        {
                            "stimulus_id": entry.stimulus_id,
                            "raw_label": label,
                            "model_id": config.model,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
            result.n_records += len(batch_entries)
            batch_entries.clear()
            batch_images.clear()

        for entry in manifest.entries:
            image = None
            if runner.needs_pixels:
                try:
                    image = _decode(manifest.image_path(entry), manifest.image_size)
                except (OSError, ValueError) as exc:
                    result.failures.append((entry.stimulus_id, str(exc)))
                    continue
            batch_entries.append(entry)
            batch_images.append(image)
            if len(batch_entries) >= config.batch_size:
                flush()
        flush()

    with open(sidecar_path, "w", encoding="utf-8") as sidecar:
        for stimulus_id, message in result.failures:
            sidecar.write(json.dumps({"stimulus_id": stimulus_id, "error": message}) + "\n")

    if not quiet:
        print(
            f"{config.model}: {result.n_records} records, "
            f"{len(result.failures)} failures -> {out_path}"
        )
    return result
