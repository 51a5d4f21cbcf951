"""Stimulus grid generation and the manifest that records it.

A source corpus is expanded into the full (band x SD x seed) grid of
noise-perturbed images: one PNG per grid cell with sd > 0, plus one shared
unperturbed baseline per source at sd = 0.  The JSON-lines manifest binds
every stimulus to its provenance (source, band, target SD, seed, clipped
pixel fraction) and carries the grid configuration and source labels in its
header line, so downstream stages never need the corpus again.

Determinism: the noise seed of every cell is derived by hashing
(base_seed, source_id, band, sd, seed_index), so outputs depend only on the
inputs, never on worker scheduling, and two runs with identical
configuration produce byte-identical manifests and images.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .bands import FrequencyBand, NoiseSpec, apply_noise, synthesize_noise
from .errors import ConfigError, ManifestError
from .resources import load_superclasses

MANIFEST_KIND = "critband-manifest"
MANIFEST_VERSION = 1
RESIZE_POLICY = "shorter-side-bilinear-center-crop"

DEFAULT_SD_LADDER = [0.0, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64]


@dataclass(frozen=True)
class SourceImage:
    id: str
    path: str
    true_superclass: str
    dataset_tag: str = "in-distribution"


@dataclass(frozen=True)
class ManifestEntry:
    stimulus_id: str
    source_id: str
    band: FrequencyBand | None  # None marks the shared sd=0 baseline
    target_sd: float
    seed: int
    path: str
    clipped_fraction: float


@dataclass(frozen=True)
class GenerationError:
    source_id: str
    error: str
    skipped_entries: int


@dataclass
class StimulusManifest:
    image_size: int
    bands: list[FrequencyBand]
    sd_ladder: list[float]
    seeds_per_cell: int
    base_seed: int
    sources: dict[str, SourceImage]
    entries: list[ManifestEntry] = field(default_factory=list)
    errors: list[GenerationError] = field(default_factory=list)

    def true_superclass(self, stimulus_id: str) -> str:
        entry = self.entry_index().get(stimulus_id)
        if entry is None:
            raise ManifestError(f"unknown stimulus_id {stimulus_id!r}")
        return self.sources[entry.source_id].true_superclass

    def entry_index(self) -> dict[str, ManifestEntry]:
        if not hasattr(self, "_index"):
            self._index = {e.stimulus_id: e for e in self.entries}
        return self._index


def load_corpus(corpus_dir, labels_csv, superclasses=None) -> list[SourceImage]:
    """Read the labels CSV (id,path,true_superclass[,dataset_tag]).

    Paths are taken relative to ``corpus_dir``.  Labels must belong to the
    configured superclass set.
    """
    superclasses = set(superclasses if superclasses is not None else load_superclasses())
    corpus_dir = Path(corpus_dir)
    sources: list[SourceImage] = []
    seen: set[str] = set()
    with open(labels_csv, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "path", "true_superclass"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ConfigError(
                f"{labels_csv}: labels CSV needs columns id,path,true_superclass"
            )
        for row in reader:
            sid = row["id"].strip()
            if sid in seen:
                raise ConfigError(f"{labels_csv}: duplicate source id {sid!r}")
            seen.add(sid)
            label = row["true_superclass"].strip()
            if label not in superclasses:
                raise ConfigError(
                    f"{labels_csv}: true_superclass {label!r} for {sid!r} is not "
                    "in the configured superclass set"
                )
            sources.append(
                SourceImage(
                    id=sid,
                    path=str(corpus_dir / row["path"].strip()),
                    true_superclass=label,
                    dataset_tag=(row.get("dataset_tag") or "in-distribution").strip(),
                )
            )
    if not sources:
        raise ConfigError(f"{labels_csv}: empty corpus")
    return sources


def load_image_unit(path, image_size: int) -> np.ndarray:
    """Decode an image to RGB floats in [0, 1] at image_size x image_size.

    Shorter side is resized to image_size with bilinear interpolation, then
    the center square is cropped.
    """
    with Image.open(path) as img:
        img = img.convert("RGB")
        w, h = img.size
        scale = image_size / min(w, h)
        new_w, new_h = max(round(w * scale), image_size), max(round(h * scale), image_size)
        img = img.resize((new_w, new_h), Image.BILINEAR)
        left = (new_w - image_size) // 2
        top = (new_h - image_size) // 2
        img = img.crop((left, top, left + image_size, top + image_size))
        return np.asarray(img, dtype=float) / 255.0


def cell_seed(base_seed: int, source_id: str, band: FrequencyBand, sd: float, seed_index: int) -> int:
    """Stable 64-bit seed for one grid cell, independent of scheduling."""
    key = "|".join(
        [
            str(int(base_seed)),
            source_id,
            repr(band.center_freq),
            repr(band.width_octaves),
            repr(band.transition_octaves),
            repr(float(sd)),
            str(int(seed_index)),
        ]
    )
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _stimulus_id(source_id: str, band: FrequencyBand | None, sd: float, seed_index: int) -> str:
    if band is None:
        return f"{source_id}__sd0"
    return (
        f"{source_id}__c{band.center_freq:g}w{band.width_octaves:g}"
        f"t{band.transition_octaves:g}_sd{sd:g}_s{seed_index}"
    )


def _quantize(image_unit: np.ndarray) -> np.ndarray:
    return np.clip(np.round(image_unit * 255.0), 0, 255).astype(np.uint8)


def generate_stimuli(
    corpus: list[SourceImage],
    bands: list[FrequencyBand],
    sd_ladder: list[float],
    seeds_per_cell: int,
    image_size: int,
    out_dir,
    base_seed: int = 0,
    workers: int = 1,
) -> StimulusManifest:
    """Expand the corpus into the full stimulus grid and write the manifest.

    Returns the manifest (also written to ``out_dir/manifest.jsonl``).
    Unreadable source images are recorded as per-source error records and
    skipped; a corpus with zero decodable images is fatal.
    """
    if not corpus:
        raise ConfigError("corpus is empty")
    if seeds_per_cell < 1:
        raise ConfigError(f"seeds_per_cell must be >= 1, got {seeds_per_cell}")
    if sorted(sd_ladder) != list(sd_ladder):
        raise ConfigError("sd_ladder must be sorted ascending")
    if 0.0 not in sd_ladder:
        raise ConfigError("sd_ladder must contain 0 (the unperturbed baseline row)")
    if len(set(sd_ladder)) != len(sd_ladder):
        raise ConfigError("sd_ladder contains duplicate values")

    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    nonzero_sds = [sd for sd in sd_ladder if sd > 0]

    manifest = StimulusManifest(
        image_size=image_size,
        bands=list(bands),
        sd_ladder=list(sd_ladder),
        seeds_per_cell=seeds_per_cell,
        base_seed=base_seed,
        sources={},
    )

    decoded: list[tuple[SourceImage, np.ndarray]] = []
    per_source_entries = len(bands) * len(nonzero_sds) * seeds_per_cell + 1
    for src in corpus:
        try:
            decoded.append((src, load_image_unit(src.path, image_size)))
        except (OSError, ValueError) as exc:
            manifest.errors.append(
                GenerationError(src.id, f"unreadable image: {exc}", per_source_entries)
            )
    if not decoded:
        raise ManifestError("no decodable images in corpus")

    def make_baseline(item):
        src, image = item
        sid = _stimulus_id(src.id, None, 0.0, 0)
        rel = f"images/{sid}.png"
        Image.fromarray(_quantize(image), "RGB").save(out_dir / rel)
        return ManifestEntry(sid, src.id, None, 0.0, 0, rel, 0.0)

    def make_cell(task):
        src, image, band, sd, k = task
        seed = cell_seed(base_seed, src.id, band, sd, k)
        fld = synthesize_noise(NoiseSpec(band, sd, seed), image_size, image_size)
        noisy = apply_noise(image, fld)
        raw = image + fld.values[:, :, np.newaxis]
        clipped = float(np.mean((raw < 0.0) | (raw > 1.0)))
        sid = _stimulus_id(src.id, band, sd, k)
        rel = f"images/{sid}.png"
        Image.fromarray(_quantize(noisy), "RGB").save(out_dir / rel)
        return ManifestEntry(sid, src.id, band, sd, seed, rel, clipped)

    tasks = [
        (src, image, band, sd, k)
        for src, image in decoded
        for band in bands
        for sd in nonzero_sds
        for k in range(seeds_per_cell)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            baselines = list(pool.map(make_baseline, decoded))
            cells = list(pool.map(make_cell, tasks))
    else:
        baselines = [make_baseline(item) for item in decoded]
        cells = [make_cell(t) for t in tasks]

    manifest.sources = {src.id: src for src, _ in decoded}
    manifest.entries = baselines + cells
    validate_manifest(manifest)
    write_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def validate_manifest(manifest: StimulusManifest) -> None:
    """Check uniqueness and full grid coverage."""
    ids = [e.stimulus_id for e in manifest.entries]
    if len(set(ids)) != len(ids):
        raise ManifestError("duplicate stimulus_id in manifest")
    nonzero = [sd for sd in manifest.sd_ladder if sd > 0]
    expected = len(manifest.sources) * (
        len(manifest.bands) * len(nonzero) * manifest.seeds_per_cell + 1
    )
    if len(manifest.entries) != expected:
        raise ManifestError(
            f"manifest holds {len(manifest.entries)} entries, expected {expected} "
            "for full grid coverage"
        )
    cells = {(e.source_id, e.band, e.target_sd) for e in manifest.entries}
    expected_cells = len(manifest.sources) * (len(manifest.bands) * len(nonzero) + 1)
    if len(cells) != expected_cells:
        raise ManifestError("manifest does not cover every (source, band, sd) cell")


def write_manifest(manifest: StimulusManifest, path) -> None:
    header = {
        "kind": MANIFEST_KIND,
        "version": MANIFEST_VERSION,
        "image_size": manifest.image_size,
        "resize_policy": RESIZE_POLICY,
        "bands": [b.to_dict() for b in manifest.bands],
        "sd_ladder": manifest.sd_ladder,
        "seeds_per_cell": manifest.seeds_per_cell,
        "base_seed": manifest.base_seed,
        "sources": {
            sid: {
                "path": src.path,
                "true_superclass": src.true_superclass,
                "dataset_tag": src.dataset_tag,
            }
            for sid, src in sorted(manifest.sources.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for err in manifest.errors:
            fh.write(
                json.dumps(
                    {
                        "source_id": err.source_id,
                        "error": err.error,
                        "skipped_entries": err.skipped_entries,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        for e in manifest.entries:
            fh.write(
                json.dumps(
                    {
                        "stimulus_id": e.stimulus_id,
                        "source_id": e.source_id,
                        "band": e.band.to_dict() if e.band is not None else None,
                        "target_sd": e.target_sd,
                        "seed": e.seed,
                        "path": e.path,
                        "clipped_fraction": e.clipped_fraction,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_manifest(path) -> StimulusManifest:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ManifestError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:1: malformed header: {exc}") from exc
    if header.get("kind") != MANIFEST_KIND:
        raise ManifestError(f"{path}: not a {MANIFEST_KIND} file")
    manifest = StimulusManifest(
        image_size=int(header["image_size"]),
        bands=[FrequencyBand.from_dict(b) for b in header["bands"]],
        sd_ladder=[float(s) for s in header["sd_ladder"]],
        seeds_per_cell=int(header["seeds_per_cell"]),
        base_seed=int(header.get("base_seed", 0)),
        sources={
            sid: SourceImage(
                id=sid,
                path=rec["path"],
                true_superclass=rec["true_superclass"],
                dataset_tag=rec.get("dataset_tag", "in-distribution"),
            )
            for sid, rec in header["sources"].items()
        },
    )
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: malformed line: {exc}") from exc
        if "error" in rec:
            manifest.errors.append(
                GenerationError(
                    rec.get("source_id", "?"), rec["error"], rec.get("skipped_entries", 0)
                )
            )
            continue
        manifest.entries.append(
            ManifestEntry(
                stimulus_id=rec["stimulus_id"],
                source_id=rec["source_id"],
                band=FrequencyBand.from_dict(rec["band"]) if rec["band"] else None,
                target_sd=float(rec["target_sd"]),
                seed=int(rec["seed"]),
                path=rec["path"],
                clipped_fraction=float(rec["clipped_fraction"]),
            )
        )
    return manifest
