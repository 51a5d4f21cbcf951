"""Reader for the stimulus manifest format (JSON lines).

Line 1 is the header (grid config plus the source table with true labels);
every following line is either a stimulus entry or a generation-error
record.  Image paths are relative to the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

MANIFEST_KIND = "critband-manifest"


class ManifestFormatError(Exception):
    pass


@dataclass(frozen=True)
class Source:
    id: str
    path: str
    true_superclass: str
    dataset_tag: str = "in-distribution"


@dataclass(frozen=True)
class Entry:
    stimulus_id: str
    source_id: str
    band_center: float | None  # None marks the sd=0 baseline
    target_sd: float
    path: str  # relative to the manifest directory


@dataclass
class Manifest:
    root: Path
    image_size: int
    entries: list[Entry] = field(default_factory=list)
    sources: dict[str, Source] = field(default_factory=dict)

    def image_path(self, entry: Entry) -> Path:
        return self.root / entry.path

    def true_superclass(self, entry: Entry) -> str:
        return self.sources[entry.source_id].true_superclass


def read_manifest(path) -> Manifest:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ManifestFormatError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestFormatError(f"{path}:1: malformed header: {exc}") from exc
    if header.get("kind") != MANIFEST_KIND:
        raise ManifestFormatError(f"{path}: not a {MANIFEST_KIND} file")
    manifest = Manifest(root=path.parent, image_size=int(header["image_size"]))
    for sid, rec in header.get("sources", {}).items():
        manifest.sources[sid] = Source(
            id=sid,
            path=rec["path"],
            true_superclass=rec["true_superclass"],
            dataset_tag=rec.get("dataset_tag", "in-distribution"),
        )
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestFormatError(f"{path}:{lineno}: malformed line: {exc}") from exc
        if "error" in rec:
            continue  # generation-error records carry no stimulus
        band = rec.get("band")
        manifest.entries.append(
            Entry(
                stimulus_id=rec["stimulus_id"],
                source_id=rec["source_id"],
                band_center=float(band["center_freq"]) if band else None,
                target_sd=float(rec["target_sd"]),
                path=rec["path"],
            )
        )
    if not manifest.entries:
        raise ManifestFormatError(f"{path}: no stimulus entries")
    return manifest
