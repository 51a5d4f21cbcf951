import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

SUPERCLASSES = [
    "airplane", "bear", "bicycle", "bird", "boat", "bottle", "car", "cat",
    "chair", "clock", "dog", "elephant", "keyboard", "knife", "oven", "truck",
]


def run_tool(module, *argv):
    """Invoke a console entry point through its module (PATH-independent)."""
    proc = subprocess.run(
        [sys.executable, "-m", module, *[str(a) for a in argv]],
        capture_output=True,
        text=True,
    )
    return proc


@pytest.fixture
def make_corpus(tmp_path):
    def build(n_images=2, size=64):
        corpus = tmp_path / "corpus"
        corpus.mkdir(exist_ok=True)
        rng = np.random.default_rng(7)
        rows = ["id,path,true_superclass"]
        for i in range(n_images):
            arr = rng.integers(30, 226, size=(size, size, 3), dtype=np.uint8)
            Image.fromarray(arr, "RGB").save(corpus / f"img{i:03d}.png")
            rows.append(f"img{i:03d},img{i:03d}.png,{SUPERCLASSES[i % 16]}")
        labels = tmp_path / "labels.csv"
        labels.write_text("\n".join(rows) + "\n", encoding="utf-8")
        return corpus, labels

    return build


@pytest.fixture
def make_manifest(tmp_path, make_corpus):
    """Generate stimuli with the primary toolkit's CLI; returns manifest path."""

    def build(n_images=2, size=64, centers=(2, 4, 8), sd_ladder=(0.0, 0.05, 0.1, 0.2)):
        corpus, labels = make_corpus(n_images=n_images, size=size)
        grid = {
            "bands": [
                {"center_freq": float(c), "width_octaves": 1.0, "transition_octaves": 0.25}
                for c in centers
            ],
            "sd_ladder": list(sd_ladder),
            "seeds_per_cell": 1,
            "image_size": size,
        }
        grid_path = tmp_path / "grid.json"
        grid_path.write_text(json.dumps(grid), encoding="utf-8")
        out = tmp_path / "stimuli"
        proc = run_tool(
            "critband.cli", "gen-stimuli", "--corpus", corpus, "--labels", labels,
            "--config", grid_path, "--out", out, "--quiet",
        )
        assert proc.returncode == 0, proc.stderr
        return out / "manifest.jsonl"

    return build
