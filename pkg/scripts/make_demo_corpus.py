#!/usr/bin/env python3
"""Write a small synthetic corpus (images + labels CSV) for demo runs.

The images are structured noise with per-class geometry so they are at
least visually distinct; any labeled RGB images work the same way.
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image

from critband.resources import load_superclasses


def make_image(rng, size, class_index):
    yy, xx = np.mgrid[0:size, 0:size] / size
    angle = class_index * np.pi / 8
    pattern = 0.5 + 0.25 * np.sin(
        2 * np.pi * (np.cos(angle) * xx + np.sin(angle) * yy) * (2 + class_index % 5)
    )
    noise = rng.normal(0, 0.08, (size, size, 3))
    rgb = np.clip(pattern[:, :, None] + noise, 0, 1)
    return (rgb * 255).round().astype(np.uint8)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="corpus directory to create")
    parser.add_argument("--n", type=int, default=16, help="number of images")
    parser.add_argument("--size", type=int, default=224)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    superclasses = load_superclasses()
    rows = ["id,path,true_superclass,dataset_tag"]
    for i in range(args.n):
        label_index = i % len(superclasses)
        name = f"demo{i:03d}.png"
        Image.fromarray(make_image(rng, args.size, label_index), "RGB").save(out / name)
        rows.append(f"demo{i:03d},{name},{superclasses[label_index]},in-distribution")
    labels = out / "labels.csv"
    labels.write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote {args.n} images and {labels}")


if __name__ == "__main__":
    main()
