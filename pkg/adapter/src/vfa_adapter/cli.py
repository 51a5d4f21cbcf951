"""vfa-adapter: evaluate a classifier over a stimulus manifest.

Writes the JSON-lines prediction-record format consumed by the toolkit's
``ingest`` stage, plus a ``<log>.errors`` sidecar listing skipped stimuli.
Exit codes: 0 success, 2 bad configuration or model, 3 unreadable data.
"""

from __future__ import annotations

import argparse
import json
import sys

from .manifest import ManifestFormatError
from .run import AdapterConfig, run_adapter
from .runners import MODES, RunnerError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vfa-adapter", description=__doc__)
    parser.add_argument("--manifest", required=True, help="stimulus manifest JSONL")
    parser.add_argument(
        "--model",
        required=True,
        help="builtin:mean-pixel | builtin:oracle | torchvision:<arch> | clip:<hub-id>",
    )
    parser.add_argument("--mode", required=True, choices=MODES)
    parser.add_argument("--out", required=True, help="output prediction log")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--model-preprocess",
        action="store_true",
        help="apply the model's full preprocessing instead of trusting manifest pixels",
    )
    parser.add_argument("--weights", help="torchvision weight-enum name (hub access)")
    parser.add_argument("--weights-path", help="local state-dict file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--oracle-config",
        help="JSON file overriding the planted channel (builtin:oracle only)",
    )
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    oracle = None
    if args.oracle_config:
        try:
            with open(args.oracle_config, encoding="utf-8") as fh:
                oracle = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: oracle config: {exc}", file=sys.stderr)
            return 2
    try:
        config = AdapterConfig(
            manifest=args.manifest,
            model=args.model,
            mode=args.mode,
            out=args.out,
            batch_size=args.batch_size,
            device=args.device,
            model_preprocess=args.model_preprocess,
            weights=args.weights,
            weights_path=args.weights_path,
            seed=args.seed,
            oracle=oracle,
        )
        result = run_adapter(config, quiet=args.quiet)
    except (RunnerError, ValueError) as exc:
        print(f"error: model {args.model}: {exc}", file=sys.stderr)
        return 2
    except ManifestFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        print(f"wrote {result.n_records} records ({len(result.failures)} skipped)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
