"""Command-line entry point.

Subcommands follow the pipeline stages: ``gen-stimuli``, ``ingest``,
``fit-thresholds``, ``fit-channel``, ``metrics``, ``analyze``, ``report``,
and the composite ``run``.  Exit codes: 0 success, 2 configuration error,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bands import FrequencyBand, default_band_ladder
from .channel import ChannelFit, fit_channel
from .errors import ConfigError, CritbandError, EXIT_DATA
from .metrics import (
    ModelMetrics,
    load_metrics_any,
    read_cueconflict_truth_csv,
    read_ood_truth_csv,
    score_cueconflict,
    score_ood_directory,
    write_metrics_json,
)
from .pipeline import (
    PipelineConfig,
    load_pipeline_config,
    run_pipeline,
)
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
from .report import (
    ReportSummary,
    emit_channel_figure,
    emit_correlation_figures,
    emit_group_figure,
    emit_report,
    emit_scaling_figure,
)
from .stimuli import (
    DEFAULT_SD_LADDER,
    generate_stimuli,
    load_corpus,
    read_manifest,
)


def _add_common(parser):
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    parser.add_argument(
        "--no-timestamp",
        action="store_true",
        help="omit timestamps from emitted files (byte-reproducible outputs)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critband",
        description="Critical band masking toolkit for image classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-stimuli", help="expand a corpus into the noise-stimulus grid")
    p.add_argument("--corpus", required=True, help="directory of source images")
    p.add_argument("--labels", required=True, help="CSV: id,path,true_superclass[,dataset_tag]")
    p.add_argument("--config", help="grid config JSON (bands, sd_ladder, seeds_per_cell, image_size)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="base seed for per-cell noise seeds")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_gen_stimuli)

    p = sub.add_parser("ingest", help="fold a prediction log into per-(band, SD) accuracies")
    p.add_argument("--log", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--out", required=True, help="output cells CSV")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit-thresholds", help="estimate the 50%% noise threshold per band")
    p.add_argument("--cells", required=True)
    p.add_argument("--out", required=True, help="output thresholds CSV")
    p.add_argument("--criterion", type=float, default=0.5, help="accuracy criterion")
    p.add_argument("--chance", type=float, default=CHANCE_16, help="lower asymptote")
    _add_common(p)
    p.set_defaults(func=cmd_fit_thresholds)

    p = sub.add_parser("fit-channel", help="fit the Gaussian channel and derive bandwidth")
    p.add_argument("--thresholds", required=True)
    p.add_argument("--out", required=True, help="output channel JSON")
    p.add_argument("--svg", help="optional channel figure (SVG + CSV sidecar)")
    p.add_argument(
        "--fit-target",
        choices=["sensitivity", "log_sensitivity"],
        default="sensitivity",
    )
    _add_common(p)
    p.set_defaults(func=cmd_fit_channel)

    p = sub.add_parser("metrics", help="compute OOD accuracy and shape bias from logs")
    p.add_argument("--ood", help="directory of per-dataset prediction logs (<tag>.jsonl)")
    p.add_argument("--ood-truth", help="CSV: stimulus_id,dataset_tag,true_superclass")
    p.add_argument("--cueconflict", help="cue-conflict prediction log")
    p.add_argument("--cc-truth", help="CSV: stimulus_id,shape_label,texture_label")
    p.add_argument("--mapping", required=True)
    p.add_argument("--out", required=True, help="output metrics JSON")
    p.add_argument("--model-id", default=None)
    p.add_argument("--channel", help="channel JSON providing bandwidth_octaves")
    p.add_argument("--model-meta", help="JSON with param_count and training tags")
    p.add_argument("--partial", action="store_true", help="allow missing OOD datasets")
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("analyze", help="cross-model regression, group test, correlations")
    p.add_argument("--metrics", required=True, help="metrics JSON/CSV file or directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--target-bw", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="emit the metric table and all figures")
    p.add_argument("--metrics", required=True, help="metrics JSON/CSV file or directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--target-bw", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run the configured pipeline stages")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out", help="override out_root from the config")
    p.add_argument("--seed", type=int, help="override base_seed from the config")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    return parser


def _load_grid_config(path) -> dict:
    defaults = {
        "bands": [b.to_dict() for b in default_band_ladder(224)],
        "sd_ladder": list(DEFAULT_SD_LADDER),
        "seeds_per_cell": 1,
        "image_size": 224,
    }
    if path is None:
        return defaults
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}") from exc
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ConfigError(f"{path}: unknown grid config keys: {', '.join(sorted(unknown))}")
    defaults.update(raw)
    return defaults


def cmd_gen_stimuli(args) -> int:
    grid = _load_grid_config(args.config)
    corpus = load_corpus(args.corpus, args.labels)
    bands = [FrequencyBand.from_dict(b) for b in grid["bands"]]
    manifest = generate_stimuli(
        corpus,
        bands,
        [float(s) for s in grid["sd_ladder"]],
        int(grid["seeds_per_cell"]),
        int(grid["image_size"]),
        args.out,
        base_seed=args.seed,
        workers=args.workers,
    )
    if not args.quiet:
        print(
            f"wrote {len(manifest.entries)} stimuli "
            f"({len(manifest.errors)} unreadable sources) to {args.out}"
        )
    return 0


def cmd_ingest(args) -> int:
    manifest = read_manifest(args.manifest)
    mapping = load_mapping(args.mapping)
    stats = IngestStats()
    cells = ingest_predictions(args.log, manifest, mapping, stats=stats)
    write_cells_csv(args.out, cells)
    if stats.n_duplicates and not args.quiet:
        print(f"warning: {stats.n_duplicates} duplicate predictions (last write wins)")
    if not args.quiet:
        print(f"wrote {len(cells)} cells ({stats.n_records} records) to {args.out}")
    return 0


def cmd_fit_thresholds(args) -> int:
    cells = read_cells_csv(args.cells)
    sd_ladder = sorted({c.sd for c in cells})
    points, fits = thresholds_for_all_bands(
        cells, sd_ladder, criterion=args.criterion, chance_level=args.chance
    )
    write_thresholds_csv(args.out, points, fits)
    if not args.quiet:
        measured = sum(1 for p in points if p.threshold_sd is not None)
        print(f"wrote {len(points)} bands ({measured} measured) to {args.out}")
    return 0


def cmd_fit_channel(args) -> int:
    points = read_thresholds_csv(args.thresholds)
    channel = fit_channel(points, fit_target=args.fit_target)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(channel.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.svg:
        emit_channel_figure(points, channel, args.svg, timestamp=not args.no_timestamp)
    if not args.quiet:
        print(
            f"bandwidth {channel.bandwidth_octaves:.4f} octaves "
            f"(peak {channel.peak_log2_freq:.3f}, n={channel.n_points}) -> {args.out}"
        )
    return 0


def cmd_metrics(args) -> int:
    mapping = load_mapping(args.mapping)
    ood_value = None
    shape_value = None
    model_id = args.model_id
    if args.ood:
        if not args.ood_truth:
            raise ConfigError("--ood needs --ood-truth")
        truth = read_ood_truth_csv(args.ood_truth)
        per_dataset, ood_value = score_ood_directory(
            args.ood, truth, mapping, partial=args.partial
        )
        if not args.quiet:
            for d in per_dataset:
                print(f"  {d.dataset_tag}: {d.accuracy:.4f} (n={d.n_trials})")
    if args.cueconflict:
        if not args.cc_truth:
            raise ConfigError("--cueconflict needs --cc-truth")
        cc_truth = read_cueconflict_truth_csv(args.cc_truth)
        _, shape_value = score_cueconflict(args.cueconflict, cc_truth, mapping)
    bandwidth = None
    if args.channel:
        with open(args.channel, encoding="utf-8") as fh:
            bandwidth = ChannelFit.from_dict(json.load(fh)).bandwidth_octaves
    meta = {}
    if args.model_meta:
        with open(args.model_meta, encoding="utf-8") as fh:
            meta = json.load(fh)
    metrics = ModelMetrics(
        model_id=model_id or meta.get("model_id", "model"),
        bandwidth_octaves=bandwidth,
        ood_accuracy=ood_value,
        shape_bias=shape_value,
        param_count=meta.get("param_count"),
        zero_shot=meta.get("zero_shot"),
        clip_supervised=meta.get("clip_supervised"),
        in1k=meta.get("in1k"),
        trained_in22k=meta.get("trained_in22k"),
        group=meta.get("group"),
    )
    write_metrics_json(args.out, [metrics])
    if not args.quiet:
        print(
            f"{metrics.model_id}: BW={_maybe(metrics.bandwidth_octaves)} "
            f"OOD={_maybe(metrics.ood_accuracy)} ShapeBias={_maybe(metrics.shape_bias)}"
        )
    return 0


def _maybe(value):
    return "n/a" if value is None else f"{value:.4f}"


def cmd_analyze(args) -> int:
    metrics = load_metrics_any(args.metrics)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = ReportSummary()
    emit_scaling_figure(
        metrics, out_dir, summary, target_bw=args.target_bw, timestamp=not args.no_timestamp
    )
    emit_group_figure(metrics, out_dir, summary, timestamp=not args.no_timestamp)
    emit_correlation_figures(metrics, out_dir, summary, timestamp=not args.no_timestamp)
    with open(out_dir / "report_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not args.quiet:
        print(f"figures: {', '.join(summary.figures) or 'none'}")
        for name, reason in summary.skipped.items():
            print(f"skipped {name}: {reason}")
    return 0


def cmd_report(args) -> int:
    metrics = load_metrics_any(args.metrics)
    summary = emit_report(
        metrics, args.out, target_bw=args.target_bw, timestamp=not args.no_timestamp
    )
    if not args.quiet:
        print(f"report for {len(metrics)} models -> {args.out}")
        for name, reason in summary.skipped.items():
            print(f"skipped {name}: {reason}")
    return 0


def cmd_run(args) -> int:
    config = load_pipeline_config(args.config)
    if args.out:
        config.out_root = args.out
    if args.seed is not None:
        config.base_seed = args.seed
    result = run_pipeline(config, no_timestamp=args.no_timestamp, quiet=args.quiet)
    if not args.quiet and result.channel is not None:
        print(
            f"bandwidth {result.channel.bandwidth_octaves:.4f} octaves "
            f"(peak {result.channel.peak_log2_freq:.3f} octaves)"
        )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CritbandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
