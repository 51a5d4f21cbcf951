"""Report emission: metric tables and the cross-model analysis figures.

The table mirrors the reference-table column order (Model, Z-Shot, CLIP,
IN-1k, IN-22k, BW, OOD, Shape Bias) with best/second-best bandwidth per
group annotated in an extra column.  Each figure is written as SVG plus a
CSV sidecar holding exactly the plotted values; the CSVs are the source of
truth and are byte-deterministic.

Figures:

* bandwidth vs. parameter count on a log10 axis, with the fitted trend and
  its extrapolation to the one-octave level (set by ``target_bw``);
* bandwidth of IN-22K-trained vs. other models (Welch comparison);
* OOD accuracy against bandwidth and against shape bias, with fitted lines
  and r annotations.

Models missing a required value are excluded from the affected figure and
listed in the run summary, never silently dropped.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CritbandError
from .metrics import ModelMetrics
from .stats import compare_groups, extrapolate_to_bandwidth, regress
from .svgplot import Figure, write_figure

TABLE_HEADER = [
    "Model",
    "Z-Shot",
    "CLIP",
    "IN-1k",
    "IN-22k",
    "BW",
    "OOD",
    "Shape Bias",
    "BW Highlight",
]

BEST, SECOND = "best", "second"


@dataclass
class ReportSummary:
    figures: list[str] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)
    excluded: dict[str, list[str]] = field(default_factory=dict)

    def to_dict(self):
        return {
            "figures": self.figures,
            "skipped": self.skipped,
            "excluded": self.excluded,
        }


def _flag(value: bool | None) -> str:
    if value is None:
        return ""
    return "yes" if value else "no"


def _num(value: float | None) -> str:
    return "" if value is None else f"{value:.4f}"


def bw_highlights(metrics: list[ModelMetrics]) -> dict[str, str]:
    """Best (lowest) and second-best bandwidth per group."""
    groups: dict[str, list[ModelMetrics]] = {}
    for m in metrics:
        if m.bandwidth_octaves is not None:
            groups.setdefault(m.group or "", []).append(m)
    marks: dict[str, str] = {}
    for members in groups.values():
        if len(members) < 2:
            continue
        ordered = sorted(members, key=lambda m: (m.bandwidth_octaves, m.model_id))
        marks[ordered[0].model_id] = BEST
        marks[ordered[1].model_id] = SECOND
    return marks


def write_table_csv(path, metrics: list[ModelMetrics]) -> None:
    marks = bw_highlights(metrics)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_HEADER)
        for m in metrics:
            writer.writerow(
                [
                    m.model_id,
                    _flag(m.zero_shot),
                    _flag(m.clip_supervised),
                    _flag(m.in1k),
                    _flag(m.trained_in22k),
                    _num(m.bandwidth_octaves),
                    _num(m.ood_accuracy),
                    _num(m.shape_bias),
                    marks.get(m.model_id, ""),
                ]
            )


def _write_sidecar(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _scatter_with_fit(
    out_dir: Path,
    name: str,
    pairs: list[tuple[str, float, float]],
    title: str,
    xlabel: str,
    ylabel: str,
    timestamp: bool,
) -> tuple[str | None, dict | None]:
    """Scatter + OLS line when n >= 3 and x varies; returns (skip reason, fit)."""
    fig = Figure(title=title, xlabel=xlabel, ylabel=ylabel)
    xs = [x for _, x, _ in pairs]
    ys = [y for _, y, _ in pairs]
    fig.add_points(xs, ys)
    fit_info = None
    reason = None
    if len(pairs) >= 3 and max(xs) > min(xs):
        fit = regress(list(zip(xs, ys)), x_transform="identity")
        grid = [min(xs), max(xs)]
        fig.add_line(grid, [fit.predict(x) for x in grid], label="OLS fit")
        fig.annotations.append(f"r = {fit.pearson_r:.4f} (n = {fit.n})")
        fit_info = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "pearson_r": fit.pearson_r,
            "n": fit.n,
        }
    else:
        reason = f"n = {len(pairs)} points; need >= 3 with varying x for a fit"
    write_figure(out_dir / f"{name}.svg", fig, timestamp=timestamp)
    _write_sidecar(
        out_dir / f"{name}.csv",
        ["model_id", "x", "y"],
        [[m, repr(x), repr(y)] for m, x, y in pairs],
    )
    return reason, fit_info


def emit_scaling_figure(
    metrics: list[ModelMetrics],
    out_dir: Path,
    summary: ReportSummary,
    target_bw: float = 1.0,
    timestamp: bool = True,
) -> None:
    """Bandwidth vs. log10 parameter count with trend and extrapolation."""
    usable = [
        m for m in metrics if m.param_count is not None and m.bandwidth_octaves is not None
    ]
    excluded = [m.model_id for m in metrics if m not in usable]
    if excluded:
        summary.excluded["scaling"] = excluded
    name = "fig_bw_vs_params"
    if len(usable) < 3:
        summary.skipped[name] = (
            f"{len(usable)} models with both param_count and bandwidth; need >= 3"
        )
        return
    pairs = [(m.model_id, math.log10(m.param_count), m.bandwidth_octaves) for m in usable]
    fit = regress(
        [(m.param_count, m.bandwidth_octaves) for m in usable], x_transform="log10"
    )
    fig = Figure(
        title="Bandwidth vs. model size",
        xlabel="log10(parameter count)",
        ylabel="bandwidth (octaves)",
    )
    fig.add_points([x for _, x, _ in pairs], [y for _, _, y in pairs])
    grid = [min(x for _, x, _ in pairs), max(x for _, x, _ in pairs)]
    fig.add_line(grid, [fit.intercept + fit.slope * x for x in grid], label="OLS fit")
    fig.annotations.append(f"r = {fit.pearson_r:.4f} (n = {fit.n})")
    target_params = None
    if fit.slope < 0:
        target_params = extrapolate_to_bandwidth(fit, target_bw)
        fig.annotations.append(
            f"trend reaches {target_bw:g} octave at ~{target_params:.3g} parameters"
        )
    write_figure(out_dir / f"{name}.svg", fig, timestamp=timestamp)
    _write_sidecar(
        out_dir / f"{name}.csv",
        ["model_id", "log10_param_count", "bandwidth_octaves"],
        [[m, repr(x), repr(y)] for m, x, y in pairs],
    )
    _write_sidecar(
        out_dir / "regression.csv",
        ["slope", "intercept", "pearson_r", "n", "x_transform", "target_bw", "params_at_target_bw"],
        [
            [
                repr(fit.slope),
                repr(fit.intercept),
                repr(fit.pearson_r),
                fit.n,
                fit.x_transform,
                repr(target_bw),
                repr(target_params) if target_params is not None else "",
            ]
        ],
    )
    summary.figures.append(name)


def emit_group_figure(
    metrics: list[ModelMetrics],
    out_dir: Path,
    summary: ReportSummary,
    timestamp: bool = True,
) -> None:
    """Bandwidths of IN-22K-trained models against the rest."""
    with_tag = [m for m in metrics if m.trained_in22k is not None and m.bandwidth_octaves is not None]
    in22k = [m.bandwidth_octaves for m in with_tag if m.trained_in22k]
    rest = [m.bandwidth_octaves for m in with_tag if not m.trained_in22k]
    name = "fig_bw_in22k_groups"
    if len(in22k) < 2 or len(rest) < 2:
        summary.skipped[name] = (
            f"group sizes {len(in22k)} (IN-22K) and {len(rest)} (other); need >= 2 each"
        )
        return
    comparison = compare_groups(in22k, rest, "IN-22K", "other")
    fig = Figure(
        title="Bandwidth by IN-22K training",
        xlabel="group",
        ylabel="bandwidth (octaves)",
    )
    fig.add_points([1.0] * len(in22k), sorted(in22k), label="IN-22K")
    fig.add_points([2.0] * len(rest), sorted(rest), label="other")
    fig.add_line([0.85, 1.15], [comparison.mean_a] * 2)
    fig.add_line([1.85, 2.15], [comparison.mean_b] * 2)
    fig.annotations.append(
        f"Welch t = {comparison.welch_t:.4f}, p = {comparison.approx_p:.4g}"
    )
    write_figure(out_dir / f"{name}.svg", fig, timestamp=timestamp)
    _write_sidecar(
        out_dir / f"{name}.csv",
        ["group", "bandwidth_octaves"],
        [["IN-22K", repr(v)] for v in sorted(in22k)]
        + [["other", repr(v)] for v in sorted(rest)],
    )
    with open(out_dir / "groups_in22k.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "group_a_label": comparison.group_a_label,
                "group_b_label": comparison.group_b_label,
                "mean_a": comparison.mean_a,
                "mean_b": comparison.mean_b,
                "sd_a": comparison.sd_a,
                "sd_b": comparison.sd_b,
                "n_a": comparison.n_a,
                "n_b": comparison.n_b,
                "welch_t": comparison.welch_t,
                "degrees_of_freedom": comparison.degrees_of_freedom,
                "approx_p": comparison.approx_p,
                "degenerate": comparison.degenerate,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    summary.figures.append(name)


def emit_correlation_figures(
    metrics: list[ModelMetrics],
    out_dir: Path,
    summary: ReportSummary,
    timestamp: bool = True,
) -> None:
    """OOD accuracy against bandwidth and against shape bias."""
    specs = [
        (
            "fig_ood_vs_bw",
            "OOD accuracy vs. bandwidth",
            "bandwidth (octaves)",
            lambda m: m.bandwidth_octaves,
        ),
        (
            "fig_ood_vs_shape_bias",
            "OOD accuracy vs. shape bias",
            "shape bias",
            lambda m: m.shape_bias,
        ),
    ]
    for name, title, xlabel, get in specs:
        usable = [m for m in metrics if get(m) is not None and m.ood_accuracy is not None]
        excluded = [m.model_id for m in metrics if m not in usable]
        if excluded:
            summary.excluded[name] = excluded
        if not usable:
            summary.skipped[name] = "no models with the required values"
            continue
        pairs = [(m.model_id, get(m), m.ood_accuracy) for m in usable]
        reason, _ = _scatter_with_fit(
            out_dir, name, pairs, title, xlabel, "OOD accuracy", timestamp
        )
        if reason:
            summary.skipped[name] = reason
        summary.figures.append(name)


def emit_report(
    metrics: list[ModelMetrics],
    out_dir,
    target_bw: float = 1.0,
    timestamp: bool = True,
) -> ReportSummary:
    """Full report: table, figures with sidecars, and a summary JSON."""
    if not metrics:
        raise CritbandError("emit_report needs at least one ModelMetrics entry")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = ReportSummary()
    write_table_csv(out_dir / "table.csv", metrics)
    emit_scaling_figure(metrics, out_dir, summary, target_bw=target_bw, timestamp=timestamp)
    emit_group_figure(metrics, out_dir, summary, timestamp=timestamp)
    emit_correlation_figures(metrics, out_dir, summary, timestamp=timestamp)
    with open(out_dir / "report_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def emit_channel_figure(
    points,
    fit,
    out_path,
    timestamp: bool = True,
) -> None:
    """One model's sensitivity points and fitted Gaussian channel."""
    from .channel import gaussian_channel
    from .psychometric import MEASURED

    usable = [p for p in points if p.censoring == MEASURED and p.threshold_sd]
    xs = [p.band.log2_center for p in usable]
    ys = [1.0 / p.threshold_sd for p in usable]
    fig = Figure(
        title="Spatial-frequency channel",
        xlabel="log2(frequency in cycles/image)",
        ylabel="sensitivity (1 / threshold SD)",
    )
    fig.add_points(xs, ys, label="measured bands")
    if xs:
        lo, hi = min(xs) - 0.5, max(xs) + 0.5
        grid = [lo + (hi - lo) * i / 120 for i in range(121)]
        curve = gaussian_channel(
            (fit.peak_sensitivity, fit.peak_log2_freq, fit.sigma_octaves), grid
        )
        fig.add_line(grid, list(curve), label="Gaussian fit")
    fig.annotations.append(f"bandwidth = {fit.bandwidth_octaves:.4f} octaves")
    fig.annotations.append(
        f"peak at {fit.peak_log2_freq:.3f} octaves ({2 ** fit.peak_log2_freq:.2f} cyc/img)"
    )
    write_figure(out_path, fig, timestamp=timestamp)
    sidecar = Path(str(out_path)).with_suffix(".csv")
    _write_sidecar(
        sidecar,
        ["log2_center_freq", "sensitivity"],
        [[repr(x), repr(y)] for x, y in zip(xs, ys)],
    )
