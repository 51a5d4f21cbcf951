import json
import math

import pytest

from critband.bands import FrequencyBand
from critband.cli import main
from critband.errors import EXIT_CONFIG, EXIT_DATA
from critband.observer import SyntheticObserver, generate_observer_log
from critband.pipeline import (
    PipelineConfig,
    load_pipeline_config,
    run_pipeline,
    save_pipeline_config,
    validate_config,
)
from critband.predictions import load_mapping
from critband.resources import data_path
from critband.stimuli import generate_stimuli, load_corpus, read_manifest

OBSERVER_BANDS = [FrequencyBand(float(c)) for c in (1, 2, 4, 8, 16)]
OBSERVER_LADDER = [0.0, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64, 1.28, 2.56]


def observer_config(tmp_path, corpus_dir, labels, n_bands=5, image_size=48):
    return PipelineConfig(
        out_root=str(tmp_path / "out"),
        corpus_dir=str(corpus_dir),
        labels_csv=str(labels),
        bands=OBSERVER_BANDS[:n_bands],
        sd_ladder=list(OBSERVER_LADDER),
        image_size=image_size,
        observer=SyntheticObserver(peak_log2_freq=2.0),  # peak at 4 cyc/img
        stages=["gen-stimuli", "observer", "ingest", "fit-thresholds", "fit-channel", "report"],
    )


class TestObserver:
    def test_accuracy_crosses_half_at_threshold(self):
        obs = SyntheticObserver()
        for center in (2.0, 8.0, 32.0):
            t = obs.threshold_sd(center)
            assert obs.accuracy(center, t) == pytest.approx(0.5, abs=1e-12)

    def test_baseline_at_zero_sd(self):
        obs = SyntheticObserver()
        assert obs.accuracy(8.0, 0.0) == 0.9
        assert obs.accuracy(None, 0.0) == 0.9

    def test_log_covers_manifest(self, toy_corpus, tmp_path):
        corpus_dir, labels = toy_corpus(n_images=3, size=32)
        corpus = load_corpus(corpus_dir, labels)
        manifest = generate_stimuli(
            corpus, OBSERVER_BANDS[:2], [0.0, 0.1, 0.2, 0.4], 1, 32, tmp_path / "stim"
        )
        log = tmp_path / "log.jsonl"
        count = generate_observer_log(manifest, SyntheticObserver(), log)
        assert count == len(manifest.entries)
        lines = log.read_text().strip().splitlines()
        assert len(lines) == count


class TestPipeline:
    def test_config_round_trips(self, tmp_path):
        config = PipelineConfig(
            out_root=str(tmp_path / "o"),
            corpus_dir="c",
            labels_csv="l.csv",
            observer=SyntheticObserver(),
        )
        path = tmp_path / "config.json"
        save_pipeline_config(config, path)
        loaded = load_pipeline_config(path)
        assert loaded == config
        assert loaded.config_hash() == config.config_hash()

    def test_missing_mapping_is_config_error_before_writes(self, toy_corpus, tmp_path):
        corpus_dir, labels = toy_corpus(n_images=1, size=32)
        config = observer_config(tmp_path, corpus_dir, labels)
        config.mapping_csv = str(tmp_path / "nope.csv")
        with pytest.raises(Exception, match="nope.csv"):
            run_pipeline(config)
        assert not (tmp_path / "out").exists()

    def test_validate_rejects_unknown_stage(self, tmp_path):
        config = PipelineConfig(out_root=str(tmp_path / "o"), stages=["fly"])
        with pytest.raises(Exception, match="fly"):
            validate_config(config)

    def test_full_observer_pipeline_recovers_channel(self, toy_corpus, tmp_path):
        corpus_dir, labels = toy_corpus(n_images=8, size=48)
        config = observer_config(tmp_path, corpus_dir, labels)
        result = run_pipeline(config, no_timestamp=True, quiet=True)
        assert result.ok()
        out = tmp_path / "out"
        for name in ("cells.csv", "thresholds.csv", "channel.json", "run_summary.json"):
            assert (out / name).exists()
        with open(out / "channel.json", encoding="utf-8") as fh:
            channel = json.load(fh)
        assert channel["bandwidth_octaves"] == pytest.approx(2.0, abs=0.15)
        assert channel["peak_log2_freq"] == pytest.approx(2.0, abs=0.2)
        with open(out / "run_summary.json", encoding="utf-8") as fh:
            summary = json.load(fh)
        assert all(s["status"] == "ok" for s in summary["stages"])
        assert "completed_at" not in summary
        assert not (out / ".critband.lock").exists()

    def test_lockfile_blocks_concurrent_runs(self, toy_corpus, tmp_path):
        corpus_dir, labels = toy_corpus(n_images=1, size=32)
        config = observer_config(tmp_path, corpus_dir, labels)
        (tmp_path / "out").mkdir()
        (tmp_path / "out" / ".critband.lock").write_text("123")
        with pytest.raises(Exception, match="locked"):
            run_pipeline(config)

    def test_stage_error_recorded_in_summary(self, toy_corpus, tmp_path):
        corpus_dir, labels = toy_corpus(n_images=1, size=32)
        config = observer_config(tmp_path, corpus_dir, labels)
        # a one-source grid cannot reach 3 usable thresholds with a flat
        # observer; force failure by censoring everything
        config.observer = SyntheticObserver(
            peak_sensitivity=1e-6, peak_log2_freq=2.0
        )
        with pytest.raises(Exception):
            run_pipeline(config, quiet=True)
        with open(tmp_path / "out" / "run_summary.json", encoding="utf-8") as fh:
            summary = json.load(fh)
        statuses = {s["name"]: s["status"] for s in summary["stages"]}
        assert statuses["fit-channel"] == "error"
        assert not (tmp_path / "out" / ".critband.lock").exists()


class TestCli:
    def run_cli(self, *argv):
        return main([str(a) for a in argv])

    def test_end_to_end_subcommands(self, toy_corpus, tmp_path, capsys):
        corpus_dir, labels = toy_corpus(n_images=6, size=48)
        grid = {
            "bands": [b.to_dict() for b in OBSERVER_BANDS],
            "sd_ladder": OBSERVER_LADDER,
            "seeds_per_cell": 1,
            "image_size": 48,
        }
        grid_path = tmp_path / "grid.json"
        grid_path.write_text(json.dumps(grid), encoding="utf-8")
        stim_dir = tmp_path / "stim"
        assert self.run_cli(
            "gen-stimuli", "--corpus", corpus_dir, "--labels", labels,
            "--config", grid_path, "--out", stim_dir, "--quiet",
        ) == 0
        manifest = read_manifest(stim_dir / "manifest.jsonl")
        log = tmp_path / "log.jsonl"
        generate_observer_log(manifest, SyntheticObserver(peak_log2_freq=2.0), log)
        cells = tmp_path / "cells.csv"
        assert self.run_cli(
            "ingest", "--log", log, "--manifest", stim_dir / "manifest.jsonl",
            "--mapping", data_path("identity16.csv"), "--out", cells, "--quiet",
        ) == 0
        thresholds = tmp_path / "thresholds.csv"
        assert self.run_cli(
            "fit-thresholds", "--cells", cells, "--out", thresholds, "--quiet"
        ) == 0
        channel = tmp_path / "channel.json"
        assert self.run_cli(
            "fit-channel", "--thresholds", thresholds, "--out", channel,
            "--svg", tmp_path / "channel.svg", "--no-timestamp", "--quiet",
        ) == 0
        with open(channel, encoding="utf-8") as fh:
            fit = json.load(fh)
        assert fit["bandwidth_octaves"] == pytest.approx(2.0, abs=0.15)
        assert (tmp_path / "channel.svg").exists()
        assert (tmp_path / "channel.csv").exists()

    def test_report_and_analyze_on_reference_table(self, tmp_path):
        assert self.run_cli(
            "report", "--metrics", data_path("reference_metrics.csv"),
            "--out", tmp_path / "report", "--no-timestamp", "--quiet",
        ) == 0
        assert (tmp_path / "report" / "table.csv").exists()
        assert self.run_cli(
            "analyze", "--metrics", data_path("reference_metrics.csv"),
            "--out", tmp_path / "analysis", "--no-timestamp", "--quiet",
        ) == 0
        assert (tmp_path / "analysis" / "fig_ood_vs_bw.csv").exists()
        assert not (tmp_path / "analysis" / "table.csv").exists()

    def test_missing_config_file_exits_2(self, tmp_path, capsys):
        code = self.run_cli("run", "--config", tmp_path / "absent.json")
        assert code == EXIT_CONFIG
        assert "not found" in capsys.readouterr().err

    def test_bad_log_exits_3(self, toy_corpus, tmp_path, capsys):
        corpus_dir, labels = toy_corpus(n_images=1, size=32)
        corpus = load_corpus(corpus_dir, labels)
        manifest_dir = tmp_path / "stim"
        generate_stimuli(corpus, OBSERVER_BANDS[:2], [0.0, 0.1, 0.2, 0.4], 1, 32, manifest_dir)
        bad_log = tmp_path / "bad.jsonl"
        bad_log.write_text("{broken\n", encoding="utf-8")
        code = self.run_cli(
            "ingest", "--log", bad_log, "--manifest", manifest_dir / "manifest.jsonl",
            "--mapping", data_path("identity16.csv"), "--out", tmp_path / "cells.csv",
        )
        assert code == EXIT_DATA

    def test_metrics_subcommand(self, tmp_path):
        # two tiny OOD datasets plus a cue-conflict log, identity labels
        import critband.predictions as pred

        ood_dir = tmp_path / "ood"
        ood_dir.mkdir()
        truth_rows = ["stimulus_id,dataset_tag,true_superclass"]
        for tag, accs in (("sketch", [1, 1, 0, 1]), ("edge", [1, 0, 0, 1])):
            records = []
            for i, ok in enumerate(accs):
                sid = f"{tag}-{i}"
                truth_rows.append(f"{sid},{tag},dog")
                records.append(pred.PredictionRecord(sid, "dog" if ok else "cat", "m"))
            pred.write_prediction_log(ood_dir / f"{tag}.jsonl", records)
        (tmp_path / "ood_truth.csv").write_text("\n".join(truth_rows) + "\n")

        cc_truth = ["stimulus_id,shape_label,texture_label"]
        cc_records = []
        for i, choice in enumerate(["shape"] * 3 + ["texture"] + ["neither"]):
            sid = f"cc-{i}"
            cc_truth.append(f"{sid},cat,dog")
            label = {"shape": "cat", "texture": "dog", "neither": "boat"}[choice]
            cc_records.append(pred.PredictionRecord(sid, label, "m"))
        (tmp_path / "cc_truth.csv").write_text("\n".join(cc_truth) + "\n")
        pred.write_prediction_log(tmp_path / "cc.jsonl", cc_records)

        out = tmp_path / "metrics.json"
        code = self.run_cli(
            "metrics", "--ood", ood_dir, "--ood-truth", tmp_path / "ood_truth.csv",
            "--cueconflict", tmp_path / "cc.jsonl", "--cc-truth", tmp_path / "cc_truth.csv",
            "--mapping", data_path("identity16.csv"), "--out", out,
            "--model-id", "toy", "--partial", "--quiet",
        )
        assert code == 0
        with open(out, encoding="utf-8") as fh:
            metrics = json.load(fh)[0]
        assert metrics["ood_accuracy"] == pytest.approx((0.75 + 0.5) / 2)
        assert metrics["shape_bias"] == pytest.approx(3 / 4)

    def test_run_composite_deterministic_and_idempotent(self, toy_corpus, tmp_path):
        corpus_dir, labels = toy_corpus(n_images=4, size=48)
        config = observer_config(tmp_path, corpus_dir, labels, n_bands=5)
        config_path = tmp_path / "config.json"
        save_pipeline_config(config, config_path)
        out = tmp_path / "out"
        tracked = ("cells.csv", "thresholds.csv", "channel.json", "run_summary.json")
        assert self.run_cli(
            "run", "--config", config_path, "--no-timestamp", "--quiet"
        ) == 0
        first = {rel: (out / rel).read_bytes() for rel in tracked}
        assert self.run_cli(
            "run", "--config", config_path, "--no-timestamp", "--quiet"
        ) == 0
        for rel in tracked:
            assert (out / rel).read_bytes() == first[rel]
