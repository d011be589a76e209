"""End-to-end pipeline commands driven through the CLI."""

import gzip
import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from bspnn.cli import main
from conftest import TRAIN_SPEC, synthetic_records


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, synth_dir):
    """A built workspace: config file plus build-datasets output."""
    root = tmp_path_factory.mktemp("run")
    out = root / "out"
    config = {
        "paths": {
            "train_file": synth_dir["train"],
            "test_file": synth_dir["test"],
        },
        "boost": {"rounds": 2},
        "seed": 7,
        "output_dir": str(out),
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    runner = CliRunner()
    result = runner.invoke(main, ["build-datasets", "--config", str(config_path)])
    assert result.exit_code == 0, result.output
    return {"config": str(config_path), "out": str(out), "root": str(root)}


class TestBuildDatasets:
    def test_writes_norm_clusters_and_stages(self, workdir):
        names = ["norm"] + [f"c{i:02d}" for i in range(1, 14)]
        names += [f"d{k:02d}" for k in range(1, 14)]
        for name in names:
            assert os.path.exists(
                os.path.join(workdir["out"], "datasets", f"{name}.csv.gz")
            )

    def test_summary_matches_generator(self, workdir):
        doc = json.load(
            open(os.path.join(workdir["out"], "datasets", "summary.json"))
        )
        source = next(
            s for s in doc["summaries"] if s["provenance"] == "source"
        )
        assert source["normal"] == TRAIN_SPEC["normal"]
        assert source["total_attack"] == sum(
            v for k, v in TRAIN_SPEC.items() if k != "normal"
        )
        d13 = next(s for s in doc["summaries"] if s["provenance"] == "D13")
        assert d13["total"] == source["total"]

    def test_rerun_is_byte_identical(self, workdir, runner):
        target = os.path.join(workdir["out"], "datasets", "d03.csv.gz")
        before = open(target, "rb").read()
        summary_before = open(
            os.path.join(workdir["out"], "datasets", "summary.json"), "rb"
        ).read()
        result = runner.invoke(
            main, ["build-datasets", "--config", workdir["config"]]
        )
        assert result.exit_code == 0
        assert open(target, "rb").read() == before
        assert (
            open(
                os.path.join(workdir["out"], "datasets", "summary.json"), "rb"
            ).read()
            == summary_before
        )

    def test_missing_cluster_table_fails_before_writing(self, runner, tmp_path, synth_dir):
        config = {
            "paths": {
                "train_file": synth_dir["train"],
                "cluster_table": str(tmp_path / "absent.txt"),
            },
            "output_dir": str(tmp_path / "never"),
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(config))
        result = runner.invoke(main, ["build-datasets", "--config", str(path)])
        assert result.exit_code == 2
        assert not os.path.exists(tmp_path / "never")

    def test_caps_flow_through(self, runner, tmp_path, synth_dir):
        out = tmp_path / "capped"
        config = {
            "paths": {"train_file": synth_dir["train"]},
            "output_dir": str(out),
            "seed": 3,
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        result = runner.invoke(
            main,
            ["build-datasets", "--config", str(path), "--cap-normal", "50"],
        )
        assert result.exit_code == 0, result.output
        doc = json.load(open(out / "datasets" / "summary.json"))
        sampled = next(
            s for s in doc["summaries"] if s["provenance"].endswith("sampled")
        )
        assert sampled["normal"] == 50


@pytest.fixture(scope="module")
def misuse_model(workdir, runner):
    result = runner.invoke(
        main,
        ["train", "--config", workdir["config"], "--mode", "misuse",
         "--dataset", "d13"],
    )
    assert result.exit_code == 0, result.output
    return os.path.join(workdir["out"], "models", "misuse_d13.json.gz")


@pytest.fixture(scope="module")
def anomaly_model(workdir, runner):
    result = runner.invoke(
        main,
        ["train", "--config", workdir["config"], "--mode", "anomaly",
         "--dataset", "norm"],
    )
    assert result.exit_code == 0, result.output
    return os.path.join(workdir["out"], "models", "anomaly_norm.json.gz")


class TestTrain:
    def test_misuse_model_has_rounds_and_log(self, misuse_model, workdir):
        doc = json.load(gzip.open(misuse_model, "rt"))
        assert doc["kind"] == "boosted_misuse"
        assert len(doc["model"]["rounds"]) == 2
        assert doc["model"]["class_count"] == 5
        assert doc["seed"] == 7
        log = open(misuse_model.replace(".json.gz", ".log")).read()
        assert log.count("round") == 2

    def test_anomaly_model_calibrated(self, anomaly_model):
        doc = json.load(gzip.open(anomaly_model, "rt"))
        assert doc["kind"] == "density_anomaly"
        assert doc["model"]["threshold"] is not None
        assert doc["model"]["quantile"] == 0.01

    def test_retrain_is_byte_identical(self, workdir, runner, misuse_model):
        before = open(misuse_model, "rb").read()
        result = runner.invoke(
            main,
            ["train", "--config", workdir["config"], "--mode", "misuse",
             "--dataset", "d13"],
        )
        assert result.exit_code == 0
        assert open(misuse_model, "rb").read() == before

    def test_anomaly_training_rejects_attacks(self, workdir, runner):
        result = runner.invoke(
            main,
            ["train", "--config", workdir["config"], "--mode", "anomaly",
             "--dataset", "d13"],
        )
        assert result.exit_code == 3  # mixed labels are a data error

    def test_unknown_dataset_id(self, workdir, runner):
        result = runner.invoke(
            main,
            ["train", "--config", workdir["config"], "--mode", "misuse",
             "--dataset", "d99"],
        )
        assert result.exit_code == 2


class TestEvaluate:
    def test_misuse_report_forms(self, workdir, runner, misuse_model):
        result = runner.invoke(
            main, ["evaluate", "--config", workdir["config"], "--model", misuse_model]
        )
        assert result.exit_code == 0, result.output
        reports = os.path.join(workdir["out"], "reports")
        for ext in ("txt", "json", "csv", "png"):
            assert os.path.exists(os.path.join(reports, f"misuse_report.{ext}"))
        doc = json.load(open(os.path.join(reports, "misuse_report.json")))
        # synthetic classes are well separated; the model should do well
        assert doc["dr"]["normal"] >= 0.9
        assert doc["dr"]["dos"] >= 0.9
        assert doc["average_cost"] <= 0.5
        assert any(
            s["name"] == "BSPNN (published full-scale)" for s in doc["comparisons"]
        )

    def test_misuse_report_rerun_identical(self, workdir, runner, misuse_model):
        report = os.path.join(workdir["out"], "reports", "misuse_report.json")
        before = open(report, "rb").read()
        result = runner.invoke(
            main, ["evaluate", "--config", workdir["config"], "--model", misuse_model]
        )
        assert result.exit_code == 0
        assert open(report, "rb").read() == before

    def test_anomaly_report(self, workdir, runner, anomaly_model):
        result = runner.invoke(
            main, ["evaluate", "--config", workdir["config"], "--model", anomaly_model]
        )
        assert result.exit_code == 0, result.output
        doc = json.load(
            open(os.path.join(workdir["out"], "reports", "anomaly_report.json"))
        )
        assert set(doc) >= {"dr", "far", "attack_total", "normal_total"}
        assert doc["dr"] >= 0.8  # synthetic attacks sit far from normal traffic
        assert doc["far"] <= 0.1

    def test_memorized_set_scores_perfectly(self, workdir, runner, misuse_model, synth_dir):
        # evaluating against the training file itself: every class at DR 1.0
        out = os.path.join(workdir["root"], "selftest")
        result = runner.invoke(
            main,
            ["evaluate", "--config", workdir["config"], "--model", misuse_model,
             "--test", synth_dir["train"], "--out", out],
        )
        assert result.exit_code == 0, result.output
        doc = json.load(open(os.path.join(out, "reports", "misuse_report.json")))
        assert all(v == 1.0 for v in doc["dr"].values())
        assert doc["average_cost"] == 0.0

    def test_missing_model_is_validation_error(self, workdir, runner):
        result = runner.invoke(
            main,
            ["evaluate", "--config", workdir["config"], "--model", "/no/such.json"],
        )
        assert result.exit_code == 2


class TestCurve:
    def test_three_stage_curve(self, workdir, runner):
        result = runner.invoke(
            main,
            ["curve", "--config", workdir["config"], "--stages", "1,6,13",
             "--rounds", "1"],
        )
        assert result.exit_code == 0, result.output
        reports = os.path.join(workdir["out"], "reports")
        doc = json.load(open(os.path.join(reports, "curve.json")))
        assert doc["stages"] == [1, 6, 13]
        assert set(doc["dr"]) == {"normal", "probe", "dos", "u2r", "r2l"}
        assert all(len(v) == 3 for v in doc["dr"].values())
        csv_lines = open(os.path.join(reports, "curve.csv")).read().splitlines()
        assert csv_lines[0].startswith("stage,")
        assert len(csv_lines) == 4
        assert os.path.exists(os.path.join(reports, "curve.png"))


class TestPredict:
    def test_labeled_and_unlabeled_inputs(self, workdir, runner, misuse_model, tmp_path):
        lines = synthetic_records({"smurf": 3, "normal": 2}, seed=55)
        labeled = tmp_path / "labeled.csv"
        labeled.write_text("\n".join(lines) + "\n")
        unlabeled = tmp_path / "unlabeled.csv"
        unlabeled.write_text(
            "\n".join(line.rsplit(",", 1)[0] for line in lines) + "\n"
        )
        for source in (labeled, unlabeled):
            out = tmp_path / (source.stem + ".out")
            result = runner.invoke(
                main,
                ["predict", "--model", misuse_model, "--input", str(source),
                 "--out", str(out)],
            )
            assert result.exit_code == 0, result.output
            rows = out.read_text().splitlines()
            assert len(rows) == 5
            for row in rows:
                fields = row.split(",")
                assert fields[0] in ("normal", "probe", "dos", "u2r", "r2l")
                scores = np.array([float(v) for v in fields[1:]])
                assert len(scores) == 5
                assert abs(scores.sum()) <= 1e-6

    def test_empty_input_is_success(self, workdir, runner, misuse_model, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        out = tmp_path / "empty.out"
        result = runner.invoke(
            main,
            ["predict", "--model", misuse_model, "--input", str(empty),
             "--out", str(out)],
        )
        assert result.exit_code == 0
        assert out.read_text() == ""

    def test_malformed_line_reports_position(self, workdir, runner, misuse_model, tmp_path):
        lines = synthetic_records({"normal": 2}, seed=56)
        bad = tmp_path / "bad.csv"
        bad.write_text(lines[0] + "\n" + "only,three,fields\n")
        result = runner.invoke(
            main, ["predict", "--model", misuse_model, "--input", str(bad)]
        )
        assert result.exit_code == 3
        assert ":2" in result.output

    def test_anomaly_predictions(self, workdir, runner, anomaly_model, tmp_path):
        lines = synthetic_records({"normal": 3, "neptune": 3}, seed=57)
        source = tmp_path / "mixed.csv"
        source.write_text("\n".join(lines) + "\n")
        out = tmp_path / "mixed.out"
        result = runner.invoke(
            main,
            ["predict", "--model", anomaly_model, "--input", str(source),
             "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        labels = [row.split(",")[0] for row in out.read_text().splitlines()]
        assert set(labels) <= {"normal", "anomaly"}
        assert "anomaly" in labels
