import csv
import json

import pytest

from chadkit.cli import main
from chadkit.synthdata import make_clustered_dataset

from conftest import write_csv, write_schema_json


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Schema file, a 200-row training CSV, and a ready train config."""
    root = tmp_path_factory.mktemp("cli")
    ds = make_clustered_dataset(200, arities=(6, 8), n_cont=4, n_clusters=3, seed=3)
    write_schema_json(root / "schema.json", ds.schema)
    write_csv(root / "train.csv", ds.schema, ds.cat, ds.cont)
    config = {
        "schema": str(root / "schema.json"),
        "train_data": str(root / "train.csv"),
        "min_count": 1,
        "model": {"encoder_sizes": [12, 6]},
        "train": {"phase_epochs": [2, 1, 2], "batch_size": 64},
        "negatives": {"m": 3},
        "seed": 5,
        "out_dir": str(root / "run"),
    }
    (root / "train_cfg.json").write_text(json.dumps(config))
    rc = main(["train", "--config", str(root / "train_cfg.json")])
    assert rc == 0
    return root


class TestTrain:
    def test_produces_four_checkpoint_files(self, workspace):
        names = {p.name for p in (workspace / "run").iterdir()}
        assert {"checkpoint_phase1.chad", "checkpoint_phase2.chad",
                "checkpoint_phase3.chad", "model.chad"} <= names
        assert {"train_log.jsonl", "load_report.json", "vocab.json",
                "normalization.json", "resolved_config.json"} <= names

    def test_rerun_is_bit_identical(self, workspace, tmp_path):
        config = json.loads((workspace / "train_cfg.json").read_text())
        config["out_dir"] = str(tmp_path / "rerun")
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["train", "--config", str(tmp_path / "cfg.json")]) == 0
        a = (workspace / "run/model.chad").read_bytes()
        b = (tmp_path / "rerun/model.chad").read_bytes()
        assert a == b

    def test_missing_schema_path_in_message(self, tmp_path, capsys):
        config = {"schema": str(tmp_path / "nope.json"),
                  "train_data": str(tmp_path / "also_nope.csv"),
                  "min_count": 1, "out_dir": str(tmp_path / "o")}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        rc = main(["train", "--config", str(tmp_path / "cfg.json")])
        assert rc == 2
        err = capsys.readouterr().err
        assert "nope.json" in err and "also_nope.csv" in err

    def test_unknown_keys_all_reported(self, workspace, tmp_path, capsys):
        config = json.loads((workspace / "train_cfg.json").read_text())
        config["typo_one"] = 1
        config["train"]["typo_two"] = 2
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        rc = main(["train", "--config", str(tmp_path / "cfg.json")])
        assert rc == 2
        err = capsys.readouterr().err
        assert "typo_one" in err and "typo_two" in err

    def test_min_count_required(self, workspace, tmp_path):
        config = json.loads((workspace / "train_cfg.json").read_text())
        del config["min_count"]
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["train", "--config", str(tmp_path / "cfg.json")]) == 2

    def test_reproducible_from_resolved_config_alone(self, workspace, tmp_path):
        resolved = json.loads((workspace / "run/resolved_config.json").read_text())
        (tmp_path / "resolved.json").write_text(json.dumps(resolved))
        rc = main(["train", "--config", str(tmp_path / "resolved.json"),
                   "--out", str(tmp_path / "replay")])
        assert rc == 0
        assert (workspace / "run/model.chad").read_bytes() == \
            (tmp_path / "replay/model.chad").read_bytes()

    def test_seed_flag_changes_model(self, workspace, tmp_path):
        config = json.loads((workspace / "train_cfg.json").read_text())
        config["out_dir"] = str(tmp_path / "seeded")
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["train", "--config", str(tmp_path / "cfg.json"),
                     "--seed", "99"]) == 0
        a = (workspace / "run/model.chad").read_bytes()
        b = (tmp_path / "seeded/model.chad").read_bytes()
        assert a != b
        resolved = json.loads((tmp_path / "seeded/resolved_config.json").read_text())
        assert resolved["seed"] == 99


class TestScore:
    def test_scores_sorted_ascending(self, workspace, tmp_path):
        out = tmp_path / "scores.csv"
        rc = main(["score", "--model", str(workspace / "run/model.chad"),
                   "--data", str(workspace / "train.csv"), "--out", str(out)])
        assert rc == 0
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["record_id", "score"]
        scores = [float(r[1]) for r in rows[1:]]
        assert len(scores) == 200
        assert scores == sorted(scores)
        assert out.with_suffix(".csv.report.json").exists()

    def test_schema_mismatch_exits_3(self, workspace, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("wrong,columns\n1,2\n")
        rc = main(["score", "--model", str(workspace / "run/model.chad"),
                   "--data", str(bad), "--out", str(tmp_path / "s.csv")])
        assert rc == 3

    def test_unseen_category_dropped_and_reported(self, workspace, tmp_path):
        src = (workspace / "train.csv").read_text().splitlines()
        doctored = src[:6]
        parts = src[1].split(",")
        parts[0] = "brand_new_value"
        doctored.append(",".join(parts))
        data = tmp_path / "unseen.csv"
        data.write_text("\n".join(doctored) + "\n")
        out = tmp_path / "scores.csv"
        rc = main(["score", "--model", str(workspace / "run/model.chad"),
                   "--data", str(data), "--out", str(out)])
        assert rc == 0
        rows = list(csv.reader(open(out)))
        assert len(rows) - 1 == 5
        report = json.loads(out.with_suffix(".csv.report.json").read_text())
        assert report["rows_dropped_unseen"] == 1

    def test_missing_model_exits_2(self, tmp_path):
        rc = main(["score", "--model", str(tmp_path / "no.chad"),
                   "--data", str(tmp_path / "no.csv"),
                   "--out", str(tmp_path / "s.csv")])
        assert rc == 2


class TestEval:
    def test_report_contains_config_and_ap(self, workspace, tmp_path):
        config = {"model": str(workspace / "run/model.chad"),
                  "test_data": str(workspace / "train.csv"),
                  "anomaly_fraction": 0.1, "seeds": [0, 1],
                  "percentages": [5, 10],
                  "out_dir": str(tmp_path / "eval")}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["eval", "--config", str(tmp_path / "cfg.json")]) == 0
        report = json.loads((tmp_path / "eval/eval_report.json").read_text())
        assert report["config"]["model"] == config["model"]
        assert len(report["ap_per_seed"]) == 2
        assert 0.0 <= report["ap_mean"] <= 1.0
        assert [r["percent"] for r in report["vary_anomaly"]] == [5, 10]
        rows = list(csv.reader(open(tmp_path / "eval/vary_anomaly.csv")))
        assert rows[0] == ["percent", "ap_mean", "ap_sd", "runs"]
        assert len(rows) == 3


class TestBenchConcept:
    def test_bad_blob_and_empty_seeds_rejected(self, tmp_path, capsys):
        config = {"concept": {"blobs": [{"cov": 0.5}]}, "seeds": [],
                  "out_dir": str(tmp_path / "b")}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["bench-concept", "--config", str(tmp_path / "cfg.json")]) == 2
        err = capsys.readouterr().err
        assert "mean" in err and "seeds" in err

    def test_four_method_table(self, tmp_path):
        config = {"concept": {"n_per_cluster": 80, "n_per_blob": 8},
                  "seeds": [0], "out_dir": str(tmp_path / "bench")}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["bench-concept", "--config", str(tmp_path / "cfg.json")]) == 0
        rows = list(csv.reader(open(tmp_path / "bench/concept_bench.csv")))
        assert rows[0] == ["method", "seed", "ap"]
        assert len(rows) == 5
        summary = json.loads((tmp_path / "bench/concept_summary.json").read_text())
        assert len(summary["summary"]) == 4
        data_rows = list(csv.reader(open(tmp_path / "bench/concept_data.csv")))
        assert data_rows[0] == ["x", "y", "label"]
        assert len(data_rows) == 1 + 2 * 80 + 2 * 8


class TestVizLatent:
    def test_projection_csv(self, workspace, tmp_path):
        rc = main(["viz-latent", "--model", str(workspace / "run/model.chad"),
                   "--data", str(workspace / "train.csv"),
                   "--out", str(tmp_path / "viz")])
        assert rc == 0
        rows = list(csv.reader(open(tmp_path / "viz/projection_latent.csv")))
        assert rows[0] == ["x", "y", "label"]
        assert len(rows) == 201

    def test_estimator_source(self, workspace, tmp_path):
        config = {"model": str(workspace / "run/model.chad"),
                  "data": str(workspace / "train.csv"),
                  "source": "estimator", "out_dir": str(tmp_path / "viz2")}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["viz-latent", "--config", str(tmp_path / "cfg.json")]) == 0
        assert (tmp_path / "viz2/projection_estimator.csv").exists()

    def test_label_field_flows_into_projection(self, workspace, tmp_path):
        src = (workspace / "train.csv").read_text().splitlines()
        labeled = [src[0] + ",label"]
        for i, line in enumerate(src[1:9]):
            labeled.append(line + ("," + ("1" if i % 2 else "0")))
        data = tmp_path / "labeled.csv"
        data.write_text("\n".join(labeled) + "\n")
        config = {"model": str(workspace / "run/model.chad"),
                  "data": str(data), "label_field": "label",
                  "out_dir": str(tmp_path / "viz3")}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["viz-latent", "--config", str(tmp_path / "cfg.json")]) == 0
        rows = list(csv.reader(open(tmp_path / "viz3/projection_latent.csv")))
        assert [r[2] for r in rows[1:]] == ["0", "1"] * 4


class TestNegsampleDump:
    def test_row_count_contract(self, workspace, tmp_path):
        config = {"schema": str(workspace / "schema.json"),
                  "data": str(workspace / "train.csv"),
                  "rows": 3, "negatives": {"m": 5},
                  "out_dir": str(tmp_path / "dump")}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["negsample-dump", "--config", str(tmp_path / "cfg.json")]) == 0
        rows = list(csv.reader(open(tmp_path / "dump/negatives.csv")))
        assert len(rows) == 16  # header + 3 * 5
        header = rows[0]
        assert header[:2] == ["source_id", "sample"]

    def test_decoded_values_stay_in_vocabulary(self, workspace, tmp_path):
        config = {"schema": str(workspace / "schema.json"),
                  "data": str(workspace / "train.csv"),
                  "rows": 2, "negatives": {"m": 4},
                  "out_dir": str(tmp_path / "dump2")}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["negsample-dump", "--config", str(tmp_path / "cfg.json")]) == 0
        rows = list(csv.reader(open(tmp_path / "dump2/negatives.csv")))
        for row in rows[1:]:
            assert row[2].startswith("v0_") and row[3].startswith("v1_")


class TestNumericFailure:
    def test_nan_training_data_exits_4(self, workspace, tmp_path):
        src = (workspace / "train.csv").read_text().splitlines()
        parts = src[1].split(",")
        parts[2] = "nan"  # a parseable float that poisons normalization
        doctored = [src[0], ",".join(parts)] + src[2:40]
        data = tmp_path / "nan.csv"
        data.write_text("\n".join(doctored) + "\n")
        config = json.loads((workspace / "train_cfg.json").read_text())
        config["train_data"] = str(data)
        config["out_dir"] = str(tmp_path / "out")
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        assert main(["train", "--config", str(tmp_path / "cfg.json")]) == 4


class TestThreads:
    def test_env_var_parsed(self, monkeypatch):
        from chadkit.cli import max_workers
        monkeypatch.setenv("CHADKIT_THREADS", "4")
        assert max_workers() == 4
        monkeypatch.setenv("CHADKIT_THREADS", "junk")
        from chadkit.errors import ConfigError
        with pytest.raises(ConfigError):
            max_workers()

    def test_threaded_eval_matches_sequential(self, workspace, tmp_path,
                                              monkeypatch):
        config = {"model": str(workspace / "run/model.chad"),
                  "test_data": str(workspace / "train.csv"),
                  "anomaly_fraction": 0.2, "seeds": [0, 1, 2],
                  "out_dir": str(tmp_path / "seq")}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        monkeypatch.setenv("CHADKIT_THREADS", "1")
        assert main(["eval", "--config", str(tmp_path / "cfg.json")]) == 0
        config["out_dir"] = str(tmp_path / "par")
        (tmp_path / "cfg2.json").write_text(json.dumps(config))
        monkeypatch.setenv("CHADKIT_THREADS", "3")
        assert main(["eval", "--config", str(tmp_path / "cfg2.json")]) == 0
        a = json.loads((tmp_path / "seq/eval_report.json").read_text())
        b = json.loads((tmp_path / "par/eval_report.json").read_text())
        assert a["ap_per_seed"] == b["ap_per_seed"]
