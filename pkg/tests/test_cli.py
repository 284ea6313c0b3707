"""End-to-end CLI coverage: every subcommand, config-file precedence, exit
codes, and byte-stable outputs."""

import json
from pathlib import Path

import pytest

from nsanet.cli import main

FIXTURE = Path(__file__).parent / "fixtures" / "blobs3.csv"


def run(argv):
    return main([str(a) for a in argv])


class TestGenXor:
    def test_writes_csv_and_provenance(self, tmp_path):
        out = tmp_path / "d"
        assert run(["gen-xor", "--xor", 2, 3, 40, "--seed", 5, "--out", out]) == 0
        assert (out / "data.csv").exists()
        prov = json.loads((out / "provenance.json").read_text())
        assert prov["kind"] == "xor" and prov["seed"] == 5

    def test_reruns_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run(["gen-xor", "--xor", 2, 3, 40, "--seed", 5, "--out", a])
        run(["gen-xor", "--xor", 2, 3, 40, "--seed", 5, "--out", b])
        assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()


class TestTrainEval:
    def test_train_then_eval_round_trip(self, tmp_path):
        out = tmp_path / "run"
        code = run([
            "train", "--xor", 2, 2, 200, "--test-n", 100, "--nodes", 8,
            "--epochs", 20, "--seed", 1, "--out", out,
        ])
        assert code == 0
        assert (out / "model.json").exists()
        report = json.loads((out / "eval.json").read_text())
        assert set(report) >= {"train_loss", "test_auc", "n_train"}
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["seeds"] == [1]

        out2 = tmp_path / "eval"
        code = run([
            "eval", "--model", out / "model.json", "--xor", 2, 2, 200,
            "--test-n", 100, "--seed", 1, "--out", out2,
        ])
        assert code == 0
        again = json.loads((out2 / "eval.json").read_text())
        assert again["train_loss"] == report["train_loss"]

    def test_csv_training_with_split_flags(self, tmp_path):
        out = tmp_path / "csvrun"
        code = run([
            "train", "--data", FIXTURE, "--stratified", "--standardize",
            "--nodes", 8, "--epochs", 20, "--seed", 2, "--out", out,
        ])
        assert code == 0
        report = json.loads((out / "eval.json").read_text())
        assert report["train_auc"] is None  # 3 classes: no binary AUC

    def test_config_file_overridden_by_flags(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"epochs": 2, "batch_size": 16, "seed": 9, "lr": 0.01}))
        out = tmp_path / "o"
        code = run([
            "train", "--xor", 2, 2, 64, "--test-n", 50, "--nodes", 4,
            "--config", cfg_file, "--epochs", 3, "--out", out,
        ])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["epochs"] == 3       # flag wins
        assert manifest["config"]["lr"] == 0.01        # file value kept
        assert manifest["config"]["seed"] == 9

    def test_missing_data_source_fails_with_diagnostic(self, tmp_path, capsys):
        code = run(["train", "--nodes", 4, "--out", tmp_path])
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "NsanetError"


class TestPruneCommands:
    def test_nsa_outputs(self, tmp_path):
        out = tmp_path / "nsa"
        code = run([
            "nsa", "--xor", 2, 3, 150, "--test-n", 80, "--start-nodes", 16,
            "--nodes", 4, "--epochs-iter", 12, "--seed", 3, "--out", out,
        ])
        assert code == 0
        trace = (out / "trace.csv").read_text().splitlines()
        assert trace[0] == "epoch,loss,node_count,feature_count,feature_ids"
        assert len(trace) == 13
        model = json.loads((out / "model.json").read_text())
        assert model["h"] == 4

    def test_fsa_nsa_reaches_requested_sparsity(self, tmp_path):
        out = tmp_path / "fsa"
        code = run([
            "fsa-nsa", "--xor", 2, 6, 200, "--test-n", 80, "--start-nodes", 16,
            "--nodes", 4, "--features", 2, "--epochs-iter", 20, "--seed", 3, "--out", out,
        ])
        assert code == 0
        model = json.loads((out / "model.json").read_text())
        assert model["h"] == 4 and model["p"] == 2
        assert len(model["feature_ids"]) == 2


class TestStudies:
    def test_sweep_h_csv(self, tmp_path):
        out = tmp_path / "sw"
        code = run([
            "sweep-h", "--xor", 2, 2, 100, "--test-n", 50, "--h-grid", "2,4",
            "--restarts", 2, "--epochs", 5, "--seed", 4, "--out", out,
        ])
        assert code == 0
        lines = (out / "sweep_h.csv").read_text().splitlines()
        assert lines[0] == "h,status,loss,train_auc,test_auc"
        assert len(lines) == 3

    def test_sweep_n_csv(self, tmp_path):
        out = tmp_path / "swn"
        code = run([
            "sweep-n", "--k", 2, "--p", 4, "--n-grid", "40,80", "--h-true", 4,
            "--h-full", 4, "--start-nodes", 8, "--epochs-iter", 6,
            "--restarts", 2, "--epochs", 5, "--seed", 4, "--out", out,
        ])
        assert code == 0
        lines = (out / "sweep_n.csv").read_text().splitlines()
        assert len(lines) == 1 + 3 * 2  # header + |series| x |n grid|

    def test_restarts_csv_sorted(self, tmp_path):
        out = tmp_path / "rs"
        code = run([
            "restarts", "--xor", 2, 2, 100, "--test-n", 50, "--nodes", 4,
            "--restarts", 3, "--epochs", 5, "--seed", 4, "--out", out,
        ])
        assert code == 0
        lines = (out / "restarts.csv").read_text().splitlines()[1:]
        losses = [float(line.split(",")[1]) for line in lines]
        assert losses == sorted(losses)

    def test_hit_time_outputs(self, tmp_path):
        out = tmp_path / "ht"
        code = run([
            "hit-time", "--k", 2, "--n", 100, "--p-grid", "2", "--nodes", 4,
            "--threshold", 0.0, "--max-restarts", 2, "--trials", 2,
            "--epochs", 2, "--seed", 4, "--out", out,
        ])
        assert code == 0
        summary = json.loads((out / "hit_time_summary.json").read_text())
        assert summary["2"]["mean_restarts"] == 1.0
        lines = (out / "hit_time.csv").read_text().splitlines()
        assert lines[0] == "p,trial,restarts,censored"
        assert len(lines) == 3

    def test_grid_search_report(self, tmp_path):
        out = tmp_path / "gs"
        code = run([
            "grid-search", "--data", FIXTURE, "--stratified", "--standardize",
            "--h-grid", "8", "--decay-grid", "0.0001", "--batch-grid", "32",
            "--folds", 2, "--runs", 1, "--epochs", 10, "--seed", 5, "--out", out,
        ])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["best"]["h"] == 8
        assert 0.0 <= report["test_accuracy_mean"] <= 1.0

    def test_schedule_csv_anchors(self, tmp_path):
        out = tmp_path / "sch"
        code = run(["schedule", "--out", out])
        assert code == 0
        lines = (out / "schedule.csv").read_text().splitlines()
        assert lines[0] == "epoch,h_e,p_e"
        table = {int(r.split(",")[0]): (int(r.split(",")[1]), int(r.split(",")[2])) for r in lines[1:]}
        assert table[75] == (1024, 15)
        assert table[180][1] == 15
        assert table[100][0] == 219
        assert all(table[e][0] == 128 for e in range(188, 301))


class TestUsageErrors:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run(["frobnicate"])
        assert exc.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["--version"])
        assert exc.value.code == 0
