"""CLI surface: subcommands, formats, exit codes, end-to-end determinism."""

import json
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "gestalteval"]


def run_cli(*args, cwd=None):
    return subprocess.run(CLI + list(args), capture_output=True, text=True, cwd=cwd)


@pytest.fixture(scope="module")
def synth_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "synthetic.ggfs"
    result = run_cli(
        "synth", "--out", str(path), "--classes", "6", "--dim", "8",
        "--images-per-class", "20", "--patches", "6",
        "--class-sep", "0.6", "--class-spread", "0.1", "--patch-std", "1.0",
        "--seed", "5",
    )
    assert result.returncode == 0, result.stderr
    return path


class TestSynthAndValidate:
    def test_synth_reports_paths(self, synth_dataset):
        assert synth_dataset.exists()
        assert synth_dataset.with_name(synth_dataset.name + ".truth.jsonl").exists()

    def test_validate_accepts(self, synth_dataset):
        result = run_cli("validate", "--dataset", str(synth_dataset))
        assert result.returncode == 0
        summary = json.loads(result.stdout)
        assert summary["valid"] is True
        assert summary["records"] == 120
        assert summary["min_patches"] == 6

    def test_validate_rejects_garbage(self, tmp_path):
        bad = tmp_path / "bad.ggfs"
        bad.write_bytes(b"XXXX" + b"\x00" * 32)
        result = run_cli("validate", "--dataset", str(bad))
        assert result.returncode == 3
        assert "bad magic" in result.stderr

    def test_missing_file_is_data_error(self):
        result = run_cli("validate", "--dataset", "/nonexistent/x.ggfs")
        assert result.returncode == 3


class TestEval:
    def _eval_args(self, dataset, seed="7"):
        return [
            "eval", "--dataset", str(dataset), "--n-way", "5", "--k-shot", "1",
            "--q-query", "5", "--groups", "2", "--episodes", "25",
            "--lambda", "0.5", "--patches", "3", "--seed", seed,
        ]

    def test_eval_emits_report(self, synth_dataset):
        result = run_cli(*self._eval_args(synth_dataset))
        assert result.returncode == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["groups"] == 2
        assert len(report["per_group_accuracy"]) == 2
        assert 0.0 <= report["mean_accuracy"] <= 100.0
        assert report["config"]["lambda"] == 0.5

    def test_same_seed_byte_identical(self, synth_dataset):
        a = run_cli(*self._eval_args(synth_dataset))
        b = run_cli(*self._eval_args(synth_dataset))
        assert a.stdout == b.stdout

    def test_out_file(self, synth_dataset, tmp_path):
        out = tmp_path / "report.json"
        result = run_cli(*self._eval_args(synth_dataset), "--out", str(out))
        assert result.returncode == 0
        assert json.loads(out.read_text())["seed"] == 7

    def test_invalid_lambda_is_config_error(self, synth_dataset):
        result = run_cli("eval", "--dataset", str(synth_dataset), "--lambda", "1.5",
                         "--groups", "1", "--episodes", "5")
        assert result.returncode == 2
        assert "lambda" in result.stderr

    def test_unknown_flag_exits_2(self, synth_dataset):
        result = run_cli("eval", "--dataset", str(synth_dataset), "--bogus", "1")
        assert result.returncode == 2

    def test_capacity_is_data_error(self, synth_dataset):
        result = run_cli("eval", "--dataset", str(synth_dataset), "--n-way", "99",
                         "--groups", "1", "--episodes", "5")
        assert result.returncode == 3

    def test_per_dimension_lambda_csv(self, synth_dataset):
        lam = ",".join(["0.5"] * 8)
        result = run_cli("eval", "--dataset", str(synth_dataset), "--lambda", lam,
                         "--groups", "1", "--episodes", "10", "--q-query", "3")
        assert result.returncode == 0, result.stderr
        assert json.loads(result.stdout)["config"]["lambda"] == [0.5] * 8


class TestTables:
    def test_ablate_json(self, synth_dataset):
        result = run_cli("ablate", "--dataset", str(synth_dataset), "--groups", "1",
                         "--episodes", "15", "--q-query", "3", "--patches", "3")
        assert result.returncode == 0, result.stderr
        payload = json.loads(result.stdout)
        assert [(r["apply_support"], r["apply_query"]) for r in payload["rows"]] == [
            [False, False], [True, False], [False, True], [True, True],
        ] or [(r["apply_support"], r["apply_query"]) for r in payload["rows"]] == [
            (False, False), (True, False), (False, True), (True, True),
        ]

    def test_sweep_lambda_csv(self, synth_dataset):
        result = run_cli(
            "sweep-lambda", "--dataset", str(synth_dataset), "--groups", "1",
            "--episodes", "10", "--q-query", "3", "--patches", "3",
            "--lambda-grid", "0.0,0.5,1.0", "--m-values", "1,3",
            "--format", "csv",
        )
        assert result.returncode == 0, result.stderr
        lines = result.stdout.strip().splitlines()
        assert lines[0] == "lambda,m,accuracy,ci95"
        assert len(lines) == 1 + 6

    def test_sweep_patches_csv(self, synth_dataset):
        result = run_cli(
            "sweep-patches", "--dataset", str(synth_dataset), "--groups", "1",
            "--episodes", "10", "--q-query", "3",
            "--m-values", "0,1,3", "--format", "csv",
        )
        assert result.returncode == 0, result.stderr
        lines = result.stdout.strip().splitlines()
        assert lines[0] == "m,lambda,accuracy,ci95"
        assert len(lines) == 4

    def test_variance_json(self, synth_dataset):
        result = run_cli(
            "variance", "--dataset", str(synth_dataset), "--groups", "1",
            "--episodes", "10", "--q-query", "3", "--patches", "3",
            "--lambda-grid", "0.0,0.5,1.0",
        )
        assert result.returncode == 0, result.stderr
        payload = json.loads(result.stdout)
        assert payload["variance_fused"] < payload["variance_totality"]
        assert payload["best_lambda"] in (0.0, 0.5, 1.0)
