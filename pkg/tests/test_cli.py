"""Tests for the calrisk.cli module."""

import csv
import io
import json

import pytest

from calrisk.cli import EXIT_DATA_ERROR, EXIT_OK, EXIT_USAGE_ERROR, UsageError, main, resolve_seed


FIVE_ROW_TEXT = (
    "true_label,pred_label,conf\n"
    "1,1,0.9\n"
    "0,0,0.8\n"
    "1,0,0.6\n"
    "0,1,0.7\n"
    "1,1,0.5\n"
)


def create_predictions_file(tmp_path, text: str = FIVE_ROW_TEXT, name: str = "predictions.csv"):
    """Write a prediction file and return its path as a string."""
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def create_binary_text(n: int = 40) -> str:
    """Binary predictions with scores spread over (0, 1) and alternating labels."""
    lines = ["true_label,pred_label,conf"]
    for i in range(n):
        score = (i + 0.5) / n
        true_label = int(i % 2 == 0 or score > 0.7)
        if score >= 0.5:
            lines.append(f"{true_label},1,{score!r}")
        else:
            lines.append(f"{true_label},0,{1.0 - score!r}")
    return "\n".join(lines) + "\n"


def last_json_line(text: str) -> dict:
    """Parse the last non-empty line of a stream as JSON."""
    return json.loads([line for line in text.splitlines() if line.strip()][-1])


class TestUsage:
    """Tests for argument handling and exit codes."""

    def test_no_command(self, capsys):
        """Test a missing subcommand is a usage error."""
        assert main([]) == EXIT_USAGE_ERROR

    def test_missing_required(self, capsys):
        """Test a missing required option is a usage error."""
        assert main(["eval"]) == EXIT_USAGE_ERROR

    @pytest.mark.parametrize(
        "argv",
        [
            ["eval", "--input", "x.csv", "--bins", "0"],
            ["eval", "--input", "x.csv", "--epsilon", "0.5"],
            ["synth", "--dist", "gamma", "--mode", "perfect", "--n", "10"],
            ["synth", "--dist", "uniform", "--mode", "perfect", "--n", "0"],
            ["adversarial", "--n", "1", "--lambda", "10", "--out", "x.csv"],
            ["adversarial", "--n", "10", "--lambda", "-1", "--out", "x.csv"],
            ["calibrate", "--input", "x.csv", "--method", "platt", "--out", "y.csv", "--split", "1.0"],
        ],
    )
    def test_invalid_values(self, argv, capsys):
        """Test out-of-range values are usage errors."""
        assert main(argv) == EXIT_USAGE_ERROR

    def test_version(self, capsys):
        """Test --version exits cleanly."""
        assert main(["--version"]) == EXIT_OK
        assert "calrisk" in capsys.readouterr().out


class TestResolveSeed:
    """Tests for resolve_seed."""

    def test_flag_wins(self, monkeypatch):
        """Test an explicit seed overrides the environment."""
        monkeypatch.setenv("CALRISK_SEED", "5")
        assert resolve_seed(9) == 9

    def test_environment(self, monkeypatch):
        """Test CALRISK_SEED is used without a flag."""
        monkeypatch.setenv("CALRISK_SEED", "5")
        assert resolve_seed(None) == 5

    def test_default(self, monkeypatch):
        """Test the default seed without flag or environment."""
        monkeypatch.delenv("CALRISK_SEED", raising=False)
        assert resolve_seed(None) == 42

    @pytest.mark.parametrize("raw", ["abc", "-3"])
    def test_invalid_environment(self, monkeypatch, raw):
        """Test a malformed CALRISK_SEED raises UsageError."""
        monkeypatch.setenv("CALRISK_SEED", raw)
        with pytest.raises(UsageError):
            resolve_seed(None)


class TestEvalCommand:
    """Tests for the eval subcommand."""

    def test_json_matches_hand_values(self, tmp_path, capsys):
        """Test JSON output against the hand-computed five-row values."""
        path = create_predictions_file(tmp_path)
        assert main(["eval", "--input", path, "--format", "json"]) == EXIT_OK

        data = json.loads(capsys.readouterr().out)
        risk = data["risk"]
        assert risk["n"] == 5
        assert abs(risk["acc"] - 0.6) < 1e-9
        assert abs(risk["cwa"] - 2.2 / 3.5) < 1e-9
        assert abs(risk["gain"] - (2.2 / 3.5 - 0.6) / 0.4) < 1e-9
        assert abs(risk["csr"] - (1 / 0.4 + 1 / 0.3) / 5) < 1e-9
        assert abs(risk["ece"] - 0.42) < 1e-9
        assert abs(risk["brier"] - 0.23) < 1e-9
        assert data["provenance"]["input"] == path
        assert data["provenance"]["m_bins"] == 15

    def test_text_output(self, tmp_path, capsys):
        """Test the text report lists the risk indicators."""
        assert main(["eval", "--input", create_predictions_file(tmp_path)]) == EXIT_OK
        out = capsys.readouterr().out
        for label in ("Acc", "cwA", "gain", "CSR", "σ_CSR", "P_risk", "ECE", "Brier"):
            assert label in out

    def test_csv_output(self, tmp_path, capsys):
        """Test the CSV report has one data row."""
        assert main(["eval", "--input", create_predictions_file(tmp_path), "--format", "csv"]) == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 1
        assert float(rows[0]["acc"]) == 0.6

    def test_bins_option(self, tmp_path, capsys):
        """Test --bins changes ECE."""
        path = create_predictions_file(tmp_path)
        assert main(["eval", "--input", path, "--format", "json", "--bins", "1"]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert abs(data["risk"]["ece"] - 0.1) < 1e-9

    def test_roc_out(self, tmp_path, capsys):
        """Test curve files are written per class."""
        path = create_predictions_file(tmp_path)
        out_dir = tmp_path / "curves"
        assert main(["eval", "--input", path, "--roc-out", str(out_dir)]) == EXIT_OK
        names = sorted(p.name for p in out_dir.iterdir())
        assert names == ["class_0_cwroc.csv", "class_0_roc.csv", "class_1_cwroc.csv", "class_1_roc.csv"]
        assert (out_dir / "class_1_roc.csv").read_text().startswith("x,y\n0.0,0.0\n")

    def test_missing_file(self, tmp_path, capsys):
        """Test a missing input is a data error with a JSON message."""
        assert main(["eval", "--input", str(tmp_path / "absent.csv")]) == EXIT_DATA_ERROR
        error = last_json_line(capsys.readouterr().err)
        assert error["error"] == "FileNotFoundError"

    def test_malformed_row(self, tmp_path, capsys):
        """Test a malformed row reports its line number."""
        path = create_predictions_file(tmp_path, "true_label,pred_label,conf\n1,1,0.9\n1,1,2.0\n")
        assert main(["eval", "--input", path]) == EXIT_DATA_ERROR
        error = last_json_line(capsys.readouterr().err)
        assert error["error"] == "ParseError"
        assert error["line"] == 3

    def test_inconsistent_row(self, tmp_path, capsys):
        """Test a conf/conf_pred mismatch is a ConsistencyError."""
        text = "true_label,pred_label,conf,conf_0,conf_1\n1,1,0.9,0.5,0.5\n"
        path = create_predictions_file(tmp_path, text)
        assert main(["eval", "--input", path]) == EXIT_DATA_ERROR
        error = last_json_line(capsys.readouterr().err)
        assert error["error"] == "ConsistencyError"
        assert error["line"] == 2


class TestAdversarialCommand:
    """Tests for the adversarial subcommand."""

    def test_reference_instance(self, tmp_path, capsys, monkeypatch):
        """Test the written file has ECE < 0.01 and CSR > 1000."""
        monkeypatch.delenv("CALRISK_SEED", raising=False)
        out = tmp_path / "adv.csv"
        argv = ["adversarial", "--n", "100", "--lambda", "1000", "--bins", "15", "--out", str(out)]
        assert main(argv) == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["ece"] < 0.01
        assert summary["csr"] > 1000.0
        assert summary["seed"] == 42

        assert main(["eval", "--input", str(out), "--format", "json"]) == EXIT_OK
        risk = json.loads(capsys.readouterr().out)["risk"]
        assert risk["n"] == 100
        assert risk["ece"] < 0.01
        assert risk["csr"] > 1000.0

    def test_clipping_conflict(self, tmp_path, capsys):
        """Test a coarse epsilon is a data error carrying max_lambda."""
        argv = [
            "adversarial", "--n", "100", "--lambda", "1000", "--epsilon", "0.001",
            "--out", str(tmp_path / "adv.csv"),
        ]
        assert main(argv) == EXIT_DATA_ERROR
        error = last_json_line(capsys.readouterr().err)
        assert error["error"] == "ClippingConflictError"
        assert 0.0 < error["max_lambda"] <= 5.0
        assert not (tmp_path / "adv.csv").exists()


class TestSynthCommand:
    """Tests for the synth subcommand."""

    def test_text_table(self, capsys):
        """Test the summary table header and one row."""
        argv = ["synth", "--dist", "uniform", "--mode", "perfect", "--n", "100", "--reps", "3", "--seed", "1"]
        assert main(argv) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].split()[:4] == ["Distribution", "Mode", "N", "Acc"]
        assert lines[2].startswith("uniform")
        assert len(lines) == 3

    def test_csv_all_modes(self, capsys):
        """Test 'all' expands in registry order."""
        argv = ["synth", "--dist", "tight_lo", "--mode", "all", "--n", "50", "--reps", "2", "--format", "csv"]
        assert main(argv) == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 8
        assert rows[0]["Mode"] == "random_half"
        assert rows[-1]["Mode"] == "random_under"

    def test_environment_seed(self, monkeypatch, capsys):
        """Test CALRISK_SEED gives the same result as --seed."""
        base = ["synth", "--dist", "bell", "--mode", "perfect", "--n", "100", "--reps", "3", "--format", "csv"]
        assert main(base + ["--seed", "7"]) == EXIT_OK
        with_flag = capsys.readouterr().out

        monkeypatch.setenv("CALRISK_SEED", "7")
        assert main(base) == EXIT_OK
        assert capsys.readouterr().out == with_flag

    def test_invalid_environment_seed(self, monkeypatch, capsys):
        """Test a malformed CALRISK_SEED is a usage error."""
        monkeypatch.setenv("CALRISK_SEED", "seven")
        argv = ["synth", "--dist", "bell", "--mode", "perfect", "--n", "10", "--reps", "1"]
        assert main(argv) == EXIT_USAGE_ERROR
        assert "CALRISK_SEED" in capsys.readouterr().err

    def test_workers_same_output(self, capsys):
        """Test worker count does not change the table."""
        base = ["synth", "--dist", "skew_high", "--mode", "random_over", "--n", "100", "--reps", "4",
                "--seed", "3", "--format", "csv"]
        assert main(base) == EXIT_OK
        serial = capsys.readouterr().out
        assert main(base + ["--workers", "3"]) == EXIT_OK
        assert capsys.readouterr().out == serial

    def test_directions_table(self, capsys):
        """Test the direction counts cover every distribution once."""
        argv = ["synth", "--dist", "all", "--mode", "perfect", "--n", "100", "--reps", "2",
                "--seed", "5", "--format", "csv", "--table", "directions"]
        assert main(argv) == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 1
        assert rows[0]["Mode"] == "perfect"
        counts = [int(rows[0][c]) for c in ("cwAUC>AUC", "cwAUC<AUC", "cwAUC=AUC", "undefined")]
        assert sum(counts) == 10

    def test_diffs_table(self, capsys):
        """Test the difference table carries the AUC delta."""
        argv = ["synth", "--dist", "uniform", "--mode", "perfect", "--n", "200", "--reps", "2",
                "--seed", "5", "--format", "csv", "--table", "diffs"]
        assert main(argv) == EXIT_OK
        row = next(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert abs(float(row["ΔAUC"]) - (float(row["cwAUC"]) - float(row["AUC"]))) < 1e-12
        assert abs(float(row["ΔcwA"]) - (float(row["cwA"]) - float(row["Acc"]))) < 1e-12

    def test_unknown_table(self, capsys):
        """Test an unknown table name is a usage error."""
        argv = ["synth", "--dist", "bell", "--mode", "perfect", "--n", "10", "--table", "pivot"]
        assert main(argv) == EXIT_USAGE_ERROR


class TestCalibrateCommand:
    """Tests for the calibrate subcommand."""

    @pytest.mark.parametrize("method", ["isotonic", "platt"])
    def test_json_summary(self, tmp_path, capsys, method):
        """Test the JSON comparison and the calibrated file."""
        path = create_predictions_file(tmp_path, create_binary_text())
        out = tmp_path / "calibrated.csv"
        argv = ["calibrate", "--input", path, "--method", method, "--out", str(out),
                "--seed", "3", "--format", "json"]
        assert main(argv) == EXIT_OK

        summary = json.loads(capsys.readouterr().out)
        assert summary["method"] == method
        assert summary["fit_n"] == 20
        assert summary["eval_n"] == 20
        assert set(summary["risk"]) == {"raw", method}
        assert out.exists()
        header = out.read_text().splitlines()[0]
        assert header == "true_label,pred_label,conf,conf_0,conf_1"

    def test_text_comparison(self, tmp_path, capsys):
        """Test the text comparison lists both regimes."""
        path = create_predictions_file(tmp_path, create_binary_text())
        argv = ["calibrate", "--input", path, "--method", "platt", "--out", str(tmp_path / "c.csv")]
        assert main(argv) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[2].startswith("raw")
        assert lines[3].startswith("platt")

    def test_reversed_scores_platt_rejected(self, tmp_path, capsys):
        """Test Platt on scores ranked backwards is a data error, not a flipped AUC."""
        lines = ["true_label,pred_label,conf"]
        for i in range(40):
            score = (i + 0.5) / 40
            pred = int(score >= 0.5)
            conf = score if pred == 1 else 1.0 - score
            lines.append(f"{int(score < 0.5)},{pred},{conf!r}")
        path = create_predictions_file(tmp_path, "\n".join(lines) + "\n")
        out = tmp_path / "c.csv"
        argv = ["calibrate", "--input", path, "--method", "platt", "--out", str(out), "--seed", "3"]
        assert main(argv) == EXIT_DATA_ERROR
        assert last_json_line(capsys.readouterr().err)["error"] == "DecreasingPlattFitError"
        assert not out.exists()

    def test_multiclass_rejected(self, tmp_path, capsys):
        """Test a three-class file is a data error."""
        text = "true_label,pred_label,conf\n0,0,0.5\n2,1,0.6\n1,1,0.7\n2,2,0.8\n"
        path = create_predictions_file(tmp_path, text)
        argv = ["calibrate", "--input", path, "--method", "platt", "--out", str(tmp_path / "c.csv")]
        assert main(argv) == EXIT_DATA_ERROR
        assert last_json_line(capsys.readouterr().err)["error"] == "UnsupportedMulticlassError"
