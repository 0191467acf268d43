import json
import shlex
import sys
from pathlib import Path

import jsonschema
import pytest

from rapidrisk.cli import EXIT_CONFIGURATION, EXIT_DATA, EXIT_FOLD_FAILURES, EXIT_OK, main
from rapidrisk.dataset import write_csv
from rapidrisk.report import SCHEMA_PATH, file_digest

from .samples.data import csv_text, mapped_data


def validate(report_path: Path) -> dict:
    raw = json.loads(report_path.read_text(encoding="utf-8"))
    jsonschema.validate(raw, json.loads(SCHEMA_PATH.read_text(encoding="utf-8")))
    return raw


@pytest.fixture
def mapped_csv(tmp_path: Path) -> Path:
    p = tmp_path / "mapped.csv"
    write_csv(mapped_data(60), p)
    return p


@pytest.fixture
def toy_probs_csv(tmp_path: Path) -> Path:
    p = tmp_path / "probs.csv"
    p.write_text(
        csv_text(
            [
                ["row", "true_value", "p_healthy", "p_ill", "b"],
                [0, "healthy", 0.70, 0.30, 0.6],
                [1, "healthy", 0.85, 0.15, 0.6],
                [2, "healthy", 0.55, 0.45, 0.6],
            ]
        ),
        encoding="utf-8",
    )
    return p


def assess_args(mapped_csv: Path, *extra: str):
    return [
        "assess",
        "--original",
        str(mapped_csv),
        "--released",
        str(mapped_csv),
        "--qi",
        "zone",
        "--sensitive",
        "status",
        "--attacker",
        "cart",
        "--boot",
        "100",
        *extra,
    ]


class TestAssess:
    def test_that_precomputed_probabilities_are_scored(self, toy_probs_csv, tmp_path, capsys):
        report = tmp_path / "report.json"
        code = main(["assess", "--probs-in", str(toy_probs_csv), "--boot", "0", "--report", str(report)])
        assert code == EXIT_OK
        assert "Risk level: 33.3 %" in capsys.readouterr().out
        raw = validate(report)
        assert raw["results"]["score"] == pytest.approx(1 / 3)
        assert raw["inputs"]["probs_in"]["sha256"] == file_digest(toy_probs_csv)

    def test_that_a_full_assessment_writes_report_and_records(self, mapped_csv, tmp_path, capsys):
        report, records = tmp_path / "report.json", tmp_path / "records.jsonl"
        code = main(assess_args(mapped_csv, "--report", str(report), "--records-out", str(records)))
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "Records at risk: 60 / 60" in out
        raw = validate(report)
        assessment = raw["results"]["assessments"][0]
        assert assessment["family"] == "cart"
        assert set(assessment["intervals"]) == {"wilson", "clopper_pearson", "bootstrap"}
        assert raw["records"] == str(records)
        assert len(records.read_text(encoding="utf-8").splitlines()) == 60

    def test_that_several_attackers_get_an_envelope(self, mapped_csv, tmp_path):
        report = tmp_path / "report.json"
        args = assess_args(mapped_csv, "--attacker", "logistic", "--report", str(report))
        assert main(args) == EXIT_OK
        raw = validate(report)
        assert len(raw["results"]["assessments"]) == 2
        assert raw["results"]["envelope"][0]["max_score"] == 1.0

    def test_that_holdout_ids_limit_the_scored_records(self, mapped_csv, tmp_path, capsys):
        ids = tmp_path / "ids.csv"
        ids.write_text("row\n0\n3\n", encoding="utf-8")
        args = assess_args(mapped_csv, "--mode", "holdout", "--holdout-ids", str(ids))
        assert main(args) == EXIT_OK
        assert "Records at risk: 2 / 2" in capsys.readouterr().out

    def test_that_settings_files_supply_defaults(self, toy_probs_csv, tmp_path, capsys):
        config = tmp_path / "rapid.toml"
        config.write_text("[rapidrisk]\ntau = 0.2\nbootstrap = 0\n", encoding="utf-8")
        assert main(["--config", str(config), "assess", "--probs-in", str(toy_probs_csv)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "Threshold (tau): 0.2" in out
        assert "Records at risk: 2 / 3" in out

    def test_that_a_missing_sensitive_column_is_a_configuration_error(self, mapped_csv):
        args = ["assess", "--original", str(mapped_csv), "--released", str(mapped_csv)]
        assert main(args) == EXIT_CONFIGURATION

    def test_that_a_missing_file_is_a_data_error(self, mapped_csv, tmp_path):
        args = assess_args(mapped_csv)
        args[2] = str(tmp_path / "nope.csv")
        assert main(args) == EXIT_DATA


class TestCurve:
    def test_that_it_prints_a_curve(self, mapped_csv, capsys):
        args = assess_args(mapped_csv, "--grid", "0.2,0.9")
        args[0] = "curve"
        args.remove("--boot")
        args.remove("100")
        assert main(args) == EXIT_OK
        assert capsys.readouterr().out.splitlines() == ["threshold,score", "0.2,1.0", "0.9,0.0"]

    def test_that_an_empty_grid_is_a_configuration_error(self, mapped_csv):
        args = ["curve", "--original", str(mapped_csv), "--released", str(mapped_csv)]
        assert main(args + ["--sensitive", "status", "--grid", ","]) == EXIT_CONFIGURATION


class TestCv:
    def cv_args(self, mapped_csv, *extra):
        return [
            "cv",
            "--original",
            str(mapped_csv),
            "--qi",
            "zone",
            "--sensitive",
            "status",
            "--attacker",
            "cart",
            *extra,
        ]

    def test_that_it_reports_fold_scores(self, mapped_csv, tmp_path, capsys):
        report = tmp_path / "cv.json"
        assert main(self.cv_args(mapped_csv, "--k", "3", "--report", str(report))) == EXIT_OK
        out = capsys.readouterr().out
        assert "Mean RAPID: 1.0000" in out
        raw = validate(report)
        assert raw["results"]["k"] == 3
        assert raw["config"]["synthesizer"] == "internal-cart"

    def test_that_k_one_is_a_configuration_error(self, mapped_csv):
        assert main(self.cv_args(mapped_csv, "--k", "1")) == EXIT_CONFIGURATION

    def test_that_synth_cmd_is_the_only_synthesizer_option(self, mapped_csv, capsys):
        assert main(self.cv_args(mapped_csv, "--synth", "internal-cart")) == EXIT_CONFIGURATION
        assert "unrecognized arguments: --synth" in capsys.readouterr().err

    def test_that_synthesizer_failures_exit_with_four(self, mapped_csv):
        command = shlex.join([sys.executable, "-c", "import sys; sys.exit(1)"])
        args = self.cv_args(mapped_csv, "--k", "2", "--synth-cmd", command)
        assert main(args) == EXIT_FOLD_FAILURES


class TestSimulateAndSweep:
    def test_that_simulate_writes_csv(self, capsys):
        assert main(["simulate", "--kappa", "0", "--n", "100", "--seed", "3"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 101
        assert lines[0] == "gender,age,education,income,health,disease_status"

    def test_that_sweep_summarizes_each_kappa(self, capsys):
        args = ["sweep", "--kappas", "0,2", "--n", "100", "--reps", "1", "--attacker", "cart"]
        assert main(args) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "kappa,mean_rapid,sd,mean_accuracy"
        assert len(lines) == 3

    def test_that_synthesize_writes_each_replicate(self, mapped_csv, tmp_path, capsys):
        out_dir = tmp_path / "synthetic"
        args = ["synthesize", "--original", str(mapped_csv), "--m", "2", "--out-dir", str(out_dir)]
        assert main(args) == EXIT_OK
        assert sorted(p.name for p in out_dir.iterdir()) == ["synthetic_1.csv", "synthetic_2.csv"]
        assert len(capsys.readouterr().out.splitlines()) == 2


class TestAttribute:
    def test_that_it_needs_a_records_table(self, mapped_csv):
        assert main(["attribute", "--original", str(mapped_csv)]) == EXIT_CONFIGURATION

    def test_that_it_fits_and_stratifies(self, tmp_path, capsys):
        original = tmp_path / "groups.csv"
        original.write_text(csv_text([["group"]] + [["a"]] * 20 + [["b"]] * 20), encoding="utf-8")
        flags = [True] * 16 + [False] * 4 + [True] * 4 + [False] * 16
        records = tmp_path / "records.csv"
        records.write_text(
            csv_text([["row", "at_risk"]] + [[i, f] for i, f in enumerate(flags)]), encoding="utf-8"
        )
        strata = tmp_path / "strata.csv"
        args = [
            "attribute",
            "--original",
            str(original),
            "--records",
            str(records),
            "--qi",
            "group",
            "--by",
            "group",
            "--strata-out",
            str(strata),
        ]
        assert main(args) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "term,estimate,std_error,z"
        assert lines[2].startswith("group[b],")
        assert strata.read_text(encoding="utf-8").splitlines()[1].startswith("a,20,16,0.8,")


class TestCalibrate:
    def test_that_it_selects_a_threshold(self, mapped_csv, tmp_path, capsys):
        report = tmp_path / "calibrate.json"
        args = assess_args(mapped_csv, "--n-perm", "20", "--report", str(report))
        args[0] = "calibrate"
        args.remove("--boot")
        args.remove("100")
        assert main(args) == EXIT_OK
        assert "Selected threshold (tau): 0.05" in capsys.readouterr().out
        raw = validate(report)
        assert raw["results"]["found"] is True
