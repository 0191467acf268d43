import json
from pathlib import Path

import jsonschema
import pytest

from rapidrisk.report import (
    SCHEMA_PATH,
    AssessmentReport,
    OutputError,
    describe_inputs,
    file_digest,
    high_risk_records,
    read_flags,
    record_rows,
    render_details,
    render_summary,
    result_block,
    write_records,
)
from rapidrisk.risk import StabilisedRelative, rapid_categorical, rapid_continuous
from rapidrisk.uncertainty import wilson_interval

from .samples.data import TOY_INCOMES, TOY_PREDICTED_INCOMES


@pytest.fixture
def toy_result(toy_categorical):
    probs, y_true, baselines, classes = toy_categorical
    return rapid_categorical(probs, y_true, baselines, 0.3, classes)


def schema():
    return json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))


class TestDigest:
    def test_that_it_is_the_sha256_of_the_bytes(self, tmp_path: Path):
        p = tmp_path / "abc.txt"
        p.write_bytes(b"abc")
        assert file_digest(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"

    def test_that_inputs_are_described_by_path_and_digest(self, tmp_path: Path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        a.write_text("x\n1\n")
        b.write_text("x\n2\n")
        inputs = describe_inputs(original=a, released=[a, b], probs_in=None)
        assert set(inputs) == {"original", "released"}
        assert inputs["original"]["path"] == str(a)
        assert len(inputs["released"]) == 2
        assert inputs["released"][1]["sha256"] == file_digest(b)


class TestRendering:
    def test_that_the_summary_reads_naturally(self, toy_result):
        text = render_summary(toy_result)
        assert text.splitlines() == [
            "Risk level: 33.3 %",
            "Records at risk: 1 / 3",
            "Threshold (tau): 0.3",
        ]

    def test_that_continuous_summaries_name_epsilon(self):
        result = rapid_continuous(TOY_PREDICTED_INCOMES, TOY_INCOMES, 0.1, StabilisedRelative(1e-9))
        assert render_summary(result).splitlines()[2] == "Threshold (epsilon): 0.1"
        assert "Error metric: stabilised" in render_details(result)

    def test_that_details_add_context(self, toy_result):
        text = render_details(toy_result)
        assert "Evaluation mode: all_records" in text
        assert "Attacker accuracy: 1.000" in text

    def test_that_high_risk_records_come_first(self, toy_result):
        ranked = high_risk_records(toy_result.with_threshold(0.1))
        assert [rec.row for rec in ranked] == [1, 0]
        assert high_risk_records(toy_result.with_threshold(0.1), limit=1)[0].row == 1

    def test_that_closest_predictions_rank_first_for_continuous_targets(self):
        result = rapid_continuous(TOY_PREDICTED_INCOMES, TOY_INCOMES, 0.2, StabilisedRelative(1e-9))
        assert [rec.row for rec in high_risk_records(result, None)] == [0, 1, 2]


class TestRecordTables:
    def test_that_jsonl_tables_round_trip_flags(self, toy_result, tmp_path: Path):
        p = tmp_path / "records.jsonl"
        write_records(record_rows(toy_result, family="cart"), p)
        lines = p.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 3
        assert json.loads(lines[1])["family"] == "cart"
        assert read_flags(p) == {0: False, 1: True, 2: False}

    def test_that_csv_tables_round_trip_flags(self, toy_result, tmp_path: Path):
        p = tmp_path / "records.csv"
        write_records(record_rows(toy_result), p)
        header = p.read_text(encoding="utf-8").splitlines()[0]
        assert header == "row,true_value,prediction,g,b,r,at_risk"
        assert read_flags(p) == {0: False, 1: True, 2: False}

    def test_that_bad_tables_are_rejected(self, tmp_path: Path):
        with pytest.raises(OutputError):
            write_records([], tmp_path / "empty.csv")
        p = tmp_path / "other.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(OutputError, match="row and at_risk"):
            read_flags(p)


class TestAssessmentReport:
    def _report(self, result, tmp_path: Path) -> AssessmentReport:
        data = tmp_path / "original.csv"
        data.write_text("x\n1\n")
        block = result_block(result, {"wilson": wilson_interval(result.n_at_risk, result.n_evaluated).to_dict()})
        return AssessmentReport(
            command="assess",
            inputs=describe_inputs(original=data),
            config={"tau": 0.3},
            results={"assessments": [{"family": "cart", "replicate": 0, **block}], "score": result.score},
            timing={"wall_clock_seconds": 1.25},
        )

    def test_that_reports_validate_against_the_published_schema(self, toy_result, tmp_path: Path):
        report = self._report(toy_result, tmp_path)
        jsonschema.validate(json.loads(report.dumps()), schema())

    def test_that_timing_is_the_only_varying_part(self, toy_result, tmp_path: Path):
        a = self._report(toy_result, tmp_path)
        b = self._report(toy_result, tmp_path)
        b.timing = {"wall_clock_seconds": 9.0}
        assert a.dumps() != b.dumps()
        assert a.dumps(include_timing=False) == b.dumps(include_timing=False)
        assert "timing" not in json.loads(a.dumps(include_timing=False))

    def test_that_reports_are_written_as_sorted_json(self, toy_result, tmp_path: Path):
        out = tmp_path / "report.json"
        self._report(toy_result, tmp_path).write(out)
        raw = json.loads(out.read_text(encoding="utf-8"))
        assert list(raw) == sorted(raw)
        assert raw["tool"]["name"] == "rapidrisk"
        assert raw["results"]["assessments"][0]["intervals"]["wilson"]["method"] == "wilson"

    def test_that_the_schema_rejects_incomplete_reports(self):
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(
                {
                    "tool": {"name": "rapidrisk", "version": "0", "command": "assess"},
                    "inputs": {},
                    "config": {},
                    "results": {"score": 0.5},
                    "records": None,
                },
                schema(),
            )
