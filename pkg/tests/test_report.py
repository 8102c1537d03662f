from __future__ import annotations

import json
from fractions import Fraction

import pytest

from nl2sql_eval.report import (
    ReportError,
    cell,
    emit,
    parse_cell,
    render_fraction,
)

F = Fraction


class TestRendering:
    def test_percent_two_decimals(self):
        assert render_fraction(F(3, 5), "percent") == "60.00%"
        assert render_fraction(F(1, 3), "percent") == "33.33%"

    def test_percent_rounds_half_to_even(self):
        assert render_fraction(F(125, 10000), "percent") == "1.25%"  # exact
        assert render_fraction(F(12345, 1000000), "percent") == "1.23%"  # ...45 -> even
        assert render_fraction(F(12355, 1000000), "percent") == "1.24%"  # ...55 -> even

    def test_cost_four_decimals(self):
        assert render_fraction(F(23, 100), "cost") == "0.2300"
        assert render_fraction(F(1, 3), "cost") == "0.3333"

    def test_count_renders_integer(self):
        assert render_fraction(F(7), "count") == "7"

    def test_negative_rates(self):
        assert render_fraction(F(-1, 4), "percent") == "-25.00%"


class TestCell:
    def test_cell_carries_exact_and_rendered(self):
        data = cell(F(3, 5), "percent")
        assert data["exact"] == "3/5"
        assert data["value"] == 0.6
        assert data["rendered"] == "60.00%"

    def test_none_stays_none(self):
        assert cell(None) is None

    def test_parse_cell_round_trips_exactly(self):
        for value in (F(1, 3), F(22, 7), F(0), F(-5, 8)):
            assert parse_cell(cell(value, "number")) == value

    def test_unknown_kind_rejected(self):
        with pytest.raises(ReportError):
            cell(F(1), "furlongs")


def tiny_results() -> dict:
    return {
        "schema_version": 1,
        "header": {
            "dataset": "mini",
            "harness_version": "0.1.0",
            "timeout_seconds": 30.0,
            "comparison_mode": "set",
            "excluded_questions": {"count": 0, "question_ids": []},
        },
        "methods": {
            "m1": {
                "candidate_generation": {
                    "outcome": {
                        "correct_rate": cell(F(3, 5)),
                        "incorrect_rate": cell(F(3, 10)),
                        "error_rate": cell(F(1, 10)),
                    },
                },
            },
            "m2": {
                "candidate_generation": {
                    "outcome": {
                        "correct_rate": cell(F(1, 2)),
                        "incorrect_rate": cell(F(1, 2)),
                        "error_rate": cell(F(0)),
                    },
                },
            },
        },
        "cross_method": {},
    }


class TestEmit:
    def test_machine_round_trip_preserves_rationals(self, tmp_path):
        emit(tiny_results(), ["machine"], tmp_path)
        loaded = json.loads((tmp_path / "results.json").read_text())
        rate = loaded["methods"]["m1"]["candidate_generation"]["outcome"]["correct_rate"]
        assert parse_cell(rate) == F(3, 5)

    def test_emission_is_byte_deterministic(self, tmp_path):
        first = emit(tiny_results(), ["machine", "csv", "markdown"], tmp_path / "a")
        second = emit(tiny_results(), ["machine", "csv", "markdown"], tmp_path / "b")
        assert first == second  # identical digests
        for entry in first:
            a = (tmp_path / "a" / entry["path"]).read_bytes()
            b = (tmp_path / "b" / entry["path"]).read_bytes()
            assert a == b

    def test_empty_results_still_emit_header(self, tmp_path):
        results = dict(tiny_results(), methods={})
        manifest = emit(results, ["markdown"], tmp_path)
        assert [e["path"] for e in manifest] == ["report.md"]
        text = (tmp_path / "report.md").read_text()
        assert "dataset: mini" in text

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ReportError, match="unknown report formats"):
            emit(tiny_results(), ["pdf"], tmp_path)

    def test_markdown_highlights_best_and_second(self, tmp_path):
        emit(tiny_results(), ["markdown"], tmp_path)
        text = (tmp_path / "report.md").read_text()
        assert "**60.00%**" in text  # best CR bold
        assert "*50.00%*" in text  # second best CR italic
        # lower-is-better column: zero error rate wins
        assert "**0.00%**" in text

    def test_csv_lists_every_cell(self, tmp_path):
        emit(tiny_results(), ["csv"], tmp_path)
        lines = (tmp_path / "results.csv").read_text().strip().splitlines()
        assert lines[0] == "path,exact,value,rendered"
        assert any("methods.m1.candidate_generation.outcome.correct_rate" in l for l in lines)

    def test_manifest_digests_match_contents(self, tmp_path):
        import hashlib

        manifest = emit(tiny_results(), ["machine", "csv"], tmp_path)
        for entry in manifest:
            digest = hashlib.sha256((tmp_path / entry["path"]).read_bytes()).hexdigest()
            assert digest == entry["sha256"]

    def test_machine_format_carries_highlight_annotations(self, tmp_path):
        emit(tiny_results(), ["machine"], tmp_path)
        loaded = json.loads((tmp_path / "results.json").read_text())
        marks = loaded["highlights"]["candidate_generation"]["correct_rate"]
        assert marks["best"] == ["m1"]
        assert marks["second"] == ["m2"]

    def test_exact_ties_marked_jointly(self, tmp_path):
        results = tiny_results()
        outcome = results["methods"]["m2"]["candidate_generation"]["outcome"]
        outcome["correct_rate"] = cell(F(3, 5))  # tie with m1
        emit(results, ["machine"], tmp_path)
        loaded = json.loads((tmp_path / "results.json").read_text())
        marks = loaded["highlights"]["candidate_generation"]["correct_rate"]
        assert marks["best"] == ["m1", "m2"]
        assert marks["second"] == []

    def test_csv_carries_header_rows(self, tmp_path):
        emit(tiny_results(), ["csv"], tmp_path)
        text = (tmp_path / "results.csv").read_text()
        assert "header.dataset,,mini,mini" in text
        assert "header.harness_version" in text
