from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import pytest

from nl2sql_eval import minidataset
from nl2sql_eval.ingest import IngestError
from nl2sql_eval.pipeline import (
    ConfigError,
    RunConfig,
    bench,
    load_config,
    postprocess,
    selftest,
    validate_runs,
)

F = Fraction


def write_config(path: Path, **extra) -> Path:
    doc = {
        "dataset": extra.pop("dataset", "dataset/manifest.json"),
        "runs": extra.pop("runs", "runs"),
        "out": extra.pop("out", "out"),
        **extra,
    }
    path.write_text(json.dumps(doc))
    return path


class TestRunConfig:
    def test_defaults(self, tmp_path):
        config = RunConfig(
            dataset_manifest=tmp_path, runs_dir=tmp_path, out_dir=tmp_path
        )
        assert config.timeout == 30.0
        assert config.k_list == (1, 5, 10, 15, 20)
        assert config.comparison == "set"

    def test_k_list_must_increase(self, tmp_path):
        with pytest.raises(ConfigError, match="strictly increasing"):
            RunConfig(
                dataset_manifest=tmp_path, runs_dir=tmp_path, out_dir=tmp_path,
                k_list=(1, 5, 5),
            )

    def test_workers_positive(self, tmp_path):
        with pytest.raises(ConfigError, match="worker count"):
            RunConfig(
                dataset_manifest=tmp_path, runs_dir=tmp_path, out_dir=tmp_path,
                workers=0,
            )

    def test_load_config_resolves_relative_paths(self, tmp_path, mini_manifest):
        (tmp_path / "runs").mkdir()
        path = write_config(
            tmp_path / "config.json",
            dataset=str(mini_manifest),
            timeout=7.5,
            k=[1, 2, 3],
            comparison="multiset",
        )
        config = load_config(path)
        assert config.dataset_manifest == mini_manifest
        assert config.runs_dir == tmp_path / "runs"
        assert config.timeout == 7.5
        assert config.k_list == (1, 2, 3)
        assert config.comparison == "multiset"

    def test_overrides_beat_file_values(self, tmp_path, mini_manifest):
        path = write_config(
            tmp_path / "config.json", dataset=str(mini_manifest), timeout=7.5
        )
        config = load_config(path, timeout=1.0, workers=8)
        assert config.timeout == 1.0
        assert config.workers == 8

    def test_missing_required_key(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"runs": "runs"}))
        with pytest.raises(ConfigError, match="missing required key"):
            load_config(path)


@pytest.fixture()
def broken_gold_workspace(tmp_path, mock_workspace):
    """Mini dataset with one unexecutable gold query plus one mock method."""
    import shutil

    root = tmp_path / "dataset"
    minidataset.materialize(root)
    questions = json.loads((root / "questions.json").read_text())
    questions[3]["SQL"] = "SELECT x FROM table_gone_missing"
    (root / "questions.json").write_text(json.dumps(questions))
    runs = tmp_path / "runs"
    runs.mkdir()
    shutil.copy(mock_workspace["runs"] / "all_correct.json", runs / "m.json")
    return RunConfig(
        dataset_manifest=root / "manifest.json",
        runs_dir=runs,
        out_dir=tmp_path / "out",
        timeout=5.0,
    )


class TestGoldUnexecutableFlow:
    def test_exclusion_propagates_to_bench_header_and_metrics(self, broken_gold_workspace):
        config = broken_gold_workspace
        postprocess(config)
        log = json.loads(
            (config.out_dir / "postprocess" / "m" / "judgments.json").read_text()
        )
        assert [e["question_id"] for e in log["exclusions"]] == [3]
        assert all(j["question_id"] != 3 for j in log["judgments"])

        results = bench(config)
        header = results["header"]["excluded_questions"]
        assert header == {"count": 1, "question_ids": [3]}
        outcome = results["methods"]["m"]["candidate_generation"]["outcome"]
        assert outcome["counts"]["total"] == 19
        # gold-as-prediction still yields CR = 1 over the remaining questions
        assert outcome["correct_rate"]["exact"] == "1/1"

    def test_selftest_audits_but_passes(self, broken_gold_workspace):
        result = selftest(broken_gold_workspace)
        assert result["ok"]
        assert [e["question_id"] for e in result["excluded"]] == [3]
        assert result["judged"] == 19


class TestSchemaPick:
    @pytest.fixture()
    def two_schema_run(self, tmp_path, mini_manifest):
        questions = json.loads(
            (Path(mini_manifest).parent / "questions.json").read_text()
        )
        target = questions[0]
        records = [
            {
                "node_type": "schema_selection",
                "question": target["question"],
                "question_id": target["question_id"],
                "extracted_schema": {"cards": ["id"]},  # refinement 1: partial
                "token_cost": 10,
                "llm_calls": 1,
            },
            {
                "node_type": "schema_selection",
                "question": target["question"],
                "question_id": target["question_id"],
                "extracted_schema": {"cards": ["id", "toughness"]},  # refinement 2: full
                "token_cost": 10,
                "llm_calls": 1,
            },
        ]
        runs = tmp_path / "runs"
        runs.mkdir()
        (runs / "m.json").write_text(json.dumps(records))
        return runs

    def _column_recall(self, config) -> str:
        scores = json.loads(
            (config.out_dir / "postprocess" / "m" / "schema_scores.json").read_text()
        )
        return scores["scores"]["0"]["column"]["recall"]

    def test_last_record_scored_by_default(self, mini_manifest, two_schema_run, tmp_path):
        config = RunConfig(
            dataset_manifest=mini_manifest, runs_dir=two_schema_run,
            out_dir=tmp_path / "out_last",
        )
        postprocess(config)
        assert self._column_recall(config) == "1"

    def test_first_record_scored_when_configured(self, mini_manifest, two_schema_run, tmp_path):
        config = RunConfig(
            dataset_manifest=mini_manifest, runs_dir=two_schema_run,
            out_dir=tmp_path / "out_first", schema_pick="first",
        )
        postprocess(config)
        assert self._column_recall(config) == "1/2"


class TestValidateRuns:
    def test_empty_runs_directory_rejected(self, mini_manifest, tmp_path):
        (tmp_path / "runs").mkdir()
        config = RunConfig(
            dataset_manifest=mini_manifest,
            runs_dir=tmp_path / "runs",
            out_dir=tmp_path / "out",
        )
        with pytest.raises(IngestError, match="no run files"):
            validate_runs(config)


class TestStageIsolation:
    def test_bench_never_opens_database_files(self, tmp_path, mock_workspace):
        import shutil

        root = tmp_path / "dataset"
        minidataset.materialize(root)
        runs = tmp_path / "runs"
        runs.mkdir()
        shutil.copy(mock_workspace["runs"] / "mixed_basic.json", runs / "m.json")
        config = RunConfig(
            dataset_manifest=root / "manifest.json",
            runs_dir=runs,
            out_dir=tmp_path / "out",
            timeout=5.0,
        )
        postprocess(config)
        # remove every database file; bench must still run from the logs
        for db in (root / "databases").rglob("*.sqlite"):
            db.unlink()
        results = bench(config)
        assert results["methods"]["m"]["candidate_generation"]["outcome"]


class TestBenchSections:
    def test_full_document_shape(self, mini_manifest, mock_workspace, tmp_path):
        config = RunConfig(
            dataset_manifest=mini_manifest,
            runs_dir=mock_workspace["runs"],
            out_dir=tmp_path / "out",
            timeout=0.25,
            workers=4,
        )
        postprocess(config)
        results = bench(config)
        method = results["methods"]["revision_gain"]
        assert set(method) >= {
            "schema_selection", "candidate_generation", "query_revision",
            "recall_conditioned", "outcome_conditioned_recall",
        }
        assert "transitions" in method["query_revision"]
        assert "by_difficulty" in method["candidate_generation"]
        difficulty_totals = sum(
            section["counts"]["total"]
            for section in method["candidate_generation"]["by_difficulty"].values()
        )
        assert difficulty_totals == method["candidate_generation"]["outcome"]["counts"]["total"]
        cross = results["cross_method"]
        assert "incorrect_overlap" in cross
        assert "solvability" in cross
        matrix = cross["incorrect_overlap"]
        assert len(matrix["matrix"]) == len(matrix["methods"])
        for difficulty, bins in cross["solvability"].items():
            assert sum(bins.values()) > 0
