from __future__ import annotations

import json

import pytest

from nl2sql_eval.ingest import (
    IngestError,
    align_runs,
    database_path,
    load_dataset,
    load_manifest,
    load_run_file,
)
from nl2sql_eval.model import Difficulty, ModuleKind, QuestionRecord, validate_record


def record(question="How many?", node="candidate_generation", **extra):
    raw = {
        "node_type": node,
        "question": question,
        "token_cost": 100,
        "llm_calls": 1,
    }
    if node == "schema_selection":
        raw["extracted_schema"] = {"cards": ["id"]}
    else:
        raw["SQL"] = "SELECT 1"
    raw.update(extra)
    return validate_record(raw)


def question(qid=0, text="How many?", db="trading_cards"):
    return QuestionRecord(question_id=qid, db_id=db, question=text, gold_sql="SELECT 1")


class TestLoadDataset:
    def test_mini_dataset_loads_twenty_questions(self, mini_manifest):
        manifest = load_manifest(mini_manifest)
        questions = load_dataset(manifest)
        assert len(questions) == 20
        assert {q.db_id for q in questions} == {"trading_cards", "school_perf"}
        assert all(q.gold_sql.strip() for q in questions)
        difficulties = {q.difficulty for q in questions}
        assert difficulties == {
            Difficulty.SIMPLE, Difficulty.MODERATE, Difficulty.CHALLENGING,
        }

    def test_database_paths_exist(self, mini_manifest):
        manifest = load_manifest(mini_manifest)
        for q in load_dataset(manifest):
            assert database_path(manifest, q.db_id).is_file()

    def test_missing_mapped_field_rejected(self, tmp_path):
        (tmp_path / "questions.json").write_text(json.dumps([
            {"question_id": 0, "db_id": "d", "question": "q?"}  # no SQL
        ]))
        (tmp_path / "databases").mkdir()
        (tmp_path / "manifest.json").write_text(json.dumps({
            "name": "broken",
            "questions_path": "questions.json",
            "databases_root": "databases",
            "question_field_map": {
                "question_id": "question_id", "db_id": "db_id",
                "question": "question", "gold_sql": "SQL",
            },
        }))
        manifest = load_manifest(tmp_path / "manifest.json")
        with pytest.raises(IngestError, match="missing mapped field 'SQL'"):
            load_dataset(manifest)

    def test_duplicate_question_id_rejected(self, tmp_path):
        rows = [
            {"question_id": 1, "db_id": "d", "question": "a?", "SQL": "SELECT 1"},
            {"question_id": 1, "db_id": "d", "question": "b?", "SQL": "SELECT 2"},
        ]
        (tmp_path / "questions.json").write_text(json.dumps(rows))
        (tmp_path / "databases").mkdir()
        (tmp_path / "manifest.json").write_text(json.dumps({
            "questions_path": "questions.json",
            "databases_root": "databases",
            "question_field_map": {
                "question_id": "question_id", "db_id": "db_id",
                "question": "question", "gold_sql": "SQL",
            },
        }))
        with pytest.raises(IngestError, match="duplicate question_id"):
            load_dataset(load_manifest(tmp_path / "manifest.json"))

    def test_unknown_difficulty_becomes_unlabeled(self, tmp_path):
        rows = [{"question_id": 0, "db_id": "d", "question": "q?",
                 "SQL": "SELECT 1", "difficulty": "weird"}]
        (tmp_path / "questions.json").write_text(json.dumps(rows))
        (tmp_path / "databases").mkdir()
        (tmp_path / "manifest.json").write_text(json.dumps({
            "questions_path": "questions.json",
            "databases_root": "databases",
            "question_field_map": {
                "question_id": "question_id", "db_id": "db_id",
                "question": "question", "gold_sql": "SQL",
            },
        }))
        questions = load_dataset(load_manifest(tmp_path / "manifest.json"))
        assert questions[0].difficulty is Difficulty.UNLABELED

    def test_manifest_field_map_must_cover_core_fields(self, tmp_path):
        (tmp_path / "questions.json").write_text("[]")
        (tmp_path / "databases").mkdir()
        (tmp_path / "manifest.json").write_text(json.dumps({
            "questions_path": "questions.json",
            "databases_root": "databases",
            "question_field_map": {"question": "question"},
        }))
        with pytest.raises(IngestError, match="field map missing"):
            load_manifest(tmp_path / "manifest.json")


class TestLoadRunFile:
    def test_valid_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps([
            {
                "node_type": "schema_selection",
                "question": "How many cards are there with toughness of 99?",
                "extracted_schema": {"cards": ["id", "toughness"]},
                "token_cost": 1200,
                "llm_calls": 1,
            }
        ]))
        records = load_run_file(path)
        assert records[0].node_type is ModuleKind.SCHEMA_SELECTION

    def test_error_names_file_and_record(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps([{"node_type": "query_revision", "question": "q"}]))
        with pytest.raises(IngestError, match="record 0"):
            load_run_file(path)

    def test_non_array_rejected(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{}")
        with pytest.raises(IngestError, match="JSON array"):
            load_run_file(path)


class TestAlignRuns:
    def test_one_record_per_stage_groups_into_one_bundle(self):
        questions = [question()]
        records = [
            record(node="schema_selection"),
            record(node="candidate_generation"),
            record(node="query_revision"),
        ]
        bundles, report = align_runs(records, questions)
        assert len(bundles) == 1
        bundle = bundles[0]
        assert len(bundle.schema_records) == 1
        assert len(bundle.candidate_records) == 1
        assert len(bundle.revision_records) == 1
        assert report.unmatched_count == 0

    def test_unknown_question_reported_not_dropped_silently(self):
        questions = [question()]
        records = [record(question="Totally different?")]
        bundles, report = align_runs(records, questions)
        assert len(bundles) == 1
        assert bundles[0].record_count() == 0
        assert report.unmatched_count == 1
        assert "not in dataset" in report.unmatched[0][1]

    def test_twenty_candidates_ordered_by_candidate_index(self):
        questions = [question()]
        records = [
            record(candidate_index=i, SQL=f"SELECT {i}")
            for i in reversed(range(20))
        ]
        bundles, _ = align_runs(records, questions)
        ordered = [r.candidate_index for r in bundles[0].candidate_records]
        assert ordered == list(range(20))

    def test_question_id_matching_beats_text(self):
        questions = [question(qid=0, text="Same?"), question(qid=1, text="Same?")]
        records = [record(question="Same?", question_id=1)]
        bundles, report = align_runs(records, questions)
        assert bundles[1].record_count() == 1
        assert report.unmatched_count == 0

    def test_ambiguous_text_reported(self):
        questions = [
            question(qid=0, text="Same?", db="a"),
            question(qid=1, text="Same?", db="b"),
        ]
        records = [record(question="Same?")]
        _, report = align_runs(records, questions)
        assert report.unmatched_count == 1
        assert "ambiguous" in report.unmatched[0][1]

    def test_db_id_disambiguates_duplicate_text(self):
        questions = [
            question(qid=0, text="Same?", db="a"),
            question(qid=1, text="Same?", db="b"),
        ]
        records = [record(question="Same?", db_id="b")]
        bundles, report = align_runs(records, questions)
        assert report.unmatched_count == 0
        assert bundles[1].record_count() == 1

    def test_unknown_question_id_reported(self):
        records = [record(question_id=42)]
        _, report = align_runs(records, [question(qid=0)])
        assert report.unmatched_count == 1

    def test_conservation_of_records(self):
        questions = [question(qid=i, text=f"q{i}?") for i in range(5)]
        records = []
        for i in range(5):
            records.append(record(question=f"q{i}?", question_id=i))
            records.append(record(question=f"q{i}?", question_id=i, node="schema_selection"))
        records.append(record(question="unknown?"))
        bundles, report = align_runs(records, questions)
        attached = sum(b.record_count() for b in bundles)
        assert attached + report.unmatched_count == len(records)

    def test_alignment_deterministic(self):
        questions = [question(qid=i, text=f"q{i}?") for i in range(4)]
        records = [record(question=f"q{i % 4}?", candidate_index=i) for i in range(12)]
        first, _ = align_runs(records, questions)
        second, _ = align_runs(records, questions)
        as_ids = lambda bundles: [
            [r.candidate_index for r in b.candidate_records] for b in bundles
        ]
        assert as_ids(first) == as_ids(second)
