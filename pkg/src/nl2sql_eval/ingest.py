"""Load datasets and run files, and align run records to their questions.

A dataset manifest names the question file, the databases root, and a
field map adapting dataset-specific field names (the BIRD dev layout is
the reference). Run files are JSON arrays in the collected-record shape,
one file per method.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .model import (
    Difficulty,
    ModuleKind,
    QuestionRecord,
    RunRecord,
    ValidationError,
    validate_record,
)

__all__ = [
    "IngestError",
    "DatasetManifest",
    "load_manifest",
    "load_dataset",
    "load_run_file",
    "RunBundle",
    "AlignmentReport",
    "align_runs",
    "database_path",
]


class IngestError(ValueError):
    """Unreadable input file or a structural problem in its contents."""


_REQUIRED_FIELDS = ("question_id", "db_id", "question", "gold_sql")


@dataclass(frozen=True)
class DatasetManifest:
    """Where a dataset lives and how its question fields map to ours."""

    name: str
    questions_path: Path
    databases_root: Path
    question_field_map: Mapping[str, str]

    def __post_init__(self) -> None:
        missing = [f for f in _REQUIRED_FIELDS if f not in self.question_field_map]
        if missing:
            raise IngestError(f"manifest {self.name!r}: field map missing {missing}")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    try:
        questions_path = (base / doc["questions_path"]).resolve()
        databases_root = (base / doc["databases_root"]).resolve()
        manifest = DatasetManifest(
            name=str(doc.get("name", path.stem)),
            questions_path=questions_path,
            databases_root=databases_root,
            question_field_map=dict(doc["question_field_map"]),
        )
    except KeyError as exc:
        raise IngestError(f"manifest {path}: missing key {exc}") from exc
    if not manifest.questions_path.is_file():
        raise IngestError(f"manifest {path}: questions file not found: {manifest.questions_path}")
    if not manifest.databases_root.is_dir():
        raise IngestError(f"manifest {path}: databases root not found: {manifest.databases_root}")
    return manifest


def database_path(manifest: DatasetManifest, db_id: str) -> Path:
    return manifest.databases_root / db_id / f"{db_id}.sqlite"


def load_dataset(manifest: DatasetManifest) -> list[QuestionRecord]:
    """One QuestionRecord per dataset row, difficulty defaulting to unlabeled."""
    try:
        rows = json.loads(manifest.questions_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot read questions file {manifest.questions_path}: {exc}") from exc
    if not isinstance(rows, list):
        raise IngestError(f"questions file {manifest.questions_path} must be a JSON array")

    fmap = manifest.question_field_map
    difficulty_field = fmap.get("difficulty", "difficulty")
    evidence_field = fmap.get("evidence", "evidence")

    questions: list[QuestionRecord] = []
    seen_ids: set[int] = set()
    for i, row in enumerate(rows):
        values = {}
        for ours in _REQUIRED_FIELDS:
            theirs = fmap[ours]
            if theirs not in row:
                raise IngestError(
                    f"question row {i}: missing mapped field {theirs!r} (for {ours!r})"
                )
            values[ours] = row[theirs]
        try:
            question_id = int(values["question_id"])
        except (TypeError, ValueError):
            raise IngestError(f"question row {i}: question_id {values['question_id']!r} not an integer")
        if question_id in seen_ids:
            raise IngestError(f"question row {i}: duplicate question_id {question_id}")
        seen_ids.add(question_id)
        evidence = row.get(evidence_field)
        try:
            questions.append(
                QuestionRecord(
                    question_id=question_id,
                    db_id=str(values["db_id"]),
                    question=str(values["question"]),
                    gold_sql=str(values["gold_sql"]),
                    difficulty=Difficulty.parse(row.get(difficulty_field)),
                    evidence=str(evidence) if evidence is not None else None,
                )
            )
        except ValidationError as exc:
            raise IngestError(f"question row {i}: {exc}") from exc
    return questions


def load_run_file(path: str | Path) -> list[RunRecord]:
    """Parse and validate a run file (JSON array of collected records)."""
    path = Path(path)
    try:
        rows = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot read run file {path}: {exc}") from exc
    if not isinstance(rows, list):
        raise IngestError(f"run file {path} must be a JSON array of records")
    records: list[RunRecord] = []
    for i, row in enumerate(rows):
        try:
            records.append(validate_record(row, index=i))
        except ValidationError as exc:
            raise IngestError(f"run file {path}: {exc}") from exc
    return records


@dataclass
class RunBundle:
    """All of one question's run records, grouped by stage in file order."""

    question: QuestionRecord
    schema_records: list[RunRecord] = field(default_factory=list)
    candidate_records: list[RunRecord] = field(default_factory=list)
    revision_records: list[RunRecord] = field(default_factory=list)

    def records_for(self, stage: ModuleKind) -> list[RunRecord]:
        return {
            ModuleKind.SCHEMA_SELECTION: self.schema_records,
            ModuleKind.CANDIDATE_GENERATION: self.candidate_records,
            ModuleKind.QUERY_REVISION: self.revision_records,
        }[stage]

    def record_count(self) -> int:
        return (
            len(self.schema_records)
            + len(self.candidate_records)
            + len(self.revision_records)
        )


@dataclass
class AlignmentReport:
    """Records that could not be attached to exactly one question."""

    unmatched: list[tuple[int, str]] = field(default_factory=list)  # (record index, reason)

    @property
    def unmatched_count(self) -> int:
        return len(self.unmatched)

    def to_json(self) -> dict[str, Any]:
        return {
            "unmatched_count": self.unmatched_count,
            "unmatched": [{"record_index": i, "reason": r} for i, r in self.unmatched],
        }


def _sort_candidates(records: list[RunRecord]) -> list[RunRecord]:
    """candidate_index orders candidates when present; file order breaks ties."""
    def key(pair: tuple[int, RunRecord]) -> tuple[int, int]:
        position, record = pair
        index = record.candidate_index if record.candidate_index is not None else position
        return (index, position)

    return [record for _, record in sorted(enumerate(records), key=key)]


def align_runs(
    records: Sequence[RunRecord],
    questions: Sequence[QuestionRecord],
) -> tuple[list[RunBundle], AlignmentReport]:
    """Attach every record to exactly one question or report it unmatched.

    Matching precedence: question_id, then (db_id, exact question text),
    then exact question text alone; text matches that remain ambiguous are
    reported, never guessed. Every question gets a bundle, possibly empty.
    Conservation: len(records) == sum of bundle record counts + unmatched.
    """
    bundles = {q.question_id: RunBundle(question=q) for q in questions}
    by_id = {q.question_id: q for q in questions}
    by_db_text: dict[tuple[str, str], list[int]] = {}
    by_text: dict[str, list[int]] = {}
    for q in questions:
        by_db_text.setdefault((q.db_id, q.question.strip()), []).append(q.question_id)
        by_text.setdefault(q.question.strip(), []).append(q.question_id)

    report = AlignmentReport()
    for index, record in enumerate(records):
        qid: int | None = None
        if record.question_id is not None:
            if record.question_id in by_id:
                qid = record.question_id
            else:
                report.unmatched.append(
                    (index, f"question_id {record.question_id} not in dataset")
                )
                continue
        else:
            text = record.question.strip()
            candidates: list[int] = []
            if record.db_id is not None:
                candidates = by_db_text.get((record.db_id, text), [])
            if not candidates:
                candidates = by_text.get(text, [])
            if not candidates:
                report.unmatched.append((index, f"question text not in dataset: {text[:80]!r}"))
                continue
            if len(candidates) > 1:
                report.unmatched.append(
                    (index, f"question text ambiguous across questions {candidates}")
                )
                continue
            qid = candidates[0]
        bundle = bundles[qid]
        bundle.records_for(record.node_type).append(record)

    ordered = [bundles[q.question_id] for q in questions]
    for bundle in ordered:
        bundle.candidate_records = _sort_candidates(bundle.candidate_records)
        bundle.revision_records = _sort_candidates(bundle.revision_records)
    return ordered, report
