"""Sandboxed SQLite execution, result-set comparison, and outcome judging.

Queries run on read-only connections (URI ``mode=ro``), so database files
are never modified. A timer interrupts statements that exceed the timeout.
Gold rows are executed once per question and reused across candidates.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence
from urllib.parse import quote

from .model import ErrorCategory, ModuleKind, OutcomeLabel, QuestionRecord

__all__ = [
    "Rows",
    "Failure",
    "TimedOut",
    "ExecutionResult",
    "DatabaseOpenError",
    "GoldUnexecutableError",
    "Judgment",
    "Exclusion",
    "execute_query",
    "compare_results",
    "classify_error",
    "judge",
    "judge_bundles",
    "write_judgment_log",
    "read_judgment_log",
]


@dataclass(frozen=True)
class Rows:
    rows: tuple[tuple, ...]
    elapsed: float


@dataclass(frozen=True)
class Failure:
    message: str
    elapsed: float


@dataclass(frozen=True)
class TimedOut:
    limit: float


ExecutionResult = Rows | Failure | TimedOut


class DatabaseOpenError(OSError):
    """The database file itself cannot be opened (environment problem)."""


class GoldUnexecutableError(RuntimeError):
    """Gold SQL failed or timed out; the question must be excluded and audited."""

    def __init__(self, question_id: int, detail: str):
        super().__init__(f"question {question_id}: gold SQL unexecutable: {detail}")
        self.question_id = question_id
        self.detail = detail


@dataclass(frozen=True)
class Judgment:
    question_id: int
    stage: ModuleKind
    candidate_index: int
    label: OutcomeLabel
    predicted_elapsed: float = 0.0
    gold_elapsed: float = 0.0
    detail: str | None = None

    def to_json(self, *, include_timings: bool = False) -> dict[str, Any]:
        out: dict[str, Any] = {
            "question_id": self.question_id,
            "stage": self.stage.value,
            "candidate_index": self.candidate_index,
            **self.label.to_json(),
            "detail": self.detail,
        }
        if include_timings:
            out["predicted_elapsed"] = self.predicted_elapsed
            out["gold_elapsed"] = self.gold_elapsed
        return out

    @staticmethod
    def from_json(data: Mapping[str, Any]) -> "Judgment":
        return Judgment(
            question_id=int(data["question_id"]),
            stage=ModuleKind(data["stage"]),
            candidate_index=int(data["candidate_index"]),
            label=OutcomeLabel.from_json(data),
            predicted_elapsed=float(data.get("predicted_elapsed", 0.0)),
            gold_elapsed=float(data.get("gold_elapsed", 0.0)),
            detail=data.get("detail"),
        )


@dataclass(frozen=True)
class Exclusion:
    """A question removed from scoring because its gold SQL does not execute."""

    question_id: int
    reason: str
    detail: str

    def to_json(self) -> dict[str, Any]:
        return {"question_id": self.question_id, "reason": self.reason, "detail": self.detail}


def _connect_readonly(db_path: str | Path) -> sqlite3.Connection:
    path = Path(db_path)
    if not path.is_file():
        raise DatabaseOpenError(f"database file not found: {path}")
    uri = f"file:{quote(path.as_posix())}?mode=ro"
    try:
        return sqlite3.connect(uri, uri=True)
    except sqlite3.Error as exc:
        raise DatabaseOpenError(f"cannot open database {path}: {exc}") from exc


def execute_query(db_path: str | Path, sql: str, timeout: float) -> ExecutionResult:
    """Run one statement read-only, interrupting it when the timeout expires."""
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    conn = _connect_readonly(db_path)
    expired = threading.Event()

    def _interrupt() -> None:
        expired.set()
        conn.interrupt()

    timer = threading.Timer(timeout, _interrupt)
    start = time.monotonic()
    try:
        timer.start()
        cursor = conn.execute(sql)
        rows = cursor.fetchall()
        elapsed = time.monotonic() - start
        return Rows(rows=tuple(tuple(row) for row in rows), elapsed=elapsed)
    except (sqlite3.Error, sqlite3.Warning, ValueError, OverflowError) as exc:
        elapsed = time.monotonic() - start
        if expired.is_set():
            return TimedOut(limit=timeout)
        return Failure(message=str(exc), elapsed=elapsed)
    finally:
        timer.cancel()
        conn.close()


def _tolerant_equal(a: Any, b: Any, rel_tol: float) -> bool:
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) \
            and not isinstance(a, bool) and not isinstance(b, bool):
        if a == b:
            return True
        scale = max(abs(a), abs(b))
        return scale > 0 and abs(a - b) <= rel_tol * scale
    return a == b


def compare_results(
    predicted: Sequence[tuple],
    gold: Sequence[tuple],
    *,
    multiset: bool = False,
    float_rel_tol: float | None = None,
) -> bool:
    """Equality of two result collections.

    Default is set semantics: row order and duplicates are ignored, column
    order matters, values compare exactly (integer 1 equals real 1.0, and
    NULL equals NULL). ``multiset=True`` also requires matching
    multiplicities. ``float_rel_tol`` switches numeric cells to relative
    tolerance (rows are then matched after a canonical sort).
    """
    if float_rel_tol is not None:
        left = sorted(predicted, key=repr) if multiset else sorted(set(predicted), key=repr)
        right = sorted(gold, key=repr) if multiset else sorted(set(gold), key=repr)
        if len(left) != len(right):
            return False
        for row_a, row_b in zip(left, right):
            if len(row_a) != len(row_b):
                return False
            if not all(_tolerant_equal(a, b, float_rel_tol) for a, b in zip(row_a, row_b)):
                return False
        return True
    if multiset:
        return Counter(predicted) == Counter(gold)
    return set(predicted) == set(gold)


_CATEGORY_PATTERNS = (
    (("no such table", "no such column"), ErrorCategory.NO_TABLE_OR_COLUMN),
    (("no such function",), ErrorCategory.NO_FUNCTION),
    (("syntax error",), ErrorCategory.SYNTAX_ERROR),
)


def classify_error(failure: ExecutionResult) -> ErrorCategory:
    """Map an execution failure to its error bucket.

    Timeouts are their own category; everything else is classified by
    case-insensitive substring of the engine message, in listed precedence,
    with "other" as the catch-all.
    """
    if isinstance(failure, Rows):
        raise ValueError("cannot classify a successful execution")
    if isinstance(failure, TimedOut):
        return ErrorCategory.TIMEOUT
    message = failure.message.lower()
    for needles, category in _CATEGORY_PATTERNS:
        if any(needle in message for needle in needles):
            return category
    return ErrorCategory.OTHER


def judge(
    question: QuestionRecord,
    predicted_sql: str,
    db_path: str | Path,
    timeout: float,
    gold_rows: tuple[tuple, ...] | None = None,
    *,
    stage: ModuleKind = ModuleKind.CANDIDATE_GENERATION,
    candidate_index: int = 0,
    multiset: bool = False,
    float_rel_tol: float | None = None,
) -> Judgment:
    """Execute a prediction and label it Correct / Incorrect / Error(category).

    ``gold_rows`` short-circuits gold execution (cache it across candidates).
    Raises :class:`GoldUnexecutableError` when the gold SQL itself fails,
    so the caller can exclude and audit the question.
    """
    gold_elapsed = 0.0
    if gold_rows is None:
        gold_result = execute_query(db_path, question.gold_sql, timeout)
        if isinstance(gold_result, TimedOut):
            raise GoldUnexecutableError(
                question.question_id, f"gold timed out (limit {timeout:g}s)"
            )
        if isinstance(gold_result, Failure):
            raise GoldUnexecutableError(question.question_id, gold_result.message)
        gold_rows = gold_result.rows
        gold_elapsed = gold_result.elapsed

    result = execute_query(db_path, predicted_sql, timeout)
    if isinstance(result, Rows):
        if compare_results(result.rows, gold_rows, multiset=multiset, float_rel_tol=float_rel_tol):
            label, detail = OutcomeLabel.correct(), None
        else:
            label = OutcomeLabel.incorrect()
            detail = f"result mismatch: predicted {len(result.rows)} rows, gold {len(gold_rows)} rows"
        predicted_elapsed = result.elapsed
    elif isinstance(result, TimedOut):
        label = OutcomeLabel.error(ErrorCategory.TIMEOUT)
        detail = f"statement timed out (limit {timeout:g}s)"
        predicted_elapsed = timeout
    else:
        label = OutcomeLabel.error(classify_error(result))
        detail = result.message
        predicted_elapsed = result.elapsed

    return Judgment(
        question_id=question.question_id,
        stage=stage,
        candidate_index=candidate_index,
        label=label,
        predicted_elapsed=predicted_elapsed,
        gold_elapsed=gold_elapsed,
        detail=detail,
    )


def judge_bundles(
    tasks: Iterable[tuple[QuestionRecord, Path, list[tuple[ModuleKind, int, str]]]],
    timeout: float,
    *,
    workers: int = 1,
    multiset: bool = False,
    float_rel_tol: float | None = None,
) -> tuple[list[Judgment], list[Exclusion]]:
    """Judge many questions in parallel with deterministic output order.

    Each task is ``(question, db_path, [(stage, candidate_index, sql), ...])``.
    Gold SQL executes once per question; its rows are shared by all of the
    question's candidates. Results are merged sorted by
    ``(question_id, stage, candidate_index)`` regardless of worker count.
    """

    def _one(task: tuple[QuestionRecord, Path, list[tuple[ModuleKind, int, str]]]):
        question, db_path, predictions = task
        gold_result = execute_query(db_path, question.gold_sql, timeout)
        if isinstance(gold_result, TimedOut):
            return [], [Exclusion(question.question_id, "gold-unexecutable",
                                  f"gold timed out (limit {timeout:g}s)")]
        if isinstance(gold_result, Failure):
            return [], [Exclusion(question.question_id, "gold-unexecutable",
                                  gold_result.message)]
        judgments = []
        for stage, candidate_index, sql in predictions:
            judgment = judge(
                question, sql, db_path, timeout,
                gold_rows=gold_result.rows,
                stage=stage, candidate_index=candidate_index,
                multiset=multiset, float_rel_tol=float_rel_tol,
            )
            judgments.append(replace(judgment, gold_elapsed=gold_result.elapsed))
        return judgments, []

    task_list = list(tasks)
    all_judgments: list[Judgment] = []
    all_exclusions: list[Exclusion] = []
    if workers <= 1:
        results = map(_one, task_list)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, task_list))
    for judgments, exclusions in results:
        all_judgments.extend(judgments)
        all_exclusions.extend(exclusions)

    stage_order = {kind: i for i, kind in enumerate(ModuleKind)}
    all_judgments.sort(key=lambda j: (j.question_id, stage_order[j.stage], j.candidate_index))
    all_exclusions.sort(key=lambda e: e.question_id)
    return all_judgments, all_exclusions


def write_judgment_log(
    path: str | Path,
    header: Mapping[str, Any],
    judgments: Sequence[Judgment],
    exclusions: Sequence[Exclusion] = (),
    *,
    include_timings: bool = False,
) -> None:
    """Write a judgment log; canonical logs omit wall-clock timings so that
    repeated runs are byte-identical."""
    doc = {
        "header": dict(header),
        "exclusions": [e.to_json() for e in exclusions],
        "judgments": [j.to_json(include_timings=include_timings) for j in judgments],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_judgment_log(path: str | Path) -> tuple[dict[str, Any], list[Judgment], list[Exclusion]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    judgments = [Judgment.from_json(entry) for entry in doc.get("judgments", [])]
    exclusions = [
        Exclusion(int(e["question_id"]), str(e["reason"]), str(e.get("detail", "")))
        for e in doc.get("exclusions", [])
    ]
    return doc.get("header", {}), judgments, exclusions
