"""Deterministic synthetic run files with known ground-truth metrics.

Profiles are realized by construction, not sampling: a target correct rate
of 0.6 over 20 questions yields exactly 12 correct candidates, so the
expected-metrics file can be compared with exact rational equality after a
full pipeline run. Incorrect candidates are certified at generation time
(executed and required to return different rows than gold); error
candidates are certified to classify into their intended category.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .executor import Rows, classify_error, compare_results, execute_query
from .ingest import database_path, load_dataset, load_manifest
from .metrics import (
    CandidateMatrix,
    RevisionLedger,
    efficiency_summary,
    outcome_rates_from_labels,
    revision_metrics,
    selection_scores,
)
from .model import (
    ErrorCategory,
    ModuleKind,
    OutcomeLabel,
    RunRecord,
    SchemaSet,
    validate_record,
)
from .pipeline import (
    DEFAULT_K_LIST,
    efficiency_section,
    outcome_section,
    passk_section,
    selection_aggregate,
    transitions_section,
)
from .schema_extract import Catalog, catalog_from_database, extract_schema

__all__ = ["ProfileError", "MockProfile", "generate", "default_profiles"]

_ALL_CATEGORIES = (
    ErrorCategory.NO_TABLE_OR_COLUMN,
    ErrorCategory.NO_FUNCTION,
    ErrorCategory.SYNTAX_ERROR,
    ErrorCategory.TIMEOUT,
    ErrorCategory.OTHER,
)
_FAST_CATEGORIES = (
    ErrorCategory.NO_TABLE_OR_COLUMN,
    ErrorCategory.NO_FUNCTION,
    ErrorCategory.SYNTAX_ERROR,
    ErrorCategory.OTHER,
)

_SPIN_QUERY = (
    "WITH RECURSIVE spin(n) AS (SELECT 1 UNION ALL SELECT n + 1 FROM spin) "
    "SELECT COUNT(*) FROM spin"
)


class ProfileError(ValueError):
    """Profile targets cannot be realized exactly over the question count."""

    def __init__(self, message: str, smallest_feasible_n: int | None = None):
        super().__init__(message)
        self.smallest_feasible_n = smallest_feasible_n


@dataclass(frozen=True)
class MockProfile:
    """Target rates realized exactly by the generated run file."""

    name: str
    correct_rate: Fraction
    incorrect_rate: Fraction
    error_rate: Fraction
    error_mix: tuple[ErrorCategory, ...] = _FAST_CATEGORIES
    candidates_per_question: int = 1
    later_correct_rate: Fraction = Fraction(0)  # extra-candidate rescue odds
    i2c: Fraction = Fraction(0)
    e2c: Fraction = Fraction(0)
    c2i: Fraction = Fraction(0)
    c2e: Fraction = Fraction(0)
    schema_drop_rate: Fraction = Fraction(0)
    schema_spurious_rate: Fraction = Fraction(0)
    seed: int = 1

    def __post_init__(self) -> None:
        triple = (self.correct_rate, self.incorrect_rate, self.error_rate)
        if any(r < 0 or r > 1 for r in triple):
            raise ProfileError(f"{self.name}: rates must lie in [0, 1]")
        if sum(triple) != 1:
            raise ProfileError(f"{self.name}: CR + IR + ER must equal 1 exactly")
        for rate_name in ("later_correct_rate", "i2c", "e2c", "c2i", "c2e",
                          "schema_drop_rate", "schema_spurious_rate"):
            value = getattr(self, rate_name)
            if value < 0 or value > 1:
                raise ProfileError(f"{self.name}: {rate_name} must lie in [0, 1]")
        if self.c2i + self.c2e > 1:
            raise ProfileError(f"{self.name}: c2i + c2e cannot exceed 1")
        if self.error_rate > 0 and not self.error_mix:
            raise ProfileError(f"{self.name}: error_mix empty with nonzero error rate")
        if self.candidates_per_question < 1:
            raise ProfileError(f"{self.name}: need at least one candidate per question")


def _exact_count(rate: Fraction, total: int, what: str, profile: MockProfile) -> int:
    value = rate * total
    if value.denominator != 1:
        raise ProfileError(
            f"{profile.name}: {what} = {rate} over {total} questions is not an "
            f"integer count; smallest feasible N is {_smallest_feasible_n(profile)}",
            smallest_feasible_n=_smallest_feasible_n(profile),
        )
    return int(value)


def _smallest_feasible_n(profile: MockProfile) -> int:
    denominators = [
        profile.correct_rate.denominator,
        profile.incorrect_rate.denominator,
        profile.error_rate.denominator,
        (profile.i2c * profile.incorrect_rate).denominator,
        (profile.e2c * profile.error_rate).denominator,
        (profile.c2i * profile.correct_rate).denominator,
        (profile.c2e * profile.correct_rate).denominator,
    ]
    return math.lcm(*denominators)


# ---------------------------------------------------------------------------
# SQL realization

_INT_LITERAL = re.compile(r"(?<![\w.])(\d+)(?![\w.])")


def _mutate_literal(sql: str) -> str | None:
    matches = list(_INT_LITERAL.finditer(sql))
    if not matches:
        return None
    last = matches[-1]
    bumped = str(int(last.group(1)) + 1)
    return sql[: last.start(1)] + bumped + sql[last.end(1):]


def _mutate_projection(sql: str) -> str | None:
    upper = sql.upper()
    if not upper.startswith("SELECT"):
        return None
    from_pos = None
    depth = 0
    for i, ch in enumerate(sql):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif depth == 0 and upper.startswith(" FROM ", i):
            from_pos = i
            break
    if from_pos is None:
        return None
    head = sql[:from_pos]
    body = head[len("SELECT"):]
    prefix = "SELECT"
    stripped = body.lstrip()
    if stripped.upper().startswith("DISTINCT "):
        prefix += " DISTINCT"
        stripped = stripped[len("DISTINCT "):]
    items: list[str] = []
    depth = 0
    current = []
    for ch in stripped:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    items.append("".join(current).strip())
    if len(items) < 2:
        return None
    items[0], items[1] = items[1], items[0]
    return f"{prefix} {', '.join(items)}{sql[from_pos:]}"


def _wrap_empty(sql: str) -> str:
    inner = sql.rstrip().rstrip(";")
    return f"SELECT * FROM ({inner}) AS mock_wrap LIMIT 0"


def _error_sql(category: ErrorCategory, salt: int) -> str:
    if category is ErrorCategory.NO_TABLE_OR_COLUMN:
        return f"SELECT * FROM missing_table_{salt}"
    if category is ErrorCategory.NO_FUNCTION:
        return f"SELECT definitely_not_a_function_{salt}(1)"
    if category is ErrorCategory.SYNTAX_ERROR:
        return f"SELEC col_{salt} FORM somewhere"
    if category is ErrorCategory.TIMEOUT:
        return _SPIN_QUERY
    return f"SELECT {salt}; SELECT {salt + 1}"  # multi-statement: "other"


class _SqlRealizer:
    """Builds and certifies candidate SQL for planned outcome labels."""

    def __init__(self, db_path: Path, gold_sql: str, gold_rows: tuple, timeout: float):
        self.db_path = db_path
        self.gold_sql = gold_sql
        self.gold_rows = gold_rows
        self.timeout = timeout
        self._incorrect_base: str | None = None

    def correct(self, variant: int) -> str:
        if variant == 0:
            return self.gold_sql
        return f"{self.gold_sql} -- alt {variant}"

    def incorrect(self, variant: int) -> str:
        base = self._certified_incorrect()
        return f"{base} /* v{variant} */" if variant else base

    def _certified_incorrect(self) -> str:
        if self._incorrect_base is not None:
            return self._incorrect_base
        for candidate in (
            _mutate_literal(self.gold_sql),
            _mutate_projection(self.gold_sql),
            _wrap_empty(self.gold_sql),
        ):
            if candidate is None:
                continue
            result = execute_query(self.db_path, candidate, self.timeout)
            if isinstance(result, Rows) and not compare_results(result.rows, self.gold_rows):
                self._incorrect_base = candidate
                return candidate
        raise RuntimeError(f"no certified incorrect mutation for: {self.gold_sql!r}")

    def error(self, category: ErrorCategory, salt: int) -> str:
        sql = _error_sql(category, salt)
        result = execute_query(self.db_path, sql, self.timeout)
        if isinstance(result, Rows):
            raise RuntimeError(f"error candidate unexpectedly succeeded: {sql!r}")
        actual = classify_error(result)
        if actual is not category:
            raise RuntimeError(
                f"error candidate classified as {actual.value}, wanted {category.value}: {sql!r}"
            )
        return sql

    def realize(self, label: OutcomeLabel, variant: int, salt: int) -> str:
        if label.is_correct:
            return self.correct(variant)
        if label.is_incorrect:
            return self.incorrect(variant)
        return self.error(label.error_category, salt)


# ---------------------------------------------------------------------------
# Generation

def _plan_outcomes(
    profile: MockProfile, question_ids: Sequence[int], rng: random.Random
) -> dict[int, OutcomeLabel]:
    n = len(question_ids)
    correct_n = _exact_count(profile.correct_rate, n, "correct_rate", profile)
    incorrect_n = _exact_count(profile.incorrect_rate, n, "incorrect_rate", profile)
    error_n = n - correct_n - incorrect_n
    order = list(question_ids)
    rng.shuffle(order)
    plan: dict[int, OutcomeLabel] = {}
    for i, qid in enumerate(order):
        if i < correct_n:
            plan[qid] = OutcomeLabel.correct()
        elif i < correct_n + incorrect_n:
            plan[qid] = OutcomeLabel.incorrect()
        else:
            category = profile.error_mix[(i - correct_n - incorrect_n) % len(profile.error_mix)]
            plan[qid] = OutcomeLabel.error(category)
    assert sum(1 for l in plan.values() if l.is_error) == error_n
    return plan


def _plan_transitions(
    profile: MockProfile,
    cg_plan: dict[int, OutcomeLabel],
    rng: random.Random,
) -> dict[int, OutcomeLabel]:
    c_pre = sorted(q for q, l in cg_plan.items() if l.is_correct)
    i_pre = sorted(q for q, l in cg_plan.items() if l.is_incorrect)
    e_pre = sorted(q for q, l in cg_plan.items() if l.is_error)
    i2c_n = _exact_count(profile.i2c, len(i_pre), "i2c over |I_pre|", profile)
    e2c_n = _exact_count(profile.e2c, len(e_pre), "e2c over |E_pre|", profile)
    c2i_n = _exact_count(profile.c2i, len(c_pre), "c2i over |C_pre|", profile)
    c2e_n = _exact_count(profile.c2e, len(c_pre), "c2e over |C_pre|", profile)

    gain_i = set(rng.sample(i_pre, i2c_n))
    gain_e = set(rng.sample(e_pre, e2c_n))
    lose = rng.sample(c_pre, c2i_n + c2e_n)
    lose_i, lose_e = set(lose[:c2i_n]), set(lose[c2i_n:])

    qr_plan: dict[int, OutcomeLabel] = {}
    error_cycle = 0
    for qid in sorted(cg_plan):
        if qid in gain_i or qid in gain_e:
            qr_plan[qid] = OutcomeLabel.correct()
        elif qid in lose_i:
            qr_plan[qid] = OutcomeLabel.incorrect()
        elif qid in lose_e:
            category = profile.error_mix[error_cycle % len(profile.error_mix)]
            error_cycle += 1
            qr_plan[qid] = OutcomeLabel.error(category)
        else:
            qr_plan[qid] = cg_plan[qid]
    return qr_plan


def _plan_candidates(
    profile: MockProfile,
    cg_plan: dict[int, OutcomeLabel],
    rng: random.Random,
) -> dict[int, list[OutcomeLabel]]:
    m = profile.candidates_per_question
    rows: dict[int, list[OutcomeLabel]] = {}
    for qid in sorted(cg_plan):
        labels = [cg_plan[qid]] + [OutcomeLabel.incorrect()] * (m - 1)
        if m > 1 and not cg_plan[qid].is_correct:
            if rng.random() < float(profile.later_correct_rate):
                labels[rng.randrange(1, m)] = OutcomeLabel.correct()
        rows[qid] = labels
    return rows


def _plan_schema(
    profile: MockProfile,
    gold_schema: SchemaSet,
    catalog: Catalog,
    rng: random.Random,
) -> SchemaSet:
    entries: dict[str, frozenset[str]] = {}
    for table in sorted(gold_schema.tables()):
        kept = [
            column
            for column in sorted(gold_schema.entries[table])
            if rng.random() >= float(profile.schema_drop_rate)
        ]
        entries[table] = frozenset(kept)
    if profile.schema_spurious_rate > 0 and rng.random() < float(profile.schema_spurious_rate):
        gold_pairs = gold_schema.columns()
        pool = sorted(
            (table, column)
            for table, columns in catalog.tables.items()
            for column in columns
            if (table, column) not in gold_pairs
        )
        if pool:
            table, column = pool[rng.randrange(len(pool))]
            entries[table] = entries.get(table, frozenset()) | {column}
    return SchemaSet(entries)


def _tokens(kind: str, qid: int, variant: int = 0) -> tuple[int, int, int]:
    """Deterministic (token_cost, prompt, completion) for a mock record."""
    base = {"schema": 900 + 13 * qid, "cg": 1000 + 7 * qid + 3 * variant,
            "qr": 600 + 11 * qid}[kind]
    prompt = (base * 3) // 4
    return base, prompt, base - prompt


def generate(
    profile: MockProfile,
    manifest_path: str | Path,
    runs_dir: str | Path,
    expected_dir: str | Path,
    *,
    k_list: Sequence[int] = DEFAULT_K_LIST,
    certify_timeout: float = 0.25,
) -> tuple[Path, Path]:
    """Write one run file realizing the profile plus its expected metrics.

    Same profile and seed always produce byte-identical files. Raises
    :class:`ProfileError` (naming the smallest feasible N) when the targets
    are not integral over the dataset size.
    """
    manifest = load_manifest(manifest_path)
    questions = load_dataset(manifest)
    question_ids = [q.question_id for q in questions]
    by_id = {q.question_id: q for q in questions}

    rng = random.Random(profile.seed)
    cg_plan = _plan_outcomes(profile, question_ids, rng)
    candidate_plan = _plan_candidates(profile, cg_plan, rng)
    qr_plan = _plan_transitions(profile, cg_plan, rng)

    catalogs: dict[str, Catalog] = {}
    records: list[dict[str, Any]] = []
    run_records: dict[ModuleKind, dict[int, list[RunRecord]]] = {
        stage: {} for stage in ModuleKind
    }
    schema_scores: dict[int, tuple] = {}

    for qid in sorted(cg_plan):
        question = by_id[qid]
        db_path = database_path(manifest, question.db_id)
        if question.db_id not in catalogs:
            catalogs[question.db_id] = catalog_from_database(db_path)
        catalog = catalogs[question.db_id]

        gold_result = execute_query(db_path, question.gold_sql, certify_timeout * 40)
        if not isinstance(gold_result, Rows):
            raise RuntimeError(f"gold SQL for question {qid} does not execute")
        realizer = _SqlRealizer(db_path, question.gold_sql, gold_result.rows, certify_timeout)

        gold_schema = extract_schema(question.gold_sql, catalog)
        selected_schema = _plan_schema(profile, gold_schema, catalog, rng)
        table_score = selection_scores(selected_schema, gold_schema, "table")
        column_score = (
            selection_scores(selected_schema, gold_schema, "column")
            if gold_schema.columns()
            else None
        )
        schema_scores[qid] = (table_score, column_score)

        cost, prompt, completion = _tokens("schema", qid)
        schema_record = {
            "node_type": "schema_selection",
            "question": question.question,
            "extracted_schema": selected_schema.to_json(),
            "token_cost": cost,
            "llm_calls": 1,
            "prompt_tokens": prompt,
            "completion_tokens": completion,
            "question_id": qid,
            "db_id": question.db_id,
        }
        records.append(schema_record)
        run_records[ModuleKind.SCHEMA_SELECTION].setdefault(qid, []).append(
            _as_run_record(schema_record)
        )

        for index, label in enumerate(candidate_plan[qid]):
            sql = realizer.realize(label, variant=index, salt=qid * 100 + index)
            cost, prompt, completion = _tokens("cg", qid, index)
            record = {
                "node_type": "candidate_generation",
                "question": question.question,
                "SQL": sql,
                "token_cost": cost,
                "llm_calls": 1,
                "prompt_tokens": prompt,
                "completion_tokens": completion,
                "question_id": qid,
                "db_id": question.db_id,
                "candidate_index": index,
            }
            records.append(record)
            run_records[ModuleKind.CANDIDATE_GENERATION].setdefault(qid, []).append(
                _as_run_record(record)
            )

        qr_label = qr_plan[qid]
        if qr_label == cg_plan[qid]:
            qr_sql = realizer.realize(qr_label, variant=0, salt=qid * 100)
        else:
            qr_sql = realizer.realize(qr_label, variant=7, salt=qid * 100 + 77)
        cost, prompt, completion = _tokens("qr", qid)
        qr_record = {
            "node_type": "query_revision",
            "question": question.question,
            "SQL": qr_sql,
            "token_cost": cost,
            "llm_calls": 1,
            "prompt_tokens": prompt,
            "completion_tokens": completion,
            "question_id": qid,
            "db_id": question.db_id,
        }
        records.append(qr_record)
        run_records[ModuleKind.QUERY_REVISION].setdefault(qid, []).append(
            _as_run_record(qr_record)
        )

    runs_dir = Path(runs_dir)
    runs_dir.mkdir(parents=True, exist_ok=True)
    run_path = runs_dir / f"{profile.name}.json"
    run_path.write_text(
        json.dumps(records, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    expected = _expected_document(
        profile, cg_plan, candidate_plan, qr_plan, schema_scores, run_records,
        sorted(cg_plan), k_list,
    )
    expected_dir = Path(expected_dir)
    expected_dir.mkdir(parents=True, exist_ok=True)
    expected_path = expected_dir / f"{profile.name}.expected.json"
    expected_path.write_text(
        json.dumps(expected, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return run_path, expected_path


def _as_run_record(raw: dict[str, Any]) -> RunRecord:
    return validate_record(raw)


def _expected_document(
    profile: MockProfile,
    cg_plan: dict[int, OutcomeLabel],
    candidate_plan: dict[int, list[OutcomeLabel]],
    qr_plan: dict[int, OutcomeLabel],
    schema_scores: dict[int, tuple],
    run_records: dict[ModuleKind, dict[int, list[RunRecord]]],
    question_order: Sequence[int],
    k_list: Sequence[int],
) -> dict[str, Any]:
    cg_rates = outcome_rates_from_labels([cg_plan[qid] for qid in question_order])
    qr_rates = outcome_rates_from_labels([qr_plan[qid] for qid in question_order])
    matrix = CandidateMatrix.build((qid, candidate_plan[qid]) for qid in question_order)
    ledger = RevisionLedger(pre=cg_plan, post=qr_plan)

    def stage_efficiency(stage: ModuleKind) -> dict[str, Any]:
        per_question = [run_records[stage].get(qid, []) for qid in question_order]
        return efficiency_section(efficiency_summary(per_question, stage))

    method_doc = {
        "schema_selection": {
            **selection_aggregate(schema_scores),
            "efficiency": stage_efficiency(ModuleKind.SCHEMA_SELECTION),
        },
        "candidate_generation": {
            "outcome": outcome_section(cg_rates),
            "pass_at_k": passk_section(matrix, k_list),
            "efficiency": stage_efficiency(ModuleKind.CANDIDATE_GENERATION),
        },
        "query_revision": {
            "outcome": outcome_section(qr_rates),
            "transitions": transitions_section(revision_metrics(ledger)),
            "efficiency": stage_efficiency(ModuleKind.QUERY_REVISION),
        },
    }
    return {
        "profile": profile.name,
        "seed": profile.seed,
        "k_list": list(k_list),
        "methods": {profile.name: method_doc},
    }


def default_profiles(base_seed: int = 11) -> list[MockProfile]:
    """The stock verification matrix: degenerate, error-only, mixed,
    multi-candidate, and transition-heavy profiles."""
    f = Fraction
    return [
        MockProfile("all_correct", f(1), f(0), f(0), seed=base_seed),
        MockProfile(
            "errors_only", f(0), f(0), f(1),
            error_mix=_ALL_CATEGORIES, seed=base_seed + 1,
        ),
        MockProfile("incorrect_only", f(0), f(1), f(0), seed=base_seed + 2),
        MockProfile(
            "mixed_basic", f(3, 5), f(3, 10), f(1, 10),
            error_mix=(ErrorCategory.NO_TABLE_OR_COLUMN, ErrorCategory.SYNTAX_ERROR),
            seed=base_seed + 3,
        ),
        MockProfile(
            "mixed_all_errors", f(1, 2), f(1, 4), f(1, 4),
            error_mix=_ALL_CATEGORIES, seed=base_seed + 4,
        ),
        MockProfile(
            "multi_candidate", f(3, 5), f(1, 5), f(1, 5),
            candidates_per_question=5, later_correct_rate=f(1, 2),
            seed=base_seed + 5,
        ),
        MockProfile(
            "revision_gain", f(1, 2), f(3, 10), f(1, 5),
            i2c=f(1, 2), e2c=f(1, 2), c2i=f(1, 10), c2e=f(1, 10),
            seed=base_seed + 6,
        ),
        MockProfile(
            "revision_regress", f(4, 5), f(1, 10), f(1, 10),
            c2i=f(1, 4), c2e=f(1, 8), seed=base_seed + 7,
        ),
        MockProfile(
            "schema_noise", f(7, 10), f(1, 5), f(1, 10),
            schema_drop_rate=f(3, 10), schema_spurious_rate=f(1, 2),
            seed=base_seed + 8,
        ),
        MockProfile(
            "passk_heavy", f(1, 5), f(3, 5), f(1, 5),
            candidates_per_question=20, later_correct_rate=f(3, 4),
            seed=base_seed + 9,
        ),
        MockProfile(
            "timeout_pair", f(9, 10), f(0), f(1, 10),
            error_mix=(ErrorCategory.TIMEOUT, ErrorCategory.OTHER),
            seed=base_seed + 10,
        ),
    ]
