"""Shared domain types, identifier normalization, and run-record validation.

Identifiers are canonicalized once at the boundary (quotes stripped,
lowercased); all downstream set arithmetic assumes canonical names.
Every type here is immutable after validation and safe to share across
parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

__all__ = [
    "ValidationError",
    "normalize_identifier",
    "SchemaSet",
    "ModuleKind",
    "Difficulty",
    "ErrorCategory",
    "OutcomeLabel",
    "RunRecord",
    "QuestionRecord",
    "UsageStats",
    "validate_record",
    "serialize_record",
]


class ValidationError(ValueError):
    """A record or identifier violates a structural invariant."""


# Opening quote character -> matching closing character. Single quotes are
# string literals in SQL, never identifier quotes, so they stay untouched.
_QUOTE_PAIRS = {'"': '"', "`": "`", "[": "]"}


def normalize_identifier(raw: str) -> str:
    """Canonicalize a SQL identifier: strip quote layers, then lowercase.

    Handles double quotes, backticks, and square brackets (the quoting
    styles SQLite accepts). Idempotent.
    """
    if not isinstance(raw, str) or not raw.strip():
        raise ValidationError("identifier must be a non-empty string")
    text = raw.strip()
    while len(text) >= 2 and text[0] in _QUOTE_PAIRS and text[-1] == _QUOTE_PAIRS[text[0]]:
        text = text[1:-1].strip()
        if not text:
            raise ValidationError(f"identifier {raw!r} is empty after unquoting")
    return text.lower()


@dataclass(frozen=True)
class SchemaSet:
    """Tables and columns selected or referenced, canonical-cased.

    An empty column set means the table is referenced at table level only
    (selected with unknown columns, or reached via ``SELECT *``).
    """

    entries: Mapping[str, frozenset[str]] = field(default_factory=dict)

    @staticmethod
    def build(raw: Mapping[str, Iterable[str]]) -> "SchemaSet":
        """Construct from a raw mapping, normalizing every identifier."""
        entries: dict[str, frozenset[str]] = {}
        for table, columns in raw.items():
            name = normalize_identifier(table)
            cols = frozenset(normalize_identifier(c) for c in columns)
            entries[name] = entries.get(name, frozenset()) | cols
        return SchemaSet(entries)

    @staticmethod
    def empty() -> "SchemaSet":
        return SchemaSet({})

    def tables(self) -> frozenset[str]:
        return frozenset(self.entries)

    def columns(self) -> frozenset[tuple[str, str]]:
        """All (table, column) pairs; table-only entries contribute none."""
        return frozenset(
            (table, col) for table, cols in self.entries.items() for col in cols
        )

    def is_empty(self) -> bool:
        return not self.entries

    def to_json(self) -> dict[str, list[str]]:
        return {table: sorted(cols) for table, cols in sorted(self.entries.items())}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SchemaSet):
            return NotImplemented
        return dict(self.entries) == dict(other.entries)


class ModuleKind(str, Enum):
    SCHEMA_SELECTION = "schema_selection"
    CANDIDATE_GENERATION = "candidate_generation"
    QUERY_REVISION = "query_revision"


class Difficulty(str, Enum):
    SIMPLE = "simple"
    MODERATE = "moderate"
    CHALLENGING = "challenging"
    UNLABELED = "unlabeled"

    @staticmethod
    def parse(value: Any) -> "Difficulty":
        """Coerce a dataset-supplied difficulty; unknown values are unlabeled."""
        if isinstance(value, str):
            try:
                return Difficulty(value.strip().lower())
            except ValueError:
                return Difficulty.UNLABELED
        return Difficulty.UNLABELED


class ErrorCategory(str, Enum):
    NO_TABLE_OR_COLUMN = "no_table_or_column"
    NO_FUNCTION = "no_function"
    SYNTAX_ERROR = "syntax_error"
    TIMEOUT = "timeout"
    OTHER = "other"


@dataclass(frozen=True)
class OutcomeLabel:
    """Judged outcome of one executed query: Correct, Incorrect, or Error.

    Error labels carry exactly one :class:`ErrorCategory`.
    """

    kind: str  # "correct" | "incorrect" | "error"
    error_category: ErrorCategory | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("correct", "incorrect", "error"):
            raise ValidationError(f"unknown outcome kind {self.kind!r}")
        if (self.kind == "error") != (self.error_category is not None):
            raise ValidationError("error_category present iff kind is 'error'")

    @staticmethod
    def correct() -> "OutcomeLabel":
        return OutcomeLabel("correct")

    @staticmethod
    def incorrect() -> "OutcomeLabel":
        return OutcomeLabel("incorrect")

    @staticmethod
    def error(category: ErrorCategory) -> "OutcomeLabel":
        return OutcomeLabel("error", category)

    @property
    def is_correct(self) -> bool:
        return self.kind == "correct"

    @property
    def is_incorrect(self) -> bool:
        return self.kind == "incorrect"

    @property
    def is_error(self) -> bool:
        return self.kind == "error"

    def to_json(self) -> dict[str, Any]:
        return {
            "label": self.kind,
            "error_category": self.error_category.value if self.error_category else None,
        }

    @staticmethod
    def from_json(data: Mapping[str, Any]) -> "OutcomeLabel":
        kind = data.get("label")
        category = data.get("error_category")
        if kind == "error":
            return OutcomeLabel.error(ErrorCategory(category))
        if kind in ("correct", "incorrect"):
            return OutcomeLabel(str(kind))
        raise ValidationError(f"unknown outcome label {kind!r}")


@dataclass(frozen=True)
class RunRecord:
    """One module's output for one question, as collected from a run file."""

    node_type: ModuleKind
    question: str
    extracted_schema: SchemaSet | None = None
    sql: str | None = None
    token_cost: int = 0
    llm_calls: int = 0
    question_id: int | None = None
    db_id: str | None = None
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    candidate_index: int | None = None


@dataclass(frozen=True)
class QuestionRecord:
    """One dataset question with its gold SQL annotation."""

    question_id: int
    db_id: str
    question: str
    gold_sql: str
    difficulty: Difficulty = Difficulty.UNLABELED
    evidence: str | None = None

    def __post_init__(self) -> None:
        if not self.gold_sql or not self.gold_sql.strip():
            raise ValidationError(f"question {self.question_id}: gold_sql is empty")


@dataclass(frozen=True)
class UsageStats:
    """Token and LLM-call usage; fractional calls arise from per-question means."""

    tokens: Any  # int or Fraction
    llm_calls: Any  # int or Fraction

    def __post_init__(self) -> None:
        if self.tokens < 0 or self.llm_calls < 0:
            raise ValidationError("usage statistics must be non-negative")


def _where(index: int | None) -> str:
    return f"record {index}: " if index is not None else ""


def _require_non_negative_int(value: Any, name: str, index: int | None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{_where(index)}{name} must be an integer, got {value!r}")
    if value < 0:
        raise ValidationError(f"{_where(index)}negative {name}: {value}")
    return value


def validate_record(raw: Mapping[str, Any], index: int | None = None) -> RunRecord:
    """Check a parsed run-file record against all field invariants.

    Accepts the collected-JSON record shape: ``node_type``, ``question``,
    ``extracted_schema`` or ``SQL``, ``token_cost``, ``llm_calls``, plus the
    optional extensions ``question_id``, ``db_id``, ``prompt_tokens``,
    ``completion_tokens``, and ``candidate_index``. Unknown fields are
    ignored. Errors name the record index and offending field.
    """
    if not isinstance(raw, Mapping):
        raise ValidationError(f"{_where(index)}record must be an object")

    node_raw = raw.get("node_type")
    if node_raw is None:
        raise ValidationError(f"{_where(index)}missing node_type")
    try:
        node_type = ModuleKind(node_raw)
    except ValueError:
        raise ValidationError(f"{_where(index)}unknown node_type {node_raw!r}") from None

    question = raw.get("question")
    if not isinstance(question, str) or not question.strip():
        raise ValidationError(f"{_where(index)}missing or empty question")

    schema_raw = raw.get("extracted_schema")
    sql_raw = raw.get("SQL", raw.get("sql"))

    if node_type is ModuleKind.SCHEMA_SELECTION:
        if schema_raw is None or sql_raw is not None:
            raise ValidationError(
                f"{_where(index)}payload mismatch: {node_type.value} requires "
                "extracted_schema and no SQL"
            )
        if not isinstance(schema_raw, Mapping):
            raise ValidationError(f"{_where(index)}extracted_schema must be a mapping")
        try:
            schema: SchemaSet | None = SchemaSet.build(schema_raw)
        except ValidationError as exc:
            raise ValidationError(f"{_where(index)}extracted_schema: {exc}") from None
        sql = None
    else:
        if sql_raw is None or schema_raw is not None:
            raise ValidationError(
                f"{_where(index)}payload mismatch: {node_type.value} requires "
                "SQL and no extracted_schema"
            )
        if not isinstance(sql_raw, str) or not sql_raw.strip():
            raise ValidationError(f"{_where(index)}SQL must be a non-empty string")
        schema = None
        sql = sql_raw

    token_cost = _require_non_negative_int(raw.get("token_cost"), "token_cost", index)
    llm_calls = _require_non_negative_int(raw.get("llm_calls"), "llm_calls", index)

    prompt_tokens = raw.get("prompt_tokens")
    completion_tokens = raw.get("completion_tokens")
    if prompt_tokens is not None:
        prompt_tokens = _require_non_negative_int(prompt_tokens, "prompt_tokens", index)
    if completion_tokens is not None:
        completion_tokens = _require_non_negative_int(
            completion_tokens, "completion_tokens", index
        )
    if prompt_tokens is not None and completion_tokens is not None:
        if prompt_tokens + completion_tokens != token_cost:
            raise ValidationError(
                f"{_where(index)}prompt_tokens + completion_tokens "
                f"({prompt_tokens} + {completion_tokens}) != token_cost ({token_cost})"
            )

    question_id = raw.get("question_id")
    if question_id is not None and (isinstance(question_id, bool) or not isinstance(question_id, int)):
        raise ValidationError(f"{_where(index)}question_id must be an integer")

    db_id = raw.get("db_id")
    if db_id is not None and not isinstance(db_id, str):
        raise ValidationError(f"{_where(index)}db_id must be a string")

    candidate_index = raw.get("candidate_index")
    if candidate_index is not None:
        candidate_index = _require_non_negative_int(candidate_index, "candidate_index", index)

    return RunRecord(
        node_type=node_type,
        question=question,
        extracted_schema=schema,
        sql=sql,
        token_cost=token_cost,
        llm_calls=llm_calls,
        question_id=question_id,
        db_id=db_id,
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        candidate_index=candidate_index,
    )


def serialize_record(record: RunRecord) -> dict[str, Any]:
    """Render a record back to the collected-JSON shape (round-trip safe)."""
    out: dict[str, Any] = {
        "node_type": record.node_type.value,
        "question": record.question,
    }
    if record.extracted_schema is not None:
        out["extracted_schema"] = record.extracted_schema.to_json()
    if record.sql is not None:
        out["SQL"] = record.sql
    out["token_cost"] = record.token_cost
    out["llm_calls"] = record.llm_calls
    for name in ("question_id", "db_id", "prompt_tokens", "completion_tokens", "candidate_index"):
        value = getattr(record, name)
        if value is not None:
            out[name] = value
    return out
