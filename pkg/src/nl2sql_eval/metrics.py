"""Metric arithmetic: selection P/R/F1, outcome rates, Pass@k, transitions.

Every rate is computed as an exact :class:`fractions.Fraction`; rounding
happens only at report rendering. This makes partition identities (for
example CR + IR + ER = 1) testable as exact equalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .model import ErrorCategory, ModuleKind, OutcomeLabel, SchemaSet
from .executor import Judgment

__all__ = [
    "MetricError",
    "SelectionScore",
    "selection_scores",
    "OutcomeRates",
    "outcome_rates",
    "outcome_rates_from_labels",
    "CandidateMatrix",
    "PassAtK",
    "pass_at_k",
    "RevisionLedger",
    "RevisionMetrics",
    "revision_metrics",
    "EfficiencySummary",
    "efficiency_summary",
]


class MetricError(ValueError):
    """A metric was requested over inputs that leave it undefined."""


# ---------------------------------------------------------------------------
# Schema selection (precision / recall / F1)

@dataclass(frozen=True)
class SelectionScore:
    """Precision, recall, and F1 of a selected element set against gold."""

    precision: Fraction
    recall: Fraction
    f1: Fraction
    level: str  # "table" | "column"
    gold_size: int
    selected_size: int
    hit_size: int
    empty_selection: bool = False

    def to_json(self) -> dict:
        return {
            "precision": str(self.precision),
            "recall": str(self.recall),
            "f1": str(self.f1),
            "level": self.level,
            "support": {
                "gold": self.gold_size,
                "selected": self.selected_size,
                "hit": self.hit_size,
            },
            "empty_selection": self.empty_selection,
        }


def _prf(gold: frozenset, selected: frozenset, level: str) -> SelectionScore:
    hit = gold & selected
    empty = len(selected) == 0
    precision = Fraction(len(hit), len(selected)) if selected else Fraction(0)
    recall = Fraction(len(hit), len(gold))
    if precision + recall == 0:
        f1 = Fraction(0)
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return SelectionScore(
        precision=precision,
        recall=recall,
        f1=f1,
        level=level,
        gold_size=len(gold),
        selected_size=len(selected),
        hit_size=len(hit),
        empty_selection=empty,
    )


def selection_scores(selected: SchemaSet, gold: SchemaSet, level: str) -> SelectionScore:
    """Score a selected schema against the gold schema at one granularity.

    Table level compares table-name sets; column level compares
    (table, column) pairs, so a table-only selection contributes nothing
    there. An empty selection scores precision 0 with a flag rather than
    failing. The gold set must be non-empty at the requested level.
    """
    if level == "table":
        gold_set: frozenset = gold.tables()
        selected_set: frozenset = selected.tables()
    elif level == "column":
        gold_set = gold.columns()
        selected_set = selected.columns()
    else:
        raise MetricError(f"unknown selection level {level!r}")
    if not gold_set:
        raise MetricError(f"gold schema is empty at {level} level")
    return _prf(gold_set, selected_set, level)


# ---------------------------------------------------------------------------
# Outcome rates (CR / IR / ER)

@dataclass(frozen=True)
class OutcomeRates:
    correct_rate: Fraction
    incorrect_rate: Fraction
    error_rate: Fraction
    correct: int
    incorrect: int
    errors: int
    total: int
    error_breakdown: Mapping[ErrorCategory, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "correct_rate": str(self.correct_rate),
            "incorrect_rate": str(self.incorrect_rate),
            "error_rate": str(self.error_rate),
            "counts": {
                "correct": self.correct,
                "incorrect": self.incorrect,
                "error": self.errors,
                "total": self.total,
            },
            "error_breakdown": {
                category.value: self.error_breakdown.get(category, 0)
                for category in ErrorCategory
            },
        }


def outcome_rates_from_labels(labels: Iterable[OutcomeLabel]) -> OutcomeRates:
    """Partition labels into C / I / E and compute exact rates."""
    labels = list(labels)
    if not labels:
        raise MetricError("cannot compute outcome rates over zero questions")
    correct = sum(1 for label in labels if label.is_correct)
    incorrect = sum(1 for label in labels if label.is_incorrect)
    breakdown: dict[ErrorCategory, int] = {}
    for label in labels:
        if label.is_error:
            breakdown[label.error_category] = breakdown.get(label.error_category, 0) + 1
    errors = sum(breakdown.values())
    total = len(labels)
    return OutcomeRates(
        correct_rate=Fraction(correct, total),
        incorrect_rate=Fraction(incorrect, total),
        error_rate=Fraction(errors, total),
        correct=correct,
        incorrect=incorrect,
        errors=errors,
        total=total,
        error_breakdown=breakdown,
    )


def outcome_rates(judgments: Sequence[Judgment]) -> OutcomeRates:
    """Outcome rates over one stage's judgments, one judgment per question."""
    stages = {j.stage for j in judgments}
    if len(stages) > 1:
        raise MetricError(f"judgments span multiple stages: {sorted(s.value for s in stages)}")
    seen: set[int] = set()
    for j in judgments:
        if j.question_id in seen:
            raise MetricError(f"multiple judgments for question {j.question_id}")
        seen.add(j.question_id)
    return outcome_rates_from_labels(j.label for j in judgments)


# ---------------------------------------------------------------------------
# Pass@k

@dataclass(frozen=True)
class CandidateMatrix:
    """Ordered per-question candidate outcome lists for one stage."""

    rows: tuple[tuple[int, tuple[OutcomeLabel, ...]], ...]  # (question_id, labels)

    @staticmethod
    def build(rows: Iterable[tuple[int, Sequence[OutcomeLabel]]]) -> "CandidateMatrix":
        packed = tuple((qid, tuple(labels)) for qid, labels in rows)
        seen: set[int] = set()
        for qid, _ in packed:
            if qid in seen:
                raise MetricError(f"duplicate question {qid} in candidate matrix")
            seen.add(qid)
        return CandidateMatrix(packed)

    @property
    def n(self) -> int:
        return len(self.rows)

    def max_candidates(self) -> int:
        return max((len(labels) for _, labels in self.rows), default=0)


@dataclass(frozen=True)
class PassAtK:
    rate: Fraction
    k: int
    short_rows: int  # questions with fewer than k candidates


def pass_at_k(matrix: CandidateMatrix, k: int) -> PassAtK:
    """Fraction of questions with a correct candidate among the first k.

    Questions holding fewer than k candidates are scored over all they
    have and counted in the short-row diagnostic.
    """
    if k < 1:
        raise MetricError("k must be >= 1")
    if matrix.n == 0:
        raise MetricError("cannot compute Pass@k over zero questions")
    hits = 0
    short_rows = 0
    for _, labels in matrix.rows:
        if len(labels) < k:
            short_rows += 1
        if any(label.is_correct for label in labels[:k]):
            hits += 1
    return PassAtK(rate=Fraction(hits, matrix.n), k=k, short_rows=short_rows)


# ---------------------------------------------------------------------------
# Revision transitions

@dataclass(frozen=True)
class RevisionLedger:
    """Pre- and post-revision outcome labels over the same question set."""

    pre: Mapping[int, OutcomeLabel]
    post: Mapping[int, OutcomeLabel]

    def __post_init__(self) -> None:
        if set(self.pre) != set(self.post):
            missing = set(self.pre) ^ set(self.post)
            raise MetricError(
                f"pre and post cover different questions (symmetric difference {sorted(missing)})"
            )
        if not self.pre:
            raise MetricError("revision ledger is empty")

    def _set(self, which: Mapping[int, OutcomeLabel], test) -> frozenset[int]:
        return frozenset(qid for qid, label in which.items() if test(label))

    @property
    def c_pre(self) -> frozenset[int]:
        return self._set(self.pre, lambda l: l.is_correct)

    @property
    def i_pre(self) -> frozenset[int]:
        return self._set(self.pre, lambda l: l.is_incorrect)

    @property
    def e_pre(self) -> frozenset[int]:
        return self._set(self.pre, lambda l: l.is_error)

    @property
    def c_post(self) -> frozenset[int]:
        return self._set(self.post, lambda l: l.is_correct)

    @property
    def i_post(self) -> frozenset[int]:
        return self._set(self.post, lambda l: l.is_incorrect)

    @property
    def e_post(self) -> frozenset[int]:
        return self._set(self.post, lambda l: l.is_error)

    @property
    def cr_pre(self) -> Fraction:
        return Fraction(len(self.c_pre), len(self.pre))

    @property
    def cr_post(self) -> Fraction:
        return Fraction(len(self.c_post), len(self.post))


@dataclass(frozen=True)
class RevisionMetrics:
    """CI and the four directed transition rates; None marks a zero denominator."""

    ci: Fraction | None
    i2c: Fraction | None
    e2c: Fraction | None
    c2i: Fraction | None
    c2e: Fraction | None

    def to_json(self) -> dict:
        return {
            name: (None if value is None else str(value))
            for name, value in (
                ("ci", self.ci), ("i2c", self.i2c), ("e2c", self.e2c),
                ("c2i", self.c2i), ("c2e", self.c2e),
            )
        }


def revision_metrics(ledger: RevisionLedger) -> RevisionMetrics:
    """Relative correctness improvement plus the four transition rates.

    Each metric with a zero denominator is reported as None
    (not-applicable), never coerced to 0.
    """
    c_pre, i_pre, e_pre = ledger.c_pre, ledger.i_pre, ledger.e_pre
    c_post, i_post, e_post = ledger.c_post, ledger.i_post, ledger.e_post

    def ratio(numerator: int, denominator: int) -> Fraction | None:
        return Fraction(numerator, denominator) if denominator else None

    ci = None
    if ledger.cr_pre != 0:
        ci = (ledger.cr_post - ledger.cr_pre) / ledger.cr_pre
    return RevisionMetrics(
        ci=ci,
        i2c=ratio(len(i_pre & c_post), len(i_pre)),
        e2c=ratio(len(e_pre & c_post), len(e_pre)),
        c2i=ratio(len(c_pre & i_post), len(c_pre)),
        c2e=ratio(len(c_pre & e_post), len(c_pre)),
    )


# ---------------------------------------------------------------------------
# Efficiency

@dataclass(frozen=True)
class EfficiencySummary:
    """Per-question mean and total token/call usage for one stage."""

    stage: ModuleKind
    mean_tokens: Fraction
    mean_llm_calls: Fraction
    total_tokens: int
    total_llm_calls: int
    questions: int
    questions_without_records: int

    def to_json(self) -> dict:
        return {
            "stage": self.stage.value,
            "mean_tokens": str(self.mean_tokens),
            "mean_llm_calls": str(self.mean_llm_calls),
            "total_tokens": self.total_tokens,
            "total_llm_calls": self.total_llm_calls,
            "questions": self.questions,
            "questions_without_records": self.questions_without_records,
        }


def efficiency_summary(
    per_question_records: Sequence[Sequence],
    stage: ModuleKind,
) -> EfficiencySummary:
    """Aggregate usage for one stage over aligned bundles.

    ``per_question_records`` holds, per question, the stage's run records
    (self-consistency methods emit one record per LLM invocation, so sums
    naturally count n calls). Questions with no records contribute zero and
    are counted in the coverage diagnostic.
    """
    if not per_question_records:
        raise MetricError("no questions to aggregate")
    total_tokens = 0
    total_calls = 0
    uncovered = 0
    for records in per_question_records:
        if not records:
            uncovered += 1
            continue
        total_tokens += sum(r.token_cost for r in records)
        total_calls += sum(r.llm_calls for r in records)
    n = len(per_question_records)
    return EfficiencySummary(
        stage=stage,
        mean_tokens=Fraction(total_tokens, n),
        mean_llm_calls=Fraction(total_calls, n),
        total_tokens=total_tokens,
        total_llm_calls=total_calls,
        questions=n,
        questions_without_records=uncovered,
    )
