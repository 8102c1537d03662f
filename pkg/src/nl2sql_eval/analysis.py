"""Cross-cutting studies: stratified rates, incorrect-set overlap matrices,
solvability histograms, and schema-recall-conditioned breakdowns."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import AbstractSet, Mapping, Sequence

from .executor import Judgment
from .metrics import MetricError, OutcomeRates, outcome_rates_from_labels
from .model import Difficulty, OutcomeLabel, QuestionRecord

__all__ = [
    "StratumKey",
    "stratify",
    "OverlapMatrix",
    "incorrect_overlap",
    "solvability_histogram",
    "RecallBands",
    "recall_conditioned_rates",
    "outcome_conditioned_recall",
]

RECALL_FULL = "recall=1"
RECALL_PARTIAL = "recall<1"

_DIMENSIONS = ("difficulty", "database", "recall_band")


@dataclass(frozen=True)
class StratumKey:
    dimension: str
    value: str

    def __post_init__(self) -> None:
        if self.dimension not in _DIMENSIONS:
            raise MetricError(f"unknown stratification dimension {self.dimension!r}")
        if self.dimension == "recall_band" and self.value not in (RECALL_FULL, RECALL_PARTIAL):
            raise MetricError(f"unknown recall band {self.value!r}")


def stratify(
    judgments: Sequence[Judgment],
    questions: Sequence[QuestionRecord],
    dimension: str,
    *,
    recall_bands: Mapping[int, str] | None = None,
) -> dict[StratumKey, OutcomeRates]:
    """Outcome rates computed independently per stratum.

    ``dimension`` is one of difficulty, database, or recall_band (the last
    requires a per-question band mapping). Strata with zero questions are
    omitted; judgments for questions outside the attribute mapping fall
    into "unlabeled" (difficulty) or are skipped (recall_band).
    """
    if dimension not in _DIMENSIONS:
        raise MetricError(f"unknown stratification dimension {dimension!r}")
    by_id = {q.question_id: q for q in questions}
    groups: dict[str, list[OutcomeLabel]] = {}
    for judgment in judgments:
        question = by_id.get(judgment.question_id)
        if dimension == "difficulty":
            value = question.difficulty.value if question else Difficulty.UNLABELED.value
        elif dimension == "database":
            if question is None:
                continue
            value = question.db_id
        else:
            if recall_bands is None:
                raise MetricError("recall_band stratification requires a band mapping")
            band = recall_bands.get(judgment.question_id)
            if band is None:
                continue
            value = band
        groups.setdefault(value, []).append(judgment.label)
    return {
        StratumKey(dimension, value): outcome_rates_from_labels(labels)
        for value, labels in sorted(groups.items())
    }


@dataclass(frozen=True)
class OverlapMatrix:
    """Symmetric set-similarity matrix over methods' question-id sets."""

    methods: tuple[str, ...]
    coefficients: tuple[tuple[Fraction, ...], ...]
    kind: str  # "jaccard" | "overlap"

    def to_json(self) -> dict:
        return {
            "methods": list(self.methods),
            "kind": self.kind,
            "matrix": [[str(value) for value in row] for row in self.coefficients],
            "matrix_values": [[float(value) for value in row] for row in self.coefficients],
        }


def _pair_coefficient(a: AbstractSet[int], b: AbstractSet[int], kind: str) -> Fraction:
    inter = len(a & b)
    if kind == "jaccard":
        union = len(a | b)
        return Fraction(inter, union) if union else Fraction(0)
    smaller = min(len(a), len(b))
    return Fraction(inter, smaller) if smaller else Fraction(0)


def incorrect_overlap(
    method_sets: Mapping[str, AbstractSet[int]],
    *,
    kind: str = "jaccard",
    universes: Mapping[str, AbstractSet[int]] | None = None,
) -> OverlapMatrix:
    """Pairwise overlap of per-method question-id sets (default Jaccard).

    All methods must have been judged over the same question universe;
    a mismatch is an error that lists the symmetric difference. Pairs with
    an empty set score 0; the diagonal is 1 only for non-empty sets.
    """
    if len(method_sets) < 2:
        raise MetricError("overlap requires at least two methods")
    if kind not in ("jaccard", "overlap"):
        raise MetricError(f"unknown overlap coefficient {kind!r}")
    if universes:
        names = sorted(universes)
        reference = set(universes[names[0]])
        for name in names[1:]:
            if set(universes[name]) != reference:
                difference = sorted(set(universes[name]) ^ reference)
                raise MetricError(
                    f"question universes differ between {names[0]!r} and {name!r}: "
                    f"symmetric difference {difference}"
                )
    methods = tuple(sorted(method_sets))
    matrix: list[tuple[Fraction, ...]] = []
    for row_name in methods:
        row: list[Fraction] = []
        a = method_sets[row_name]
        for col_name in methods:
            if row_name == col_name:
                row.append(Fraction(1) if a else Fraction(0))
            else:
                row.append(_pair_coefficient(a, method_sets[col_name], kind))
        matrix.append(tuple(row))
    return OverlapMatrix(methods=methods, coefficients=tuple(matrix), kind=kind)


def solvability_histogram(
    method_correct_sets: Mapping[str, AbstractSet[int]],
    questions: Sequence[QuestionRecord],
) -> dict[str, dict[int, int]]:
    """Bin questions by how many methods solved them, per difficulty.

    Bins run 0..|methods| inclusive (zeros kept), so each difficulty's bin
    counts sum to its question count; bin 0 is the solved-by-nobody set.
    """
    if not method_correct_sets:
        raise MetricError("histogram requires at least one method")
    method_count = len(method_correct_sets)
    histogram: dict[str, dict[int, int]] = {}
    for question in questions:
        solvers = sum(
            1 for correct in method_correct_sets.values() if question.question_id in correct
        )
        bins = histogram.setdefault(
            question.difficulty.value, {i: 0 for i in range(method_count + 1)}
        )
        bins[solvers] += 1
    return histogram


@dataclass(frozen=True)
class RecallBands:
    """Per-question recall band assignment plus a coverage diagnostic."""

    bands: Mapping[int, str]
    skipped: int  # questions lacking schema records


def assign_recall_bands(
    table_recall: Mapping[int, Fraction],
    column_recall: Mapping[int, Fraction],
    question_ids: AbstractSet[int],
) -> RecallBands:
    """Band questions at full schema recall: both levels must reach 1."""
    bands: dict[int, str] = {}
    skipped = 0
    for qid in question_ids:
        if qid not in table_recall or qid not in column_recall:
            skipped += 1
            continue
        full = table_recall[qid] == 1 and column_recall[qid] == 1
        bands[qid] = RECALL_FULL if full else RECALL_PARTIAL
    return RecallBands(bands=bands, skipped=skipped)


def recall_conditioned_rates(
    bands: RecallBands,
    cg_labels: Mapping[int, OutcomeLabel],
    qr_labels: Mapping[int, OutcomeLabel],
) -> dict[str, dict[str, Fraction | None]]:
    """Correct rate per stage within each schema-recall band.

    Bands with no questions are omitted; a stage with no judged questions
    in a band reports None.
    """

    def stage_rate(band: str, labels: Mapping[int, OutcomeLabel]) -> Fraction | None:
        members = [qid for qid, b in bands.bands.items() if b == band and qid in labels]
        if not members:
            return None
        correct = sum(1 for qid in members if labels[qid].is_correct)
        return Fraction(correct, len(members))

    out: dict[str, dict[str, Fraction | None]] = {}
    for band in (RECALL_FULL, RECALL_PARTIAL):
        if not any(b == band for b in bands.bands.values()):
            continue
        out[band] = {
            "candidate_generation": stage_rate(band, cg_labels),
            "query_revision": stage_rate(band, qr_labels),
        }
    return out


def outcome_conditioned_recall(
    recall: Mapping[int, Fraction],
    cg_labels: Mapping[int, OutcomeLabel],
    qr_labels: Mapping[int, OutcomeLabel],
) -> dict[str, Fraction | None]:
    """Mean schema recall over each stage's correct / wrong question subsets.

    "Wrong" covers both incorrect and error outcomes. Empty subsets report
    None (not-applicable).
    """

    def mean_over(labels: Mapping[int, OutcomeLabel], want_correct: bool) -> Fraction | None:
        values = [
            recall[qid]
            for qid, label in labels.items()
            if qid in recall and label.is_correct == want_correct
        ]
        if not values:
            return None
        return sum(values, Fraction(0)) / len(values)

    return {
        "cg_correct": mean_over(cg_labels, True),
        "cg_wrong": mean_over(cg_labels, False),
        "qr_correct": mean_over(qr_labels, True),
        "qr_wrong": mean_over(qr_labels, False),
    }
