"""Pipeline orchestration: run configuration, the postprocess / bench /
render / selftest stages, and the section builders for result documents.

Stages communicate through durable files so expensive execution is cached
while metrics iterate:

* postprocess writes per-method judgment logs, schema scores, and
  extraction reports (the only stage that opens database files);
* bench consumes those plus the run records and writes the machine-format
  results document;
* render turns the results document into CSV / markdown / plot data.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from .analysis import (
    RecallBands,
    assign_recall_bands,
    incorrect_overlap,
    outcome_conditioned_recall,
    recall_conditioned_rates,
    solvability_histogram,
    stratify,
)
from .cost import PricingError, estimate_cost, load_pricing, split_token_total
from .executor import (
    Judgment,
    judge_bundles,
    read_judgment_log,
    write_judgment_log,
)
from .ingest import (
    DatasetManifest,
    IngestError,
    RunBundle,
    align_runs,
    database_path,
    load_dataset,
    load_manifest,
    load_run_file,
)
from .metrics import (
    CandidateMatrix,
    EfficiencySummary,
    MetricError,
    OutcomeRates,
    PassAtK,
    RevisionLedger,
    RevisionMetrics,
    SelectionScore,
    efficiency_summary,
    outcome_rates_from_labels,
    pass_at_k,
    revision_metrics,
    selection_scores,
)
from .model import ModuleKind, OutcomeLabel
from .report import cell, emit
from .schema_extract import (
    Catalog,
    SchemaExtractionError,
    catalog_from_database,
    extract_schema_report,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "discover_runs",
    "validate_runs",
    "postprocess",
    "bench",
    "render",
    "selftest",
    "outcome_section",
    "passk_section",
    "transitions_section",
    "selection_aggregate",
    "efficiency_section",
    "file_checksum",
]

DEFAULT_K_LIST = (1, 5, 10, 15, 20)


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    dataset_manifest: Path
    runs_dir: Path
    out_dir: Path
    timeout: float = 30.0
    comparison: str = "set"  # "set" | "multiset"
    float_rel_tol: float | None = None
    k_list: tuple[int, ...] = DEFAULT_K_LIST
    pricing_path: Path | None = None
    pricing_model: str | None = None
    workers: int = 1
    seed: int = 0
    overlap_kind: str = "jaccard"
    overlap_include_errors: bool = False
    schema_pick: str = "last"  # score the last (or first) schema record
    expand_star: bool = False
    prompt_share: Fraction = Fraction(4, 5)

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("worker count must be >= 1")
        if self.comparison not in ("set", "multiset"):
            raise ConfigError(f"unknown comparison mode {self.comparison!r}")
        if self.overlap_kind not in ("jaccard", "overlap"):
            raise ConfigError(f"unknown overlap kind {self.overlap_kind!r}")
        if self.schema_pick not in ("last", "first"):
            raise ConfigError(f"schema_pick must be 'last' or 'first'")
        if not self.k_list or any(k < 1 for k in self.k_list):
            raise ConfigError("k list must contain positive integers")
        if any(a >= b for a, b in zip(self.k_list, self.k_list[1:])):
            raise ConfigError("k list must be strictly increasing")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")


def load_config(path: str | Path, **overrides: Any) -> RunConfig:
    """Read a JSON config file and apply keyword overrides (CLI flags)."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base = path.parent

    def resolve(key: str) -> Path | None:
        value = doc.get(key)
        return (base / value).resolve() if value is not None else None

    merged: dict[str, Any] = {
        "dataset_manifest": resolve("dataset"),
        "runs_dir": resolve("runs"),
        "out_dir": resolve("out"),
        "pricing_path": resolve("pricing"),
    }
    for key, target in (
        ("timeout", "timeout"), ("comparison", "comparison"),
        ("float_rel_tol", "float_rel_tol"), ("k", "k_list"),
        ("workers", "workers"), ("seed", "seed"),
        ("overlap", "overlap_kind"), ("overlap_include_errors", "overlap_include_errors"),
        ("schema_pick", "schema_pick"), ("expand_star", "expand_star"),
        ("model", "pricing_model"),
    ):
        if key in doc:
            merged[target] = doc[key]
    if "prompt_share" in doc:
        merged["prompt_share"] = Fraction(str(doc["prompt_share"]))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    if isinstance(merged.get("k_list"), list):
        merged["k_list"] = tuple(int(k) for k in merged["k_list"])
    for key in ("dataset_manifest", "runs_dir", "out_dir"):
        if merged.get(key) is None:
            raise ConfigError(f"config {path}: missing required key for {key}")
        merged[key] = Path(merged[key])
    if merged.get("pricing_path") is not None:
        merged["pricing_path"] = Path(merged["pricing_path"])
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Shared helpers

def file_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def discover_runs(runs_dir: str | Path) -> dict[str, Path]:
    """Run files in a directory, one method per file, keyed by file stem."""
    runs_dir = Path(runs_dir)
    if not runs_dir.is_dir():
        raise IngestError(f"runs directory not found: {runs_dir}")
    return {path.stem: path for path in sorted(runs_dir.glob("*.json"))}


def _stage_tasks(bundle: RunBundle) -> list[tuple[ModuleKind, int, str]]:
    tasks: list[tuple[ModuleKind, int, str]] = []
    for index, record in enumerate(bundle.candidate_records):
        tasks.append((ModuleKind.CANDIDATE_GENERATION, index, record.sql))
    for index, record in enumerate(bundle.revision_records):
        tasks.append((ModuleKind.QUERY_REVISION, index, record.sql))
    return tasks


def _selected_labels(
    judgments: Sequence[Judgment], stage: ModuleKind
) -> dict[int, OutcomeLabel]:
    """The selected (first) candidate's label per question for one stage."""
    selected: dict[int, OutcomeLabel] = {}
    for judgment in judgments:
        if judgment.stage is stage and judgment.candidate_index == 0:
            selected[judgment.question_id] = judgment.label
    return selected


def _selected_judgments(
    judgments: Sequence[Judgment], stage: ModuleKind
) -> list[Judgment]:
    return [j for j in judgments if j.stage is stage and j.candidate_index == 0]


# ---------------------------------------------------------------------------
# Section builders (shared with the mock generator's expected files)

def outcome_section(rates: OutcomeRates) -> dict[str, Any]:
    return {
        "correct_rate": cell(rates.correct_rate, "percent"),
        "incorrect_rate": cell(rates.incorrect_rate, "percent"),
        "error_rate": cell(rates.error_rate, "percent"),
        "counts": {
            "correct": rates.correct,
            "incorrect": rates.incorrect,
            "error": rates.errors,
            "total": rates.total,
        },
        "error_breakdown": {
            category.value: count
            for category, count in sorted(
                rates.error_breakdown.items(), key=lambda kv: kv[0].value
            )
        },
    }


def passk_section(matrix: CandidateMatrix, k_list: Sequence[int]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k in k_list:
        result: PassAtK = pass_at_k(matrix, k)
        out[str(k)] = {"rate": cell(result.rate, "percent"), "short_rows": result.short_rows}
    return out


def transitions_section(rm: RevisionMetrics) -> dict[str, Any]:
    return {
        "ci": cell(rm.ci, "percent"),
        "i2c": cell(rm.i2c, "percent"),
        "e2c": cell(rm.e2c, "percent"),
        "c2i": cell(rm.c2i, "percent"),
        "c2e": cell(rm.c2e, "percent"),
    }


def selection_aggregate(
    scores: Mapping[int, tuple[SelectionScore, SelectionScore | None]],
) -> dict[str, Any]:
    """Macro (mean of per-question scores) and micro (global counts) P/R/F1."""

    def macro(values: list[Fraction]) -> Fraction | None:
        return sum(values, Fraction(0)) / len(values) if values else None

    def prf_from_counts(hit: int, selected: int, gold: int) -> dict[str, Any]:
        precision = Fraction(hit, selected) if selected else Fraction(0)
        recall = Fraction(hit, gold) if gold else Fraction(0)
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else Fraction(0)
        )
        return {
            "precision": cell(precision, "percent"),
            "recall": cell(recall, "percent"),
            "f1": cell(f1, "percent"),
            "support": {"hit": hit, "selected": selected, "gold": gold},
        }

    doc: dict[str, Any] = {"macro": {}, "micro": {}}
    for level, pick in (("table", 0), ("column", 1)):
        level_scores = [
            pair[pick] for pair in scores.values() if pair[pick] is not None
        ]
        doc["macro"][level] = {
            "precision": cell(macro([s.precision for s in level_scores]), "percent"),
            "recall": cell(macro([s.recall for s in level_scores]), "percent"),
            "f1": cell(macro([s.f1 for s in level_scores]), "percent"),
            "questions": len(level_scores),
        }
        doc["micro"][level] = prf_from_counts(
            sum(s.hit_size for s in level_scores),
            sum(s.selected_size for s in level_scores),
            sum(s.gold_size for s in level_scores),
        )
    return doc


def efficiency_section(summary: EfficiencySummary) -> dict[str, Any]:
    return {
        "mean_tokens": cell(summary.mean_tokens, "number"),
        "mean_llm_calls": cell(summary.mean_llm_calls, "number"),
        "total_tokens": summary.total_tokens,
        "total_llm_calls": summary.total_llm_calls,
        "questions": summary.questions,
        "questions_without_records": summary.questions_without_records,
    }


# ---------------------------------------------------------------------------
# validate

def validate_runs(config: RunConfig) -> dict[str, Any]:
    """Parse and align every run file; returns a per-method report."""
    manifest = load_manifest(config.dataset_manifest)
    questions = load_dataset(manifest)
    methods = discover_runs(config.runs_dir)
    if not methods:
        raise IngestError(f"no run files (*.json) in {config.runs_dir}")
    report: dict[str, Any] = {"dataset": manifest.name, "methods": {}}
    for method, path in methods.items():
        records = load_run_file(path)
        bundles, alignment = align_runs(records, questions)
        attached = sum(b.record_count() for b in bundles)
        report["methods"][method] = {
            "records": len(records),
            "attached": attached,
            "unmatched": alignment.unmatched_count,
            "unmatched_details": alignment.to_json()["unmatched"],
        }
    return report


# ---------------------------------------------------------------------------
# postprocess

def _score_schemas(
    bundles: Sequence[RunBundle],
    manifest: DatasetManifest,
    config: RunConfig,
    catalogs: dict[str, Catalog],
) -> tuple[dict[str, Any], dict[str, Any]]:
    """Per-question schema selection scores plus the extraction report."""
    scores: dict[str, Any] = {}
    extraction: dict[str, Any] = {}
    missing_records = 0
    gold_failures: list[dict[str, Any]] = []
    empty_column_gold: list[int] = []

    for bundle in bundles:
        question = bundle.question
        db_id = question.db_id
        if db_id not in catalogs:
            catalogs[db_id] = catalog_from_database(database_path(manifest, db_id))
        catalog = catalogs[db_id]
        try:
            gold_extraction = extract_schema_report(
                question.gold_sql, catalog, expand_star=config.expand_star
            )
        except SchemaExtractionError as exc:
            gold_failures.append({"question_id": question.question_id, "error": str(exc)})
            extraction[str(question.question_id)] = {
                "parse_ok": False, "error": str(exc),
                "unresolved": [], "ambiguous": [],
            }
            continue
        extraction[str(question.question_id)] = {
            "parse_ok": True,
            "unresolved": [issue.to_json() for issue in gold_extraction.unresolved],
            "ambiguous": [issue.to_json() for issue in gold_extraction.ambiguous],
        }
        if not bundle.schema_records:
            missing_records += 1
            continue
        record = (
            bundle.schema_records[-1]
            if config.schema_pick == "last"
            else bundle.schema_records[0]
        )
        gold_schema = gold_extraction.schema
        if not gold_schema.tables():
            gold_failures.append(
                {"question_id": question.question_id, "error": "gold references no tables"}
            )
            continue
        table_score = selection_scores(record.extracted_schema, gold_schema, "table")
        column_score = None
        if gold_schema.columns():
            column_score = selection_scores(record.extracted_schema, gold_schema, "column")
        else:
            empty_column_gold.append(question.question_id)
        entry: dict[str, Any] = {"table": table_score.to_json()}
        entry["column"] = column_score.to_json() if column_score else None
        scores[str(question.question_id)] = entry

    schema_doc = {
        "scores": scores,
        "diagnostics": {
            "missing_schema_records": missing_records,
            "gold_extraction_failures": gold_failures,
            "gold_empty_column_level": empty_column_gold,
        },
    }
    return schema_doc, extraction


def postprocess(config: RunConfig) -> dict[str, Any]:
    """Judge all methods' SQL and score their schemas; writes durable logs."""
    manifest = load_manifest(config.dataset_manifest)
    questions = load_dataset(manifest)
    methods = discover_runs(config.runs_dir)
    if not methods:
        raise IngestError(f"no run files (*.json) in {config.runs_dir}")
    catalogs: dict[str, Catalog] = {}
    summary: dict[str, Any] = {}

    for method, run_path in methods.items():
        records = load_run_file(run_path)
        bundles, alignment = align_runs(records, questions)

        tasks = []
        for bundle in bundles:
            predictions = _stage_tasks(bundle)
            if predictions:
                tasks.append(
                    (bundle.question, database_path(manifest, bundle.question.db_id), predictions)
                )
        judgments, exclusions = judge_bundles(
            tasks,
            config.timeout,
            workers=config.workers,
            multiset=config.comparison == "multiset",
            float_rel_tol=config.float_rel_tol,
        )

        schema_doc, extraction_doc = _score_schemas(bundles, manifest, config, catalogs)

        method_dir = Path(config.out_dir) / "postprocess" / method
        method_dir.mkdir(parents=True, exist_ok=True)
        header = {
            "dataset": manifest.name,
            "method": method,
            "harness_version": __version__,
            "timeout_seconds": config.timeout,
            "comparison_mode": config.comparison,
            "schema_version": 1,
        }
        write_judgment_log(method_dir / "judgments.json", header, judgments, exclusions)
        write_judgment_log(
            method_dir / "timings.json", header, judgments, exclusions, include_timings=True
        )
        (method_dir / "schema_scores.json").write_text(
            json.dumps(schema_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (method_dir / "alignment.json").write_text(
            json.dumps(alignment.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (method_dir / "extraction_report.json").write_text(
            json.dumps(extraction_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        summary[method] = {
            "judgments": len(judgments),
            "exclusions": len(exclusions),
            "unmatched": alignment.unmatched_count,
        }
    return summary


# ---------------------------------------------------------------------------
# bench

def _parse_exact(text: str) -> Fraction:
    return Fraction(text)


def _schema_scores_from_doc(
    doc: Mapping[str, Any],
) -> dict[int, tuple[SelectionScore, SelectionScore | None]]:
    def score_from_json(data: Mapping[str, Any]) -> SelectionScore:
        return SelectionScore(
            precision=_parse_exact(data["precision"]),
            recall=_parse_exact(data["recall"]),
            f1=_parse_exact(data["f1"]),
            level=data["level"],
            gold_size=data["support"]["gold"],
            selected_size=data["support"]["selected"],
            hit_size=data["support"]["hit"],
            empty_selection=data.get("empty_selection", False),
        )

    out: dict[int, tuple[SelectionScore, SelectionScore | None]] = {}
    for qid_text, entry in doc.get("scores", {}).items():
        table = score_from_json(entry["table"])
        column = score_from_json(entry["column"]) if entry.get("column") else None
        out[int(qid_text)] = (table, column)
    return out


def _method_cost(
    bundles: Sequence[RunBundle],
    active_ids: set[int],
    stage: ModuleKind,
    pricing,
    prompt_share: Fraction,
) -> dict[str, Any] | None:
    prompt_total = Fraction(0)
    completion_total = Fraction(0)
    estimated = False
    questions = 0
    for bundle in bundles:
        if bundle.question.question_id not in active_ids:
            continue
        questions += 1
        for record in bundle.records_for(stage):
            if record.prompt_tokens is not None and record.completion_tokens is not None:
                prompt_total += record.prompt_tokens
                completion_total += record.completion_tokens
            else:
                prompt, completion = split_token_total(record.token_cost, prompt_share)
                prompt_total += prompt
                completion_total += completion
                estimated = True
    if questions == 0:
        return None
    total = estimate_cost(prompt_total, completion_total, pricing)
    note = "estimated-split" if estimated else None
    return {
        "total_cost": cell(total, "cost", note=note),
        "mean_cost": cell(total / questions, "cost", note=note),
        "currency_questions": questions,
    }


def bench(config: RunConfig) -> dict[str, Any]:
    """Compute every metric from postprocess outputs and run records.

    Never opens a database file; reads judgment logs, schema scores, and
    the original run files only.
    """
    manifest = load_manifest(config.dataset_manifest)
    questions = load_dataset(manifest)
    question_ids = {q.question_id for q in questions}
    methods = discover_runs(config.runs_dir)
    post_root = Path(config.out_dir) / "postprocess"

    pricing = None
    pricing_warning = None
    if config.pricing_path is not None:
        try:
            pricing_file = load_pricing(config.pricing_path)
            if config.pricing_model:
                pricing = pricing_file.model(config.pricing_model)
            elif len(pricing_file.models) == 1:
                pricing = next(iter(pricing_file.models.values()))
            else:
                pricing_warning = (
                    "pricing file has several models; set 'model' to choose one"
                )
        except PricingError as exc:
            pricing_warning = str(exc)

    methods_doc: dict[str, Any] = {}
    all_exclusions: dict[int, str] = {}
    final_correct: dict[str, set[int]] = {}
    final_incorrect: dict[str, set[int]] = {}
    final_universe: dict[str, set[int]] = {}

    for method, run_path in methods.items():
        method_dir = post_root / method
        log_path = method_dir / "judgments.json"
        if not log_path.is_file():
            raise IngestError(
                f"no judgment log for method {method!r}; run postprocess first"
            )
        _, judgments, exclusions = read_judgment_log(log_path)
        for exclusion in exclusions:
            all_exclusions[exclusion.question_id] = exclusion.detail
        excluded_ids = {e.question_id for e in exclusions}
        active_ids = question_ids - excluded_ids

        records = load_run_file(run_path)
        bundles, _ = align_runs(records, questions)
        active_bundles = [b for b in bundles if b.question.question_id in active_ids]

        judgments = [j for j in judgments if j.question_id in active_ids]
        doc: dict[str, Any] = {}

        # Schema selection
        schema_doc = json.loads((method_dir / "schema_scores.json").read_text(encoding="utf-8"))
        scores = {
            qid: pair
            for qid, pair in _schema_scores_from_doc(schema_doc).items()
            if qid in active_ids
        }
        schema_section: dict[str, Any] = {}
        if scores:
            schema_section = selection_aggregate(scores)
            schema_section["coverage"] = {
                "scored_questions": len(scores),
                **schema_doc.get("diagnostics", {}),
            }
            schema_section["efficiency"] = efficiency_section(
                efficiency_summary(
                    [b.schema_records for b in active_bundles], ModuleKind.SCHEMA_SELECTION
                )
            )
            if pricing is not None:
                cost_doc = _method_cost(
                    bundles, active_ids, ModuleKind.SCHEMA_SELECTION, pricing, config.prompt_share
                )
                if cost_doc:
                    schema_section["cost"] = cost_doc
        if schema_section:
            doc["schema_selection"] = schema_section

        # Candidate generation / query revision
        stage_labels: dict[ModuleKind, dict[int, OutcomeLabel]] = {}
        for stage, key in (
            (ModuleKind.CANDIDATE_GENERATION, "candidate_generation"),
            (ModuleKind.QUERY_REVISION, "query_revision"),
        ):
            selected = _selected_judgments(judgments, stage)
            if not selected:
                continue
            stage_labels[stage] = {j.question_id: j.label for j in selected}
            rates = outcome_rates_from_labels([j.label for j in selected])
            section: dict[str, Any] = {"outcome": outcome_section(rates)}

            strata = stratify(selected, questions, "difficulty")
            section["by_difficulty"] = {
                stratum.value: outcome_section(stratum_rates)
                for stratum, stratum_rates in strata.items()
            }
            by_db = stratify(selected, questions, "database")
            section["by_database"] = {
                stratum.value: outcome_section(stratum_rates)
                for stratum, stratum_rates in by_db.items()
            }

            if stage is ModuleKind.CANDIDATE_GENERATION:
                rows: dict[int, list[tuple[int, OutcomeLabel]]] = {}
                for judgment in judgments:
                    if judgment.stage is stage:
                        rows.setdefault(judgment.question_id, []).append(
                            (judgment.candidate_index, judgment.label)
                        )
                matrix = CandidateMatrix.build(
                    (qid, [label for _, label in sorted(entries)])
                    for qid, entries in sorted(rows.items())
                )
                section["pass_at_k"] = passk_section(matrix, config.k_list)

            section["efficiency"] = efficiency_section(
                efficiency_summary([b.records_for(stage) for b in active_bundles], stage)
            )
            if pricing is not None:
                cost_doc = _method_cost(bundles, active_ids, stage, pricing, config.prompt_share)
                if cost_doc:
                    section["cost"] = cost_doc
            doc[key] = section

        # Revision transitions
        cg_labels = stage_labels.get(ModuleKind.CANDIDATE_GENERATION, {})
        qr_labels = stage_labels.get(ModuleKind.QUERY_REVISION, {})
        common = sorted(set(cg_labels) & set(qr_labels))
        if common:
            ledger = RevisionLedger(
                pre={qid: cg_labels[qid] for qid in common},
                post={qid: qr_labels[qid] for qid in common},
            )
            doc.setdefault("query_revision", {})["transitions"] = transitions_section(
                revision_metrics(ledger)
            )

        # Recall-conditioned analyses
        if scores and (cg_labels or qr_labels):
            table_recall = {qid: pair[0].recall for qid, pair in scores.items()}
            column_recall = {
                qid: pair[1].recall for qid, pair in scores.items() if pair[1] is not None
            }
            bands: RecallBands = assign_recall_bands(
                table_recall, column_recall, set(scores)
            )
            conditioned = recall_conditioned_rates(bands, cg_labels, qr_labels)
            doc["recall_conditioned"] = {
                band: {
                    stage_name: cell(rate, "percent")
                    for stage_name, rate in stage_rates.items()
                }
                for band, stage_rates in conditioned.items()
            }
            doc["recall_conditioned_skipped"] = bands.skipped
            means = outcome_conditioned_recall(column_recall, cg_labels, qr_labels)
            doc["outcome_conditioned_recall"] = {
                scenario: cell(value, "percent") for scenario, value in means.items()
            }

        # Cross-method bookkeeping: final stage = revision when present
        final_labels = qr_labels or cg_labels
        if final_labels:
            final_universe[method] = set(final_labels)
            final_correct[method] = {
                qid for qid, label in final_labels.items() if label.is_correct
            }
            wrong = {
                qid for qid, label in final_labels.items()
                if label.is_incorrect
                or (config.overlap_include_errors and label.is_error)
            }
            final_incorrect[method] = wrong

        methods_doc[method] = doc

    cross: dict[str, Any] = {}
    if len(final_incorrect) >= 2:
        try:
            overlap = incorrect_overlap(
                final_incorrect, kind=config.overlap_kind, universes=final_universe
            )
            cross["incorrect_overlap"] = overlap.to_json()
        except MetricError as exc:
            cross["incorrect_overlap_warning"] = str(exc)
    if final_correct:
        histogram = solvability_histogram(final_correct, [
            q for q in questions if q.question_id not in all_exclusions
        ])
        cross["solvability"] = {
            difficulty: {str(count): value for count, value in sorted(bins.items())}
            for difficulty, bins in sorted(histogram.items())
        }

    results: dict[str, Any] = {
        "schema_version": 1,
        "header": {
            "dataset": manifest.name,
            "model": config.pricing_model,
            "harness_version": __version__,
            "timeout_seconds": config.timeout,
            "comparison_mode": config.comparison,
            "k_list": list(config.k_list),
            "excluded_questions": {
                "count": len(all_exclusions),
                "question_ids": sorted(all_exclusions),
            },
        },
        "methods": methods_doc,
        "cross_method": cross,
    }
    if pricing_warning:
        results["header"]["pricing_warning"] = pricing_warning

    emit(results, ["machine"], Path(config.out_dir) / "bench")
    return results


# ---------------------------------------------------------------------------
# render

def render(config: RunConfig, formats: Sequence[str] = ("csv", "markdown", "plotdata")) -> list[dict[str, str]]:
    results_path = Path(config.out_dir) / "bench" / "results.json"
    if not results_path.is_file():
        raise IngestError(f"no bench results at {results_path}; run bench first")
    results = json.loads(results_path.read_text(encoding="utf-8"))
    return emit(results, formats, Path(config.out_dir) / "report")


# ---------------------------------------------------------------------------
# selftest

def selftest(config: RunConfig) -> dict[str, Any]:
    """Judge every gold query against itself; verifies CR=100%, ER=0%,
    and that database files are byte-unchanged."""
    manifest = load_manifest(config.dataset_manifest)
    questions = load_dataset(manifest)
    db_ids = sorted({q.db_id for q in questions})
    checksums = {
        db_id: file_checksum(database_path(manifest, db_id)) for db_id in db_ids
    }

    tasks = []
    for question in questions:
        tasks.append(
            (
                question,
                database_path(manifest, question.db_id),
                [(ModuleKind.CANDIDATE_GENERATION, 0, question.gold_sql)],
            )
        )
    judgments, exclusions = judge_bundles(
        tasks,
        config.timeout,
        workers=config.workers,
        multiset=config.comparison == "multiset",
        float_rel_tol=config.float_rel_tol,
    )
    rates = outcome_rates_from_labels([j.label for j in judgments]) if judgments else None
    checksums_after = {
        db_id: file_checksum(database_path(manifest, db_id)) for db_id in db_ids
    }
    not_correct = [j.question_id for j in judgments if not j.label.is_correct]

    out = {
        "dataset": manifest.name,
        "questions": len(questions),
        "judged": len(judgments),
        "excluded": [e.to_json() for e in exclusions],
        "correct_rate": str(rates.correct_rate) if rates else None,
        "error_rate": str(rates.error_rate) if rates else None,
        "not_correct_question_ids": not_correct,
        "databases_unchanged": checksums == checksums_after,
        "ok": not not_correct and checksums == checksums_after,
    }
    return out
