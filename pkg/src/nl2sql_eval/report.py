"""Render benchmark results as machine JSON, CSV, markdown, and plot data.

Every numeric cell carries its exact rational alongside the rendered
rounding (half-to-even; two decimals for percentages, four for costs).
Emission is byte-deterministic: stable key order, no timestamps, and a
manifest of content digests.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping

__all__ = [
    "ReportError",
    "cell",
    "parse_cell",
    "render_fraction",
    "compute_highlights",
    "emit",
    "FORMATS",
]

FORMATS = ("machine", "csv", "markdown", "plotdata")

# Cell kinds and the columns they imply: percents render at 2 decimals,
# costs at 4, plain numbers at 2, counts as integers.
_KIND_PLACES = {"percent": 2, "cost": 4, "number": 2}


class ReportError(ValueError):
    """Unknown format or unwritable output target."""


def render_fraction(value: Fraction, kind: str) -> str:
    """Deterministic half-to-even rendering of an exact rational."""
    if kind == "count":
        return str(int(value))
    places = _KIND_PLACES[kind]
    scaled = value * 100 if kind == "percent" else value
    quantum = Decimal(1).scaleb(-places)
    decimal_value = (
        Decimal(scaled.numerator) / Decimal(scaled.denominator)
        if isinstance(scaled, Fraction)
        else Decimal(scaled)
    )
    text = str(decimal_value.quantize(quantum, rounding=ROUND_HALF_EVEN))
    return f"{text}%" if kind == "percent" else text


def cell(value: Fraction | int | None, kind: str = "percent", note: str | None = None) -> dict | None:
    """Build a machine-format numeric cell; None stays None (not-applicable)."""
    if value is None:
        return None
    if kind not in _KIND_PLACES and kind != "count":
        raise ReportError(f"unknown cell kind {kind!r}")
    fraction = Fraction(value)
    out: dict[str, Any] = {
        "exact": f"{fraction.numerator}/{fraction.denominator}",
        "value": float(fraction),
        "rendered": render_fraction(fraction, kind),
        "kind": kind,
    }
    if note:
        out["note"] = note
    return out


def parse_cell(data: Mapping[str, Any] | None) -> Fraction | None:
    """Recover the exact rational from a machine-format cell."""
    if data is None:
        return None
    numerator, denominator = data["exact"].split("/")
    return Fraction(int(numerator), int(denominator))


def _dump_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _cell_text(data: Mapping[str, Any] | None) -> str:
    if data is None:
        return "n/a"
    return str(data.get("rendered", ""))


# ---------------------------------------------------------------------------
# CSV rendering: one long-format table of every numeric cell.

def _walk_cells(node: Any, path: tuple[str, ...]) -> Iterable[tuple[tuple[str, ...], Mapping]]:
    if isinstance(node, Mapping):
        if "exact" in node and "rendered" in node:
            yield path, node
            return
        for key in sorted(node):
            yield from _walk_cells(node[key], path + (str(key),))
    elif isinstance(node, list):
        for i, item in enumerate(node):
            yield from _walk_cells(item, path + (str(i),))


def _render_csv(results: Mapping[str, Any]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["path", "exact", "value", "rendered"])
    for key, value in sorted(results.get("header", {}).items()):
        if isinstance(value, (str, int, float)) or value is None:
            writer.writerow([f"header.{key}", "", value, value])
    for path, data in _walk_cells(results, ()):
        writer.writerow([".".join(path), data["exact"], data["value"], data["rendered"]])
    return buffer.getvalue()


# ---------------------------------------------------------------------------
# Markdown rendering

# Higher is better for most metrics; these are better when lower.
_LOWER_BETTER = {
    "incorrect_rate", "error_rate", "c2i", "c2e",
    "mean_tokens", "mean_llm_calls", "total_cost", "mean_cost",
}


def _mark_best(
    rows: list[tuple[str, dict[str, Mapping | None]]], column: str
) -> dict[str, str]:
    """Annotate best/second-best per column; exact ties share the mark."""
    scored = [
        (name, parse_cell(cells.get(column)))
        for name, cells in rows
        if cells.get(column) is not None
    ]
    values = sorted(
        {value for _, value in scored},
        reverse=column.rsplit(".", 1)[-1] not in _LOWER_BETTER,
    )
    marks: dict[str, str] = {}
    for name, value in scored:
        if value is None or not values:
            continue
        if value == values[0]:
            marks[name] = "best"
        elif len(values) > 1 and value == values[1]:
            marks[name] = "second"
    return marks


def _md_table(
    title: str,
    columns: list[tuple[str, str]],  # (column key, display header)
    rows: list[tuple[str, dict[str, Mapping | None]]],
) -> str:
    lines = [f"### {title}", ""]
    lines.append("| method | " + " | ".join(header for _, header in columns) + " |")
    lines.append("|" + " --- |" * (len(columns) + 1))
    marks_by_column = {key: _mark_best(rows, key) for key, _ in columns}
    for name, cells in rows:
        rendered = []
        for key, _ in columns:
            text = _cell_text(cells.get(key))
            mark = marks_by_column[key].get(name)
            if mark == "best":
                text = f"**{text}**"
            elif mark == "second":
                text = f"*{text}*"
            rendered.append(text)
        lines.append(f"| {name} | " + " | ".join(rendered) + " |")
    lines.append("")
    return "\n".join(lines)


def _method_cells(results: Mapping[str, Any]) -> list[tuple[str, dict]]:
    return sorted(results.get("methods", {}).items())


def _comparison_tables(results: Mapping[str, Any]) -> list[dict[str, Any]]:
    """The method-comparison tables shared by markdown rendering and the
    machine-format highlight annotations."""
    methods = _method_cells(results)
    tables: list[dict[str, Any]] = []
    if not methods:
        return tables

    schema_rows = []
    for name, doc in methods:
        macro = doc.get("schema_selection", {}).get("macro", {})
        if not macro:
            continue
        cells = {}
        for level in ("table", "column"):
            for metric in ("precision", "recall", "f1"):
                cells[f"{level}.{metric}"] = macro.get(level, {}).get(metric)
        efficiency = doc.get("schema_selection", {}).get("efficiency", {})
        cells["mean_tokens"] = efficiency.get("mean_tokens")
        cells["mean_llm_calls"] = efficiency.get("mean_llm_calls")
        schema_rows.append((name, cells))
    if schema_rows:
        tables.append({
            "id": "schema_selection",
            "title": "Schema selection (macro-averaged)",
            "columns": [
                ("table.precision", "Table P"), ("table.recall", "Table R"),
                ("table.f1", "Table F1"), ("column.precision", "Column P"),
                ("column.recall", "Column R"), ("column.f1", "Column F1"),
                ("mean_tokens", "#Tokens"), ("mean_llm_calls", "#LLM Calls"),
            ],
            "rows": schema_rows,
        })

    for stage, title in (
        ("candidate_generation", "Candidate generation"),
        ("query_revision", "Query revision"),
    ):
        stage_rows = []
        for name, doc in methods:
            outcome = doc.get(stage, {}).get("outcome")
            if not outcome:
                continue
            cells = {
                "correct_rate": outcome.get("correct_rate"),
                "incorrect_rate": outcome.get("incorrect_rate"),
                "error_rate": outcome.get("error_rate"),
            }
            efficiency = doc.get(stage, {}).get("efficiency", {})
            cells["mean_tokens"] = efficiency.get("mean_tokens")
            cells["mean_llm_calls"] = efficiency.get("mean_llm_calls")
            cost_doc = doc.get(stage, {}).get("cost") or {}
            cells["mean_cost"] = cost_doc.get("mean_cost")
            stage_rows.append((name, cells))
        if stage_rows:
            tables.append({
                "id": stage,
                "title": title,
                "columns": [
                    ("correct_rate", "CR"), ("incorrect_rate", "IR"),
                    ("error_rate", "ER"), ("mean_tokens", "#Tokens"),
                    ("mean_llm_calls", "#LLM Calls"), ("mean_cost", "Cost"),
                ],
                "rows": stage_rows,
            })

    passk_rows = []
    passk_columns: list[tuple[str, str]] = []
    for name, doc in methods:
        passk = doc.get("candidate_generation", {}).get("pass_at_k", {})
        if not passk:
            continue
        cells = {f"k{k}": passk[k].get("rate") for k in passk}
        for k in sorted(passk, key=int):
            if (f"k{k}", f"Pass@{k}") not in passk_columns:
                passk_columns.append((f"k{k}", f"Pass@{k}"))
        passk_rows.append((name, cells))
    if passk_rows:
        tables.append({
            "id": "pass_at_k",
            "title": "Pass@k (candidate generation)",
            "columns": passk_columns,
            "rows": passk_rows,
        })

    transition_rows = []
    for name, doc in methods:
        transitions = doc.get("query_revision", {}).get("transitions")
        if not transitions:
            continue
        transition_rows.append((name, {
            key: transitions.get(key) for key in ("ci", "i2c", "e2c", "c2i", "c2e")
        }))
    if transition_rows:
        tables.append({
            "id": "transitions",
            "title": "Query revision transitions",
            "columns": [
                ("ci", "CI"), ("i2c", "I2C"), ("e2c", "E2C"),
                ("c2i", "C2I"), ("c2e", "C2E"),
            ],
            "rows": transition_rows,
        })
    return tables


def compute_highlights(results: Mapping[str, Any]) -> dict[str, Any]:
    """Best/second-best per comparison column, with exact ties marked jointly."""
    highlights: dict[str, Any] = {}
    for table in _comparison_tables(results):
        table_marks: dict[str, Any] = {}
        for key, _ in table["columns"]:
            marks = _mark_best(table["rows"], key)
            if marks:
                table_marks[key] = {
                    "best": sorted(m for m, kind in marks.items() if kind == "best"),
                    "second": sorted(m for m, kind in marks.items() if kind == "second"),
                }
        if table_marks:
            highlights[table["id"]] = table_marks
    return highlights


def _render_markdown(results: Mapping[str, Any]) -> str:
    header = results.get("header", {})
    out = ["# Evaluation report", ""]
    out.append(f"- dataset: {header.get('dataset')}")
    if header.get("model"):
        out.append(f"- model: {header.get('model')}")
    out.append(f"- harness version: {header.get('harness_version')}")
    out.append(f"- timeout: {header.get('timeout_seconds')} s")
    out.append(f"- comparison mode: {header.get('comparison_mode')}")
    exclusions = header.get("excluded_questions", {})
    out.append(
        f"- gold-unexecutable exclusions: {exclusions.get('count', 0)} "
        f"{exclusions.get('question_ids', [])}"
    )
    out.append("")
    for table in _comparison_tables(results):
        out.append(_md_table(table["title"], table["columns"], table["rows"]))
    return "\n".join(out).rstrip() + "\n"


# ---------------------------------------------------------------------------
# Plot data

def _plotdata_files(results: Mapping[str, Any]) -> dict[str, Any]:
    header = dict(results.get("header", {}))
    files: dict[str, Any] = {}
    cross = results.get("cross_method", {})
    overlap = cross.get("incorrect_overlap")
    if overlap:
        files["plot_overlap_matrix.json"] = {"header": header, **overlap}
    solvability = cross.get("solvability")
    if solvability:
        files["plot_solvability_bins.json"] = {"header": header, "bins": solvability}
    rows = []
    for name, doc in _method_cells(results):
        for stage in ("candidate_generation", "query_revision"):
            strata = doc.get(stage, {}).get("by_difficulty", {})
            for stratum, outcome in sorted(strata.items()):
                for metric in ("correct_rate", "incorrect_rate", "error_rate"):
                    value = outcome.get(metric)
                    if value is not None:
                        rows.append({
                            "method": name, "stage": stage, "difficulty": stratum,
                            "metric": metric, "value": value["value"],
                            "exact": value["exact"],
                        })
    if rows:
        files["plot_difficulty_rates.json"] = {"header": header, "rows": rows}
    return files


# ---------------------------------------------------------------------------
# Emission

def emit(
    results: Mapping[str, Any],
    formats: Iterable[str],
    out_dir: str | Path,
) -> list[dict[str, str]]:
    """Write the requested formats; returns the manifest (paths + digests).

    The same results always produce byte-identical files; the manifest is
    written alongside as ``manifest.json``.
    """
    formats = list(formats)
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise ReportError(f"unknown report formats: {unknown}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {out}: {exc}") from exc

    artifacts: dict[str, str] = {}
    if "machine" in formats:
        highlights = compute_highlights(results)
        machine_doc = {**results, "highlights": highlights} if highlights else dict(results)
        artifacts["results.json"] = _dump_json(machine_doc)
    if "csv" in formats:
        artifacts["results.csv"] = _render_csv(results)
    if "markdown" in formats:
        artifacts["report.md"] = _render_markdown(results)
    if "plotdata" in formats:
        for name, doc in _plotdata_files(results).items():
            artifacts[name] = _dump_json(doc)

    manifest = []
    for name in sorted(artifacts):
        text = artifacts[name]
        target = out / name
        try:
            target.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ReportError(f"cannot write {target}: {exc}") from exc
        manifest.append({"path": name, "sha256": _digest(text)})
    (out / "manifest.json").write_text(_dump_json({"files": manifest}), encoding="utf-8")
    return manifest
