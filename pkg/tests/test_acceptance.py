"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings.
"""

from __future__ import annotations

import json
import random
import time
from fractions import Fraction
import pytest

from corpus import CORPUS_CATALOG, generate_corpus
from oracles import brute_pass_at_k, brute_prf, brute_rates, brute_transitions
from nl2sql_eval.analysis import (
    RECALL_FULL,
    RECALL_PARTIAL,
    RecallBands,
    incorrect_overlap,
    recall_conditioned_rates,
    solvability_histogram,
)
from nl2sql_eval.cli import main
from nl2sql_eval.cost import PricingModel, estimate_cost
from nl2sql_eval.executor import classify_error, execute_query, Failure, TimedOut
from nl2sql_eval.metrics import (
    CandidateMatrix,
    RevisionLedger,
    outcome_rates_from_labels,
    pass_at_k,
    revision_metrics,
    selection_scores,
)
from nl2sql_eval.model import Difficulty, ErrorCategory, OutcomeLabel, QuestionRecord, SchemaSet
from nl2sql_eval.pipeline import RunConfig, bench, file_checksum, postprocess, render
from nl2sql_eval.schema_extract import Catalog, extract_schema

F = Fraction

LABEL_POOL = [
    OutcomeLabel.correct(),
    OutcomeLabel.incorrect(),
    OutcomeLabel.error(ErrorCategory.NO_TABLE_OR_COLUMN),
    OutcomeLabel.error(ErrorCategory.NO_FUNCTION),
    OutcomeLabel.error(ErrorCategory.SYNTAX_ERROR),
    OutcomeLabel.error(ErrorCategory.TIMEOUT),
    OutcomeLabel.error(ErrorCategory.OTHER),
]


def _passed(number: int, name: str, elapsed: float) -> None:
    print(f"ACCEPTANCE {number} ({name}): PASS [{elapsed:.2f}s]")


def test_criterion_1_partition_identity():
    start = time.monotonic()
    rng = random.Random(1234)
    for _ in range(1000):
        labels = [rng.choice(LABEL_POOL) for _ in range(rng.randint(1, 40))]
        rates = outcome_rates_from_labels(labels)
        assert rates.correct_rate + rates.incorrect_rate + rates.error_rate == F(1)
        assert sum(rates.error_breakdown.values()) == rates.errors
        assert rates.correct + rates.incorrect + rates.errors == rates.total
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"partition property took {elapsed:.2f}s"
    _passed(1, "partition identity over 1000 random judgment sets", elapsed)


def test_criterion_2_gold_self_evaluation(mini_dataset_root, tmp_path, capsys):
    start = time.monotonic()
    manifest = mini_dataset_root / "manifest.json"
    questions = json.loads((mini_dataset_root / "questions.json").read_text())
    assert len(questions) >= 20
    db_files = sorted((mini_dataset_root / "databases").glob("*/*.sqlite"))
    assert len(db_files) == 2
    before = {p: file_checksum(p) for p in db_files}

    code = main([
        "selftest",
        "--dataset", str(manifest),
        "--runs", str(tmp_path),
        "--out", str(tmp_path / "out"),
        "--workers", "4",
    ])
    output = capsys.readouterr().out
    assert code == 0
    assert "CR = 100.00%" in output
    assert "ER = 0.00%" in output
    assert {p: file_checksum(p) for p in db_files} == before
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"selftest took {elapsed:.2f}s"
    with capsys.disabled():
        _passed(2, "gold self-evaluation: CR=100%, ER=0%, databases unchanged", elapsed)


def test_criterion_3_schema_extraction_oracle():
    start = time.monotonic()
    corpus = generate_corpus(200, seed=7)
    assert len(corpus) == 200
    for sql, truth in corpus:
        schema = extract_schema(sql, CORPUS_CATALOG)
        got = {table: set(cols) for table, cols in schema.entries.items()}
        assert got == truth, f"extraction mismatch for: {sql}"

    catalog = Catalog.build({
        "cards": ["id", "name", "type", "toughness", "watermark", "uuid"],
        "foreign_data": ["id", "uuid", "language", "name"],
    })
    example = extract_schema("SELECT COUNT(id) FROM cards WHERE toughness = 99", catalog)
    assert example.to_json() == {"cards": ["id", "toughness"]}
    join = extract_schema(
        "SELECT DISTINCT T1.name, T1.type FROM cards AS T1 "
        "INNER JOIN foreign_data AS T2 ON T2.uuid = T1.uuid "
        "WHERE T1.watermark = 'abzan'",
        catalog,
    )
    assert join.to_json() == {
        "cards": ["name", "type", "uuid", "watermark"],
        "foreign_data": ["uuid"],
    }
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"extraction oracle took {elapsed:.2f}s"
    _passed(3, "schema extraction matches generator truth on 200/200", elapsed)


def test_criterion_4_metric_oracle_equivalence():
    start = time.monotonic()
    rng = random.Random(99)
    element_pool = [f"t{i}" for i in range(8)]
    for _ in range(500):
        n_questions = rng.randint(1, 10)
        n_candidates = rng.randint(1, 5)

        gold = set(rng.sample(element_pool, rng.randint(1, 6)))
        selected = set(rng.sample(element_pool, rng.randint(0, 6)))
        score = selection_scores(
            SchemaSet.build({t: [] for t in selected}),
            SchemaSet.build({t: [] for t in gold}),
            "table",
        )
        p, r, f1 = brute_prf(gold, selected)
        assert (score.precision, score.recall, score.f1) == (p, r, f1)

        labels = [rng.choice(LABEL_POOL) for _ in range(n_questions)]
        rates = outcome_rates_from_labels(labels)
        cr, ir, er, breakdown = brute_rates(labels)
        assert (rates.correct_rate, rates.incorrect_rate, rates.error_rate) == (cr, ir, er)
        assert dict(rates.error_breakdown) == breakdown

        rows = [
            [rng.choice(LABEL_POOL) for _ in range(n_candidates)]
            for _ in range(n_questions)
        ]
        matrix = CandidateMatrix.build(list(enumerate(rows)))
        previous = F(0)
        for k in range(1, n_candidates + 2):
            ours = pass_at_k(matrix, k).rate
            assert ours == brute_pass_at_k(rows, k)
            assert ours >= previous  # monotone in k on every instance
            previous = ours

        pre = {i: rng.choice(LABEL_POOL) for i in range(n_questions)}
        post = {i: rng.choice(LABEL_POOL) for i in range(n_questions)}
        ours_rm = revision_metrics(RevisionLedger(pre=pre, post=post))
        oracle_rm = brute_transitions(pre, post)
        assert ours_rm.ci == oracle_rm["ci"]
        assert ours_rm.i2c == oracle_rm["i2c"]
        assert ours_rm.e2c == oracle_rm["e2c"]
        assert ours_rm.c2i == oracle_rm["c2i"]
        assert ours_rm.c2e == oracle_rm["c2e"]
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"metric oracle took {elapsed:.2f}s"
    _passed(4, "500 instances match brute-force recomputation exactly", elapsed)


def test_criterion_5_transition_conservation():
    start = time.monotonic()
    rng = random.Random(5150)
    for _ in range(400):
        n = rng.randint(1, 30)
        pre = {i: rng.choice(LABEL_POOL) for i in range(n)}
        post = {i: rng.choice(LABEL_POOL) for i in range(n)}
        ledger = RevisionLedger(pre=pre, post=post)
        rm = revision_metrics(ledger)

        c_pre, i_pre, e_pre = len(ledger.c_pre), len(ledger.i_pre), len(ledger.e_pre)
        c2i = rm.c2i if rm.c2i is not None else F(0)
        c2e = rm.c2e if rm.c2e is not None else F(0)
        i2c = rm.i2c if rm.i2c is not None else F(0)
        e2c = rm.e2c if rm.e2c is not None else F(0)
        rebuilt = (c_pre - c2i * c_pre - c2e * c_pre) + i2c * i_pre + e2c * e_pre
        assert rebuilt == len(ledger.c_post)
        assert F(rebuilt, n) == ledger.cr_post

        if ledger.cr_pre == 0:
            assert rm.ci is None  # not-applicable, never 0
        else:
            assert rm.ci == (ledger.cr_post - ledger.cr_pre) / ledger.cr_pre
        if i_pre == 0:
            assert rm.i2c is None
        if e_pre == 0:
            assert rm.e2c is None
        if c_pre == 0:
            assert rm.c2i is None and rm.c2e is None
    elapsed = time.monotonic() - start
    _passed(5, "transition conservation and CI definition hold", elapsed)


def test_criterion_6_mock_loop_closure(mock_workspace, tmp_path):
    start = time.monotonic()
    config = RunConfig(
        dataset_manifest=mock_workspace["manifest"],
        runs_dir=mock_workspace["runs"],
        out_dir=tmp_path / "out",
        timeout=0.25,
        workers=4,
    )
    postprocess(config)
    results = bench(config)

    def assert_subset(expected, actual, path):
        if isinstance(expected, dict):
            assert isinstance(actual, dict), f"{path}: not an object"
            for key, value in expected.items():
                assert key in actual, f"{path}.{key}: missing"
                assert_subset(value, actual[key], f"{path}.{key}")
        else:
            assert expected == actual, f"{path}: {expected!r} != {actual!r}"

    profiles = mock_workspace["profiles"]
    assert len(profiles) >= 10
    for profile in profiles:
        expected = json.loads(
            (mock_workspace["expected"] / f"{profile.name}.expected.json").read_text()
        )
        assert_subset(
            expected["methods"][profile.name],
            results["methods"][profile.name],
            profile.name,
        )
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"mock loop took {elapsed:.2f}s"
    _passed(6, f"{len(profiles)}-profile mock loop closes with exact equality", elapsed)


def test_criterion_7_error_classifier_coverage(cards_db):
    start = time.monotonic()
    cases = [
        ("SELECT * FROM missing_table_7", ErrorCategory.NO_TABLE_OR_COLUMN),
        ("SELECT definitely_not_a_function(1)", ErrorCategory.NO_FUNCTION),
        ("SELEC name FORM cards", ErrorCategory.SYNTAX_ERROR),
        (
            "WITH RECURSIVE spin(n) AS (SELECT 1 UNION ALL SELECT n + 1 FROM spin) "
            "SELECT COUNT(*) FROM spin",
            ErrorCategory.TIMEOUT,
        ),
        ("SELECT 1; SELECT 2", ErrorCategory.OTHER),
    ]
    timeout = 1.0
    for sql, expected_category in cases:
        t0 = time.monotonic()
        result = execute_query(cards_db, sql, timeout)
        t1 = time.monotonic()
        assert isinstance(result, (Failure, TimedOut)), sql
        assert classify_error(result) is expected_category, sql
        if expected_category is ErrorCategory.TIMEOUT:
            assert t1 - t0 < timeout + 1.0, "timeout case must finish within limit + 1s"
    elapsed = time.monotonic() - start
    _passed(7, "five crafted failures map to all five categories", elapsed)


def test_criterion_8_cost_closed_form():
    start = time.monotonic()
    pricing = PricingModel(
        name="x",
        price_prompt_cache_hit=F(1, 10000),
        price_prompt_cache_miss=F(2, 10000),
        price_completion=F(4, 10000),
        cache_hit_fraction=F(1, 2),
    )
    assert estimate_cost(1000, 200, pricing) == F(23, 100)

    rng = random.Random(88)
    base = estimate_cost(1000, 200, pricing)
    for _ in range(50):
        scale = rng.randint(1, 10**4)
        assert estimate_cost(1000 * scale, 200 * scale, pricing) == base * scale
        p, c = rng.randint(0, 10**5), rng.randint(0, 10**5)
        assert (
            estimate_cost(p, c, pricing)
            == estimate_cost(p, 0, pricing) + estimate_cost(0, c, pricing)
        )
    elapsed = time.monotonic() - start
    _passed(8, "cost closed form = 0.23 exactly; linearity holds", elapsed)


def test_criterion_9_analysis_correctness():
    start = time.monotonic()
    sets = {"A": {1, 2, 3}, "B": {2, 3, 4}}
    jaccard = incorrect_overlap(sets, kind="jaccard")
    overlap = incorrect_overlap(sets, kind="overlap")
    a, b = jaccard.methods.index("A"), jaccard.methods.index("B")
    assert jaccard.coefficients[a][b] == F(1, 2)
    assert overlap.coefficients[a][b] == F(2, 3)

    rng = random.Random(777)
    for _ in range(50):
        n_methods = rng.randint(1, 5)
        questions = [
            QuestionRecord(
                question_id=i, db_id="d", question=f"q{i}?", gold_sql="SELECT 1",
                difficulty=rng.choice(list(Difficulty)),
            )
            for i in range(rng.randint(1, 25))
        ]
        methods = {
            f"m{j}": {q.question_id for q in questions if rng.random() < 0.4}
            for j in range(n_methods)
        }
        histogram = solvability_histogram(methods, questions)
        assert sum(sum(bins.values()) for bins in histogram.values()) == len(questions)
        for bins in histogram.values():
            assert set(bins) == set(range(n_methods + 1))

    bands = RecallBands(
        bands={1: RECALL_FULL, 2: RECALL_FULL, 3: RECALL_PARTIAL, 4: RECALL_PARTIAL},
        skipped=0,
    )
    cg = {
        1: OutcomeLabel.correct(), 2: OutcomeLabel.incorrect(),
        3: OutcomeLabel.incorrect(), 4: OutcomeLabel.incorrect(),
    }
    qr = {
        1: OutcomeLabel.correct(), 2: OutcomeLabel.correct(),
        3: OutcomeLabel.incorrect(), 4: OutcomeLabel.correct(),
    }
    conditioned = recall_conditioned_rates(bands, cg, qr)
    assert conditioned[RECALL_FULL]["candidate_generation"] == F(1, 2)
    assert conditioned[RECALL_FULL]["query_revision"] == F(1)
    assert conditioned[RECALL_PARTIAL]["candidate_generation"] == F(0)
    assert conditioned[RECALL_PARTIAL]["query_revision"] == F(1, 2)
    elapsed = time.monotonic() - start
    _passed(9, "overlap, solvability partition, recall conditioning", elapsed)


def test_criterion_10_pipeline_determinism(mock_workspace, tmp_path):
    start = time.monotonic()
    outputs = []
    for label, workers in (("one", 1), ("four", 4)):
        config = RunConfig(
            dataset_manifest=mock_workspace["manifest"],
            runs_dir=mock_workspace["runs"],
            out_dir=tmp_path / label,
            timeout=0.25,
            workers=workers,
        )
        postprocess(config)
        bench(config)
        render(config)
        outputs.append(config.out_dir)

    first, second = outputs
    compared = 0
    for path in sorted(first.rglob("*")):
        if not path.is_file() or path.name == "timings.json":
            continue
        twin = second / path.relative_to(first)
        assert twin.is_file(), f"missing twin for {path}"
        assert path.read_bytes() == twin.read_bytes(), f"bytes differ: {path.name}"
        compared += 1
    assert compared > 20
    elapsed = time.monotonic() - start
    _passed(10, f"two runs byte-identical across {compared} files (workers 1 vs 4)", elapsed)
