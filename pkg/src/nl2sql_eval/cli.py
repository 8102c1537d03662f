"""Command-line entry point.

Subcommands mirror the pipeline stages: validate, postprocess, bench,
report, selftest, and mock. Configuration comes from an optional JSON file
with flag overrides. Exit codes: 0 success, 1 usage error, 2 validation
failure, 3 execution-environment failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .cost import PricingError
from .executor import DatabaseOpenError
from .ingest import IngestError
from .mockgen import ProfileError, default_profiles, generate
from .model import ValidationError
from .pipeline import (
    ConfigError,
    RunConfig,
    bench,
    load_config,
    postprocess,
    render,
    selftest,
    validate_runs,
)
from .report import FORMATS, ReportError, render_fraction

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_ENVIRONMENT = 3


class _UsageError(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="nl2sql-eval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--dataset", type=Path, help="dataset manifest path")
        p.add_argument("--runs", type=Path, help="directory of run files, one per method")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--timeout", type=float, help="per-statement timeout in seconds")
        p.add_argument("--workers", type=int, help="executor worker count")
        p.add_argument("--k", type=str, help="comma-separated Pass@k list, e.g. 1,5,10,15,20")
        p.add_argument("--pricing", type=Path, help="pricing file for cost estimation")
        p.add_argument("--model", type=str, help="pricing model name / report label")
        p.add_argument("--comparison", choices=["set", "multiset"], help="result comparison mode")
        p.add_argument("--overlap", choices=["jaccard", "overlap"], help="overlap coefficient")
        p.add_argument("--seed", type=int, help="seed for mock generation")

    for name, help_text in (
        ("validate", "parse and align every run file"),
        ("postprocess", "judge SQL and score schemas (touches databases)"),
        ("bench", "compute metrics from judgment logs and run records"),
        ("report", "render bench results as csv/markdown/plot data"),
        ("selftest", "judge gold SQL against itself end to end"),
        ("mock", "generate synthetic run files with known metrics"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        if name == "report":
            p.add_argument(
                "--formats", type=str, default="csv,markdown,plotdata",
                help=f"comma-separated subset of {','.join(FORMATS)}",
            )
        if name == "mock":
            p.add_argument("--profile", type=str, help="generate a single named profile")
            p.add_argument("--list-profiles", action="store_true", help="list profile names")
    return parser


_FLAG_NAMES = {"dataset_manifest": "--dataset", "runs_dir": "--runs", "out_dir": "--out"}


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "timeout": args.timeout,
        "workers": args.workers,
        "comparison": args.comparison,
        "overlap_kind": args.overlap,
        "pricing_path": args.pricing,
        "pricing_model": args.model,
        "seed": args.seed,
    }
    if args.k:
        overrides["k_list"] = tuple(int(part) for part in str(args.k).split(","))
    if args.dataset:
        overrides["dataset_manifest"] = args.dataset
    if args.runs:
        overrides["runs_dir"] = args.runs
    if args.out:
        overrides["out_dir"] = args.out

    if args.config:
        return load_config(args.config, **overrides)
    # selftest reads only the dataset; everything else needs all three paths
    required = ("dataset_manifest",) if args.command == "selftest" else (
        "dataset_manifest", "runs_dir", "out_dir",
    )
    missing = [_FLAG_NAMES[name] for name in required if overrides.get(name) is None]
    if missing:
        raise ConfigError(
            f"without --config, these flags are required: {', '.join(missing)}"
        )
    for name in ("runs_dir", "out_dir"):
        overrides.setdefault(name, Path("."))
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return RunConfig(**overrides)


def _pct(text: str | None) -> str:
    if text is None:
        return "n/a"
    return render_fraction(Fraction(text), "percent")


def _cmd_validate(config: RunConfig) -> int:
    report = validate_runs(config)
    warnings = 0
    for method, info in sorted(report["methods"].items()):
        warnings += info["unmatched"]
        print(
            f"{method}: {info['records']} records, {info['attached']} attached, "
            f"{info['unmatched']} unmatched"
        )
        for detail in info["unmatched_details"]:
            print(f"  warning: record {detail['record_index']}: {detail['reason']}")
    print(f"validate: OK ({warnings} warnings)")
    return EXIT_OK


def _cmd_postprocess(config: RunConfig) -> int:
    summary = postprocess(config)
    for method, info in sorted(summary.items()):
        print(
            f"{method}: {info['judgments']} judgments, "
            f"{info['exclusions']} gold-unexecutable exclusions, "
            f"{info['unmatched']} unmatched records"
        )
    print(f"postprocess: wrote logs under {config.out_dir / 'postprocess'}")
    return EXIT_OK


def _cmd_bench(config: RunConfig) -> int:
    results = bench(config)
    header = results["header"]
    if header.get("pricing_warning"):
        print(f"warning: costs omitted: {header['pricing_warning']}")
    excluded = header["excluded_questions"]["count"]
    print(
        f"bench: {len(results['methods'])} methods, "
        f"{excluded} excluded questions; results at "
        f"{config.out_dir / 'bench' / 'results.json'}"
    )
    return EXIT_OK


def _cmd_report(config: RunConfig, formats: str) -> int:
    wanted = [part.strip() for part in formats.split(",") if part.strip()]
    manifest = render(config, wanted)
    for entry in manifest:
        print(f"wrote {entry['path']} sha256={entry['sha256'][:12]}")
    return EXIT_OK


def _cmd_selftest(config: RunConfig) -> int:
    result = selftest(config)
    print(
        f"selftest[{result['dataset']}]: {result['judged']}/{result['questions']} judged, "
        f"CR = {_pct(result['correct_rate'])}, ER = {_pct(result['error_rate'])}"
    )
    for exclusion in result["excluded"]:
        print(
            f"  audit: question {exclusion['question_id']} excluded "
            f"({exclusion['reason']}): {exclusion['detail']}"
        )
    print(f"  databases unchanged: {result['databases_unchanged']}")
    if not result["ok"]:
        if result["not_correct_question_ids"]:
            print(
                "selftest: FAIL: gold not judged Correct for questions "
                f"{result['not_correct_question_ids']}"
            )
        if not result["databases_unchanged"]:
            print("selftest: FAIL: database files were modified")
        return EXIT_VALIDATION
    print("selftest: PASS")
    return EXIT_OK


def _cmd_mock(config: RunConfig, profile_name: str | None, list_profiles: bool) -> int:
    profiles = default_profiles(base_seed=config.seed or 11)
    if list_profiles:
        for profile in profiles:
            print(profile.name)
        return EXIT_OK
    if profile_name:
        matching = [p for p in profiles if p.name == profile_name]
        if not matching:
            raise ConfigError(
                f"unknown profile {profile_name!r}; use --list-profiles to see choices"
            )
        profiles = matching
    expected_dir = config.out_dir / "expected"
    for profile in profiles:
        run_path, expected_path = generate(
            profile,
            config.dataset_manifest,
            config.runs_dir,
            expected_dir,
            k_list=config.k_list,
            certify_timeout=min(config.timeout, 0.25),
        )
        print(f"mock[{profile.name}]: wrote {run_path} and {expected_path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _config_from_args(args)
        if args.command == "validate":
            return _cmd_validate(config)
        if args.command == "postprocess":
            return _cmd_postprocess(config)
        if args.command == "bench":
            return _cmd_bench(config)
        if args.command == "report":
            return _cmd_report(config, args.formats)
        if args.command == "selftest":
            return _cmd_selftest(config)
        if args.command == "mock":
            return _cmd_mock(config, args.profile, args.list_profiles)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, ValidationError, ProfileError, PricingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DatabaseOpenError, ReportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT


if __name__ == "__main__":
    sys.exit(main())
