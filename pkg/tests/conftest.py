from __future__ import annotations

from pathlib import Path

import pytest

from nl2sql_eval import minidataset

REPO_ROOT = Path(__file__).resolve().parent.parent
BUNDLED_MINI = REPO_ROOT / "fixtures" / "mini"


@pytest.fixture(scope="session")
def mini_dataset_root(tmp_path_factory) -> Path:
    """The bundled mini dataset (materialized to a temp dir if not built)."""
    if (BUNDLED_MINI / "manifest.json").is_file():
        return BUNDLED_MINI
    root = tmp_path_factory.mktemp("mini")
    minidataset.materialize(root)
    return root


@pytest.fixture(scope="session")
def mini_manifest(mini_dataset_root: Path) -> Path:
    return mini_dataset_root / "manifest.json"


@pytest.fixture(scope="session")
def cards_db(mini_dataset_root: Path) -> Path:
    return mini_dataset_root / "databases" / "trading_cards" / "trading_cards.sqlite"


@pytest.fixture(scope="session")
def mock_workspace(tmp_path_factory, mini_manifest: Path):
    """All default mock profiles generated once per session."""
    from nl2sql_eval.mockgen import default_profiles, generate

    base = tmp_path_factory.mktemp("mockspace")
    runs = base / "runs"
    expected = base / "expected"
    profiles = default_profiles()
    for profile in profiles:
        generate(profile, mini_manifest, runs, expected, certify_timeout=0.25)
    return {
        "base": base,
        "runs": runs,
        "expected": expected,
        "profiles": profiles,
        "manifest": mini_manifest,
    }
