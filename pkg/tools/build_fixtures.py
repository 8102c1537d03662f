#!/usr/bin/env python3
"""Regenerate the bundled mini dataset under fixtures/mini."""

from pathlib import Path

from nl2sql_eval import minidataset

if __name__ == "__main__":
    root = Path(__file__).resolve().parent.parent / "fixtures" / "mini"
    manifest = minidataset.materialize(root)
    print(f"wrote {manifest}")
