"""Corpus generation: write fixture projects, launch descriptors, and manifests."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .sources import classification_fixture, realworld_fixtures, registration_fixture
from .specs import AUTH_PATTERNS, CAPABILITIES, REGISTRATION_PATTERNS, FixtureSpec


def build_catalog() -> list[FixtureSpec]:
    catalog = [registration_fixture(pattern) for pattern in REGISTRATION_PATTERNS]
    for auth in AUTH_PATTERNS:
        for capability in CAPABILITIES:
            catalog.append(classification_fixture(auth, capability))
    catalog.extend(realworld_fixtures())
    return catalog


def generate_corpus(output_dir: str | Path) -> Path:
    """Write every fixture plus manifest.json and corpus_manifest.json.

    Returns the manifest path. Raises only on I/O failures.
    """
    root = Path(output_dir)
    root.mkdir(parents=True, exist_ok=True)
    catalog = build_catalog()
    for spec in catalog:
        fixture_dir = root / spec.fixture_id
        fixture_dir.mkdir(parents=True, exist_ok=True)
        for rel, content in sorted(spec.files.items()):
            (fixture_dir / rel).write_text(content, encoding="utf-8")

    manifest_path = root / "manifest.json"
    manifest_path.write_text(
        json.dumps([spec.to_manifest_entry() for spec in catalog], indent=2) + "\n",
        encoding="utf-8",
    )

    # analysis manifest in the analyzer CLI's corpus format
    corpus_entries = []
    for index, spec in enumerate(catalog):
        corpus_entries.append(
            {
                "project_id": spec.fixture_id.replace("/", "-"),
                "path": spec.fixture_id,
                "category": spec.capability or "Other",
                "stars": (index * 37) % 1200,
                "author": spec.auth_pattern or "registration",
            }
        )
    (root / "corpus_manifest.json").write_text(
        json.dumps(corpus_entries, indent=2) + "\n", encoding="utf-8"
    )
    return manifest_path


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mcp-fixture-corpus")
    parser.add_argument("output_dir", help="directory to populate with fixture projects")
    args = parser.parse_args(argv)
    manifest = generate_corpus(args.output_dir)
    catalog = build_catalog()
    runnable = sum(1 for spec in catalog if spec.runnable)
    print(f"wrote {len(catalog)} fixtures ({runnable} runnable) -> {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
