"""Corpus shape, manifest invariants, runnability, and confinement."""
from __future__ import annotations

import json
import time
from pathlib import Path

from fixture_corpus.generate import build_catalog, generate_corpus
from fixture_corpus.specs import AUTH_TO_VERDICT, CAPABILITIES, REGISTRATION_PATTERNS

from conftest import WireClient, launch_command, python_compiles


def test_catalog_shape():
    catalog = build_catalog()
    registration = [s for s in catalog if s.fixture_id.startswith("registration/")]
    classification = [s for s in catalog if s.fixture_id.startswith("classification/")]
    realworld = [s for s in catalog if s.fixture_id.startswith("realworld/")]
    assert len(registration) == len(REGISTRATION_PATTERNS) == 7
    assert len(classification) == 16
    assert len(realworld) == 2
    assert {s.registration_pattern for s in registration} == set(REGISTRATION_PATTERNS)
    combos = {(s.auth_pattern, s.capability) for s in classification}
    assert len(combos) == 16
    assert {c for _, c in combos} == set(CAPABILITIES)


def test_expected_verdicts_follow_auth_pattern():
    for spec in build_catalog():
        if spec.fixture_id.startswith("classification/"):
            assert spec.expected_verdict == AUTH_TO_VERDICT[spec.auth_pattern], spec.fixture_id
        if spec.fixture_id.startswith("registration/"):
            assert spec.expected_verdict == "NoSensitiveOps"


def test_generated_tree_matches_manifest(corpus_root, manifest):
    assert len(manifest) == 25
    for entry in manifest:
        fixture_dir = corpus_root / entry["path"]
        assert fixture_dir.is_dir(), entry["fixture_id"]
        if entry["runnable"]:
            assert (fixture_dir / entry["launch"]).is_file()
            descriptor = json.loads((fixture_dir / entry["launch"]).read_text())
            assert descriptor["transport"] == "stdio"


def test_every_python_file_compiles(corpus_root, manifest):
    for entry in manifest:
        for source in (corpus_root / entry["path"]).glob("*.py"):
            assert python_compiles(source), source


def test_generation_is_deterministic(tmp_path):
    first = tmp_path / "one"
    second = tmp_path / "two"
    generate_corpus(first)
    generate_corpus(second)
    first_files = sorted(p.relative_to(first).as_posix() for p in first.rglob("*") if p.is_file())
    second_files = sorted(p.relative_to(second).as_posix() for p in second.rglob("*") if p.is_file())
    assert first_files == second_files
    for rel in first_files:
        assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel


def test_runnable_fixtures_handshake_within_five_seconds(corpus_root, manifest):
    for entry in manifest:
        if not entry["runnable"]:
            continue
        command, cwd = launch_command(corpus_root, entry)
        client = WireClient(command, cwd)
        try:
            started = time.monotonic()
            init = client.request("initialize", {"protocolVersion": "2024-11-05", "capabilities": {}})
            tools = client.request("tools/list", {})
            elapsed = time.monotonic() - started
            assert elapsed < 5.0, (entry["fixture_id"], elapsed)
            assert init["result"]["protocolVersion"]
            names = [t["name"] for t in tools["result"]["tools"]]
            assert entry["expected_tool"] in names, entry["fixture_id"]
        finally:
            client.close()


def test_side_effects_confined_to_fixture_directory(corpus_root, manifest, tmp_path):
    entry = next(e for e in manifest if e["fixture_id"] == "classification/cachedstartup_data")
    fixture_dir = corpus_root / entry["path"]
    outside_before = {p for p in Path.cwd().iterdir()}
    command, cwd = launch_command(corpus_root, entry)
    client = WireClient(command, cwd)
    try:
        client.request("initialize", {"protocolVersion": "2024-11-05", "capabilities": {}})
        response = client.request(
            "tools/call",
            {"name": entry["expected_tool"], "arguments": {"name": "probe", "entry": "hello"}},
        )
        assert "result" in response and not response["result"].get("isError")
    finally:
        client.close()
    written = fixture_dir / "scratch" / "probe.log"
    assert written.is_file()
    assert {p for p in Path.cwd().iterdir()} == outside_before


def test_corpus_manifest_consumable_by_analyzer_cli(corpus_root):
    from conftest import run_cli

    proc = run_cli("corpus", str(corpus_root / "corpus_manifest.json"), "--jobs", "2")
    assert proc.returncode == 1  # vulnerable fixtures present by design
    summary = json.loads(proc.stdout)
    assert summary["totals"]["projects"] == 25
    # 12 vulnerable classification rows (AuthNone/AuthCache/AuthRuntime x 4) plus the git fragment
    assert summary["totals"]["vulnerable_projects"] == 13
