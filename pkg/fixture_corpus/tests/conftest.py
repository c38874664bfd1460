"""Session-scoped corpus generation plus a minimal wire client."""
from __future__ import annotations

import json
import subprocess
import sys
import time
from pathlib import Path

import pytest

from fixture_corpus.generate import generate_corpus


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("corpus")
    generate_corpus(root)
    return root


@pytest.fixture(scope="session")
def manifest(corpus_root) -> list[dict]:
    return json.loads((corpus_root / "manifest.json").read_text(encoding="utf-8"))


class WireClient:
    """Newline-delimited JSON-RPC over a spawned stdio server."""

    def __init__(self, command: list[str], cwd: Path):
        self.process = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            cwd=cwd,
        )
        self._next_id = 1

    def request(self, method: str, params: dict, timeout: float = 5.0) -> dict:
        msg_id = self._next_id
        self._next_id += 1
        line = json.dumps({"jsonrpc": "2.0", "id": msg_id, "method": method, "params": params})
        self.process.stdin.write((line + "\n").encode("utf-8"))
        self.process.stdin.flush()
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            raw = self.process.stdout.readline()
            if not raw:
                raise RuntimeError("server closed stdout")
            try:
                message = json.loads(raw.decode("utf-8"))
            except json.JSONDecodeError:
                continue
            if message.get("id") == msg_id:
                return message
        raise TimeoutError(method)

    def close(self) -> None:
        if self.process.poll() is None:
            self.process.terminate()
            try:
                self.process.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.process.kill()


def launch_command(corpus_root: Path, entry: dict) -> tuple[list[str], Path]:
    fixture_dir = corpus_root / entry["path"]
    descriptor = json.loads((fixture_dir / entry["launch"]).read_text(encoding="utf-8"))
    return descriptor["command"], fixture_dir


def run_cli(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(["mcpauthscan", *args], capture_output=True, text=True)


def python_compiles(path: Path) -> bool:
    return (
        subprocess.run([sys.executable, "-m", "py_compile", str(path)], capture_output=True).returncode == 0
    )
