"""Shared fixtures and pipeline helpers for the test suite."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import pytest

from mcpauthscan.authz import Classification, classify_tool, detect_auth_checks
from mcpauthscan.callgraph import CallGraph, build_call_graph
from mcpauthscan.deptree import ContextMap, ToolContext, construct_context_map
from mcpauthscan.frontend import parse_source
from mcpauthscan.model import ProgramModel
from mcpauthscan.sensitive import ApiTable, SensitiveOperation, identify_sensitive_operations, load_api_table
from mcpauthscan.toolentries import ToolEntry, extract_tool_entries

FIXTURES = Path(__file__).parent / "fixtures"
FIRST_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\S")


@dataclass
class PipelineResult:
    model: ProgramModel
    graph: CallGraph
    tools: list[ToolEntry]
    context_map: ContextMap
    checks_by_tool: dict[str, list]
    ops_by_tool: dict[str, list[SensitiveOperation]]
    classifications: dict[str, Classification]

    def single_context(self) -> ToolContext:
        assert len(self.tools) == 1, [t.tool_name for t in self.tools]
        return self.context_map.for_tool(self.tools[0])

    def single_verdict(self) -> str:
        assert len(self.classifications) == 1
        return next(iter(self.classifications.values())).verdict.value


@pytest.fixture(scope="session")
def api_table() -> ApiTable:
    return load_api_table()


def run_pipeline(project: Path, table: ApiTable | None = None) -> PipelineResult:
    table = table or load_api_table()
    model = parse_source(project)
    graph = build_call_graph(model)
    tools = extract_tool_entries(model)
    context_map = construct_context_map(model, tools, graph)
    checks_by_tool: dict[str, list] = {}
    ops_by_tool: dict[str, list[SensitiveOperation]] = {}
    classifications: dict[str, Classification] = {}
    for tool in tools:
        ctx = context_map.for_tool(tool)
        checks = detect_auth_checks(ctx, model)
        ops = identify_sensitive_operations(ctx, graph, model, table)
        checks_by_tool[tool.tool_name] = checks
        ops_by_tool[tool.tool_name] = ops
        classifications[tool.tool_name] = classify_tool(tool, ctx, checks, ops)
    return PipelineResult(model, graph, tools, context_map, checks_by_tool, ops_by_tool, classifications)


def first_token(text: str) -> str:
    match = FIRST_TOKEN.search(text)
    return match.group(0) if match else ""


def slice_at(root: Path, file: str, line: int, column: int) -> str:
    lines = (root / file).read_text(encoding="utf-8").splitlines()
    return lines[line - 1][column:]


def write_project(tmp_path: Path, files: dict[str, str]) -> Path:
    root = tmp_path / "proj"
    root.mkdir(exist_ok=True)
    for rel, content in files.items():
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")
    return root
