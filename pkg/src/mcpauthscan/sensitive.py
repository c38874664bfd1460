"""Sensitive-operation identification along tool execution paths.

Call sites in every function reachable from a tool handler are matched
against an external, versioned API table (pattern -> resource category /
subcategory). A match may sit directly in the handler or be reached
transitively; the call chain back to the handler is recorded either way.
"""
from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass
from enum import Enum
from fnmatch import fnmatchcase
from importlib import resources
from pathlib import Path
from typing import Optional

from .callgraph import CallGraph
from .deptree import ToolContext, call_input_dependent
from .model import ProgramModel, SourceLocation


class ResourceCategory(str, Enum):
    SYSTEM_EXECUTION = "SystemExecution"
    PERSISTENT_DATA = "PersistentData"
    NETWORK_COMMUNICATION = "NetworkCommunication"
    PHYSICAL_INTERFACE = "PhysicalInterface"


@dataclass(frozen=True)
class ApiRule:
    pattern: str
    category: ResourceCategory
    subcategory: str


@dataclass
class ApiTable:
    rules: list[ApiRule]
    digest: str

    def match(self, candidates: list[str]) -> Optional[ApiRule]:
        """Most specific (longest-pattern) rule matching any candidate form."""
        best: Optional[ApiRule] = None
        for rule in self.rules:
            for candidate in candidates:
                if _pattern_matches(rule.pattern, candidate):
                    if best is None or len(rule.pattern) > len(best.pattern):
                        best = rule
                    break
        return best


def _pattern_matches(pattern: str, candidate: str) -> bool:
    if "." not in pattern and "*" not in pattern:
        return candidate == pattern
    return fnmatchcase(candidate, pattern)


def default_api_table_path() -> Path:
    return Path(str(resources.files("mcpauthscan").joinpath("data/sensitive_apis.tsv")))


def load_api_table(path: Optional[str] = None) -> ApiTable:
    table_path = Path(path) if path else default_api_table_path()
    raw = table_path.read_bytes()
    rules = []
    for line in raw.decode("utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"malformed sensitive-API row: {line!r}")
        pattern, category, subcategory = parts
        rules.append(ApiRule(pattern=pattern, category=ResourceCategory(category), subcategory=subcategory))
    return ApiTable(rules=rules, digest=hashlib.sha256(raw).hexdigest())


@dataclass
class SensitiveOperation:
    category: ResourceCategory
    subcategory: str
    matched_api: str
    location: SourceLocation
    via_path: list[str]
    input_dependent: bool

    def to_dict(self) -> dict:
        return {
            "category": self.category.value,
            "subcategory": self.subcategory,
            "matched_api": self.matched_api,
            "file": self.location.file,
            "line": self.location.line,
            "via_path": list(self.via_path),
            "input_dependent": self.input_dependent,
        }


def identify_sensitive_operations(
    context: ToolContext,
    graph: CallGraph,
    model: ProgramModel,
    table: Optional[ApiTable] = None,
) -> list[SensitiveOperation]:
    """All table-matching calls in the tool's related functions."""
    if table is None:
        table = load_api_table()
    handler = getattr(context.tool, "handler", None)
    operations = []
    for fn_name in sorted(context.related_functions):
        for site in model.call_sites_in(fn_name):
            written = site.callee_expression
            canonical = model.canonical_callee(site.location.file, written)
            rule = table.match([written, canonical])
            if rule is None:
                continue
            via = _shortest_path(handler, fn_name, context.call_edges) or [fn_name]
            operations.append(
                SensitiveOperation(
                    category=rule.category,
                    subcategory=rule.subcategory,
                    matched_api=written,
                    location=site.location,
                    via_path=via,
                    input_dependent=call_input_dependent(site, model, context),
                )
            )
    operations.sort(key=lambda op: (op.location.file, op.location.line, op.location.column))
    return operations


def _shortest_path(start: Optional[str], goal: str, edges: dict[str, set[str]]) -> Optional[list[str]]:
    if start is None:
        return None
    if start == goal:
        return [start]
    parents: dict[str, str] = {}
    queue = deque([start])
    seen = {start}
    while queue:
        node = queue.popleft()
        for succ in sorted(edges.get(node, ())):
            if succ in seen:
                continue
            parents[succ] = node
            if succ == goal:
                path = [goal]
                while path[-1] != start:
                    path.append(parents[path[-1]])
                return list(reversed(path))
            seen.add(succ)
            queue.append(succ)
    return None
