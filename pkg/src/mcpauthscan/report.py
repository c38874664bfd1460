"""Pipeline orchestration, report structures, and corpus aggregation.

analyze_project runs parse -> call graph -> tool entries -> contexts ->
sensitive ops -> classification, optionally followed by selective dynamic
validation, and produces a self-contained, deterministic report.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .authz import (
    AuthCheck,
    Classification,
    Verdict,
    classify_tool,
    default_lexicon_path,
    detect_auth_checks,
    load_identity_lexicon,
)
from .callgraph import build_call_graph
from .deptree import construct_context_map
from .dynamic import (
    DEFAULT_HANDSHAKE_TIMEOUT,
    DEFAULT_PROBE_TIMEOUT,
    DEFAULT_SERVER_BUDGET,
    EnforcementVerdict,
    ServerValidation,
    validate_server,
)
from .errors import (
    HandshakeTimeout,
    ProbeSafetyError,
    ProtocolMismatch,
    SpawnFailure,
    TransportFailure,
)
from .frontend import parse_source
from .model import Diagnostic
from .sensitive import SensitiveOperation, default_api_table_path, identify_sensitive_operations, load_api_table
from .toolentries import ToolEntry, extract_tool_entries_with_diagnostics

SCHEMA_VERSION = 1
VULNERABLE_VERDICTS = {Verdict.AUTH_NONE, Verdict.AUTH_CACHE, Verdict.AUTH_RUNTIME}
STAR_BUCKETS = ("0-50", "50-100", "100-500", "500-1000", ">1000")
VERDICT_ORDER = ("Secure", "AuthNone", "AuthCache", "AuthRuntime", "NoSensitiveOps")


@dataclass
class AnalysisOptions:
    dynamic: bool = False
    descriptor_path: Optional[str] = None
    api_table_path: Optional[str] = None
    lexicon_path: Optional[str] = None
    deterministic: bool = False
    allow_endpoints: tuple[str, ...] = ()
    probe_timeout: float = DEFAULT_PROBE_TIMEOUT
    handshake_timeout: float = DEFAULT_HANDSHAKE_TIMEOUT
    budget: float = DEFAULT_SERVER_BUDGET


@dataclass
class ToolReport:
    tool: ToolEntry
    classification: Classification
    sensitive_operations: list[SensitiveOperation]
    auth_checks: list[AuthCheck]
    enforcement: Optional[EnforcementVerdict] = None
    outcomes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tool": self.tool.to_dict(),
            "classification": self.classification.to_dict(),
            "sensitive_operations": [op.to_dict() for op in self.sensitive_operations],
            "auth_checks": [c.to_dict() for c in self.auth_checks],
            "enforcement": self.enforcement.value if self.enforcement else None,
            "probe_outcomes": [o.to_dict() for o in self.outcomes],
        }


@dataclass
class ProjectReport:
    project_id: str
    root: str
    tool_reports: list[ToolReport]
    diagnostics: list[Diagnostic]
    analysis_duration_ms: int
    versions: dict[str, str]

    def has_vulnerable(self) -> bool:
        return any(r.classification.verdict in VULNERABLE_VERDICTS for r in self.tool_reports)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "project_id": self.project_id,
            "root": self.root,
            "tools": [r.to_dict() for r in self.tool_reports],
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "analysis_duration_ms": self.analysis_duration_ms,
            "versions": dict(self.versions),
        }


def analyze_project(path: str, options: Optional[AnalysisOptions] = None) -> ProjectReport:
    """Full static pipeline, plus dynamic validation when requested."""
    options = options or AnalysisOptions()
    started = time.monotonic()
    table = load_api_table(options.api_table_path)
    lexicon = load_identity_lexicon(options.lexicon_path)

    model = parse_source(path)
    graph = build_call_graph(model)
    extraction = extract_tool_entries_with_diagnostics(model)
    context_map = construct_context_map(model, extraction.entries, graph)

    diagnostics = list(model.diagnostics) + list(extraction.diagnostics) + list(context_map.diagnostics)
    tool_reports = []
    for entry in extraction.entries:
        ctx = context_map.for_tool(entry)
        if ctx is None:
            continue
        diagnostics.extend(ctx.diagnostics)
        checks = detect_auth_checks(ctx, model, lexicon)
        operations = identify_sensitive_operations(ctx, graph, model, table)
        classification = classify_tool(entry, ctx, checks, operations)
        tool_reports.append(
            ToolReport(
                tool=entry,
                classification=classification,
                sensitive_operations=operations,
                auth_checks=checks,
            )
        )

    if options.dynamic and options.descriptor_path:
        _run_dynamic_validation(tool_reports, diagnostics, options)

    duration = 0 if options.deterministic else int((time.monotonic() - started) * 1000)
    return ProjectReport(
        project_id=Path(path).name,
        root=str(path),
        tool_reports=tool_reports,
        diagnostics=diagnostics,
        analysis_duration_ms=duration,
        versions={
            "tool": __version__,
            "sensitive_api_table_sha256": _sha256(options.api_table_path or default_api_table_path()),
            "identity_lexicon_sha256": _sha256(options.lexicon_path or default_lexicon_path()),
        },
    )


def _run_dynamic_validation(tool_reports: list[ToolReport], diagnostics: list, options: AnalysisOptions) -> None:
    candidates = {
        r.tool.tool_name: r
        for r in tool_reports
        if r.classification.verdict in (Verdict.AUTH_CACHE, Verdict.AUTH_RUNTIME)
    }
    if not candidates:
        return
    try:
        validation = validate_server(
            options.descriptor_path,
            tool_filter=set(candidates),
            allow_endpoints=options.allow_endpoints,
            probe_timeout=options.probe_timeout,
            handshake_timeout=options.handshake_timeout,
            budget=options.budget,
        )
    except (SpawnFailure, HandshakeTimeout, ProtocolMismatch, TransportFailure, ProbeSafetyError) as exc:
        diagnostics.append(Diagnostic(kind="DynamicValidationFailed", message=f"{type(exc).__name__}: {exc}"))
        return
    advertised = {name for name, _ in validation.advertised_tools}
    static_names = {r.tool.tool_name for r in tool_reports}
    for missing in sorted(static_names - advertised):
        diagnostics.append(
            Diagnostic(kind="ToolListMismatch", message=f"static tool {missing!r} not advertised by the live server")
        )
    for extra in sorted(advertised - static_names):
        diagnostics.append(
            Diagnostic(kind="ToolListMismatch", message=f"live server advertises {extra!r} not found statically")
        )
    for name, report in candidates.items():
        verdict = validation.verdicts.get(name)
        if verdict is None:
            continue
        report.enforcement = verdict
        report.outcomes = validation.outcomes.get(name, [])
        merge_enforcement(report.classification, verdict)


def merge_enforcement(classification: Classification, verdict: EnforcementVerdict) -> None:
    """Fold a dynamic enforcement verdict back into the static classification."""
    if verdict == EnforcementVerdict.NOT_ENFORCED:
        if classification.verdict in (Verdict.AUTH_CACHE, Verdict.AUTH_RUNTIME):
            classification.unconfirmed = False
            classification.rationale += "; dynamic probe executed under existing authorization state"
    elif verdict == EnforcementVerdict.ENFORCED:
        caller_bound = any(c.caller_bound for c in classification.supporting_checks)
        if classification.verdict == Verdict.AUTH_RUNTIME and classification.unconfirmed and caller_bound:
            classification.verdict = Verdict.SECURE
            classification.unconfirmed = False
            classification.rationale += "; dynamic probes were rejected, confirming per-invocation enforcement"


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- corpus aggregation ---------------------------------------------------------


def star_bucket(stars: int) -> str:
    """Lower-inclusive, upper-exclusive buckets; >=1000 lands in '>1000'."""
    if stars < 50:
        return "0-50"
    if stars < 100:
        return "50-100"
    if stars < 500:
        return "100-500"
    if stars < 1000:
        return "500-1000"
    return ">1000"


@dataclass
class CorpusSummary:
    by_category: dict[str, dict[str, int]]
    by_star_range: dict[str, dict[str, int]]
    vulnerable_capabilities: dict[str, int]
    vulnerable_by_author: dict[str, int]
    totals: dict
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "by_category": self.by_category,
            "by_star_range": self.by_star_range,
            "vulnerable_capabilities": self.vulnerable_capabilities,
            "vulnerable_by_author": self.vulnerable_by_author,
            "totals": self.totals,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


def aggregate_corpus(
    manifest: list[dict], reports: list[ProjectReport], exempt_no_sensitive: bool = False
) -> CorpusSummary:
    """Cross-tabulate verdicts by category, star range, capability, and author."""
    meta = {entry["project_id"]: entry for entry in manifest}
    by_category: dict[str, dict[str, int]] = {}
    by_star: dict[str, dict[str, int]] = {}
    capabilities: dict[str, int] = {}
    by_author: dict[str, int] = {}
    diagnostics = []
    total_tools = 0
    vulnerable_tools = 0
    vulnerable_projects = 0
    exempt_projects = 0

    for report in sorted(reports, key=lambda r: r.project_id):
        entry = meta.get(report.project_id)
        if entry is None:
            diagnostics.append(
                Diagnostic(kind="UnknownProject", message=f"{report.project_id} missing from manifest")
            )
            entry = {"category": "Other", "stars": 0, "author": "unknown"}
        category = entry.get("category", "Other")
        bucket = star_bucket(int(entry.get("stars", 0)))
        author = entry.get("author", "unknown")

        project_vulnerable = False
        project_all_exempt = True
        for tool_report in report.tool_reports:
            verdict = tool_report.classification.verdict
            total_tools += 1
            _bump(by_category, category, verdict.value)
            _bump(by_star, bucket, verdict.value)
            if verdict in VULNERABLE_VERDICTS:
                vulnerable_tools += 1
                project_vulnerable = True
                for op_category in sorted({op.category.value for op in tool_report.sensitive_operations}):
                    capabilities[op_category] = capabilities.get(op_category, 0) + 1
            if verdict != Verdict.NO_SENSITIVE_OPS:
                project_all_exempt = False
        if project_vulnerable:
            vulnerable_projects += 1
            by_author[author] = by_author.get(author, 0) + 1
        if project_all_exempt:
            exempt_projects += 1

    denominator = len(reports) - (exempt_projects if exempt_no_sensitive else 0)
    rate = round(100.0 * vulnerable_projects / denominator, 1) if denominator > 0 else "n/a"
    return CorpusSummary(
        by_category=_ordered(by_category),
        by_star_range={b: _row(by_star.get(b, {})) for b in STAR_BUCKETS if b in by_star} or {},
        vulnerable_capabilities=dict(sorted(capabilities.items())),
        vulnerable_by_author=dict(sorted(by_author.items(), key=lambda kv: (-kv[1], kv[0]))),
        totals={
            "projects": len(reports),
            "tools": total_tools,
            "vulnerable_projects": vulnerable_projects,
            "vulnerable_tools": vulnerable_tools,
            "rate_percent": rate,
        },
        diagnostics=diagnostics,
    )


def _bump(table: dict[str, dict[str, int]], row: str, verdict: str) -> None:
    table.setdefault(row, {v: 0 for v in VERDICT_ORDER})
    table[row][verdict] += 1


def _row(counts: dict[str, int]) -> dict[str, int]:
    return {v: counts.get(v, 0) for v in VERDICT_ORDER}


def _ordered(table: dict[str, dict[str, int]]) -> dict[str, dict[str, int]]:
    return {row: _row(counts) for row, counts in sorted(table.items())}


# -- emission -------------------------------------------------------------------


def emit(obj: ProjectReport | CorpusSummary | ServerValidation | dict, format: str = "json") -> bytes:
    """Byte-deterministic rendering of a report or summary."""
    data = obj.to_dict() if hasattr(obj, "to_dict") else obj
    if format == "json":
        return (json.dumps(data, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if format == "text":
        return _render_text(data).encode("utf-8")
    raise ValueError(f"unknown format {format!r}")


def _render_text(data: dict) -> str:
    lines = []
    if "tools" in data:
        lines.append(f"project: {data['project_id']}")
        lines.append(f"{'TOOL':24s} {'PATTERN':20s} {'VERDICT':14s} OPS")
        for tool in data["tools"]:
            ops = ", ".join(sorted({op["category"] for op in tool["sensitive_operations"]})) or "-"
            verdict = tool["classification"]["verdict"]
            if tool["classification"].get("unconfirmed"):
                verdict += "?"
            lines.append(
                f"{tool['tool']['tool_name']:24s} {tool['tool']['registration_pattern']:20s} {verdict:14s} {ops}"
            )
        if data["diagnostics"]:
            lines.append("diagnostics:")
            lines.extend(f"  [{d['kind']}] {d['message']}" for d in data["diagnostics"])
    elif "by_category" in data:
        lines.append(f"{'CATEGORY':28s} " + " ".join(f"{v:>13s}" for v in VERDICT_ORDER))
        for row, counts in data["by_category"].items():
            lines.append(f"{row:28s} " + " ".join(f"{counts[v]:13d}" for v in VERDICT_ORDER))
        lines.append("")
        lines.append(f"{'STARS':28s} " + " ".join(f"{v:>13s}" for v in VERDICT_ORDER))
        for row, counts in data["by_star_range"].items():
            lines.append(f"{row:28s} " + " ".join(f"{counts[v]:13d}" for v in VERDICT_ORDER))
        totals = data["totals"]
        lines.append("")
        lines.append(
            f"projects={totals['projects']} tools={totals['tools']} "
            f"vulnerable_projects={totals['vulnerable_projects']} rate={totals['rate_percent']}"
        )
    else:
        lines.append(json.dumps(data, indent=2))
    return "\n".join(lines) + "\n"
