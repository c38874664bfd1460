"""Pydantic request/response models for the analysis service."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class AnalyzeRequest(BaseModel):
    path: str
    dynamic: bool = False
    descriptor_path: Optional[str] = None
    api_table_path: Optional[str] = None
    lexicon_path: Optional[str] = None
    deterministic: bool = True
    allow_endpoints: list[str] = Field(default_factory=list)
    probe_timeout: float = 15.0


class CorpusRequest(BaseModel):
    manifest_path: str
    jobs: int = 1
    dynamic: bool = False
    api_table_path: Optional[str] = None
    lexicon_path: Optional[str] = None
    deterministic: bool = True
    exempt_no_sensitive: bool = False


class ValidateRequest(BaseModel):
    descriptor_path: str
    allow_endpoints: list[str] = Field(default_factory=list)
    probe_timeout: float = 15.0
    handshake_timeout: float = 10.0


class ToolSummary(BaseModel):
    tool_name: str
    handler: str
    registration_pattern: str
    file: str
    line: int
    description: str = ""


class ClassificationModel(BaseModel):
    verdict: str
    unconfirmed: bool
    rationale: str
    supporting_checks: list[dict]
    unguarded_operations: list[dict]


class ToolReportModel(BaseModel):
    tool: ToolSummary
    classification: ClassificationModel
    sensitive_operations: list[dict]
    auth_checks: list[dict]
    enforcement: Optional[str] = None
    probe_outcomes: list[dict] = Field(default_factory=list)


class ProjectReportModel(BaseModel):
    schema_version: int
    project_id: str
    root: str
    tools: list[ToolReportModel]
    diagnostics: list[dict]
    analysis_duration_ms: int
    versions: dict[str, str]
    vulnerable: bool


class CorpusSummaryModel(BaseModel):
    schema_version: int
    by_category: dict[str, dict[str, int]]
    by_star_range: dict[str, dict[str, int]]
    vulnerable_capabilities: dict[str, int]
    vulnerable_by_author: dict[str, int]
    totals: dict
    diagnostics: list[dict]


class ValidationModel(BaseModel):
    advertised_tools: list[dict]
    outcomes: dict[str, list[dict]]
    verdicts: dict[str, str]
    negotiated_protocol_version: str
    traffic: list[dict]


class HealthModel(BaseModel):
    status: str
    version: str
