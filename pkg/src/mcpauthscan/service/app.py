"""FastAPI service wrapping the analysis pipeline.

The CLI drives the same handler functions in-process; running the app
(``mcpauthscan serve`` or uvicorn) exposes them to multiple clients.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import (
    HandshakeTimeout,
    ProbeSafetyError,
    ProjectNotFound,
    ProtocolMismatch,
    SpawnFailure,
    TransportFailure,
)
from ..report import AnalysisOptions, aggregate_corpus, analyze_project
from ..dynamic import validate_server
from .schemas import (
    AnalyzeRequest,
    CorpusRequest,
    CorpusSummaryModel,
    HealthModel,
    ProjectReportModel,
    ValidateRequest,
    ValidationModel,
)

app = FastAPI(title="mcpauthscan", version=__version__)


def run_analyze(request: AnalyzeRequest) -> dict:
    options = AnalysisOptions(
        dynamic=request.dynamic,
        descriptor_path=request.descriptor_path,
        api_table_path=request.api_table_path,
        lexicon_path=request.lexicon_path,
        deterministic=request.deterministic,
        allow_endpoints=tuple(request.allow_endpoints),
        probe_timeout=request.probe_timeout,
    )
    report = analyze_project(request.path, options)
    payload = report.to_dict()
    payload["vulnerable"] = report.has_vulnerable()
    return payload


def run_corpus(request: CorpusRequest) -> dict:
    manifest = json.loads(Path(request.manifest_path).read_text(encoding="utf-8"))
    base = Path(request.manifest_path).parent
    options = AnalysisOptions(
        dynamic=request.dynamic,
        api_table_path=request.api_table_path,
        lexicon_path=request.lexicon_path,
        deterministic=request.deterministic,
    )

    def one(entry: dict):
        project_path = Path(entry["path"])
        if not project_path.is_absolute():
            project_path = base / project_path
        report = analyze_project(str(project_path), options)
        report.project_id = entry["project_id"]
        return report

    ordered = sorted(manifest, key=lambda e: e["project_id"])
    if request.jobs > 1:
        with ThreadPoolExecutor(max_workers=request.jobs) as pool:
            reports = list(pool.map(one, ordered))
    else:
        reports = [one(entry) for entry in ordered]
    summary = aggregate_corpus(manifest, reports, exempt_no_sensitive=request.exempt_no_sensitive)
    return summary.to_dict()


def run_validate(request: ValidateRequest) -> dict:
    validation = validate_server(
        request.descriptor_path,
        allow_endpoints=tuple(request.allow_endpoints),
        probe_timeout=request.probe_timeout,
        handshake_timeout=request.handshake_timeout,
    )
    return validation.to_dict()


@app.get("/health", response_model=HealthModel)
def health() -> HealthModel:
    return HealthModel(status="ok", version=__version__)


@app.post("/analyze", response_model=ProjectReportModel)
def analyze_endpoint(request: AnalyzeRequest) -> dict:
    try:
        return run_analyze(request)
    except ProjectNotFound as exc:
        raise HTTPException(status_code=404, detail=f"project not found: {exc}") from exc


@app.post("/corpus", response_model=CorpusSummaryModel)
def corpus_endpoint(request: CorpusRequest) -> dict:
    try:
        return run_corpus(request)
    except FileNotFoundError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except ProjectNotFound as exc:
        raise HTTPException(status_code=404, detail=f"project not found: {exc}") from exc


@app.post("/validate", response_model=ValidationModel)
def validate_endpoint(request: ValidateRequest) -> dict:
    try:
        return run_validate(request)
    except (SpawnFailure, HandshakeTimeout, ProtocolMismatch, TransportFailure) as exc:
        raise HTTPException(status_code=502, detail=f"{type(exc).__name__}: {exc}") from exc
    except ProbeSafetyError as exc:
        raise HTTPException(status_code=403, detail=str(exc)) from exc
    except FileNotFoundError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
