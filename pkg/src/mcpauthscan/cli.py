"""Command-line client for the analysis service.

Subcommands mirror the pipeline phases: ``analyze`` a project directory,
``validate`` a live server from a launch descriptor, ``corpus`` a manifest
of projects, ``serve`` the HTTP service. By default everything runs
in-process through the same handlers the service exposes; ``--server``
proxies the request to a running service instead.

Exit codes: 0 = analyzed, nothing vulnerable; 1 = vulnerable verdicts
present; 2 = analysis error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import (
    HandshakeTimeout,
    ProbeSafetyError,
    ProjectNotFound,
    ProtocolMismatch,
    SpawnFailure,
    TransportFailure,
)
from .report import emit
from .service import run_analyze, run_corpus, run_validate
from .service.schemas import AnalyzeRequest, CorpusRequest, ValidateRequest

EXIT_CLEAN = 0
EXIT_VULNERABLE = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcpauthscan")
    parser.add_argument("--server", help="URL of a running mcpauthscan service to proxy through")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="statically analyze one project directory")
    analyze.add_argument("path")
    analyze.add_argument("--format", choices=("json", "text"), default="json")
    analyze.add_argument("--dynamic", action="store_true", help="run selective dynamic validation")
    analyze.add_argument("--descriptor", help="launch descriptor JSON for dynamic validation")
    analyze.add_argument("--api-table", help="override the sensitive-API table file")
    analyze.add_argument("--lexicon", help="override the identity lexicon file")
    analyze.add_argument("--timeout", type=float, default=15.0, help="per-probe deadline in seconds")
    analyze.add_argument("--allow-endpoint", action="append", default=[], help="allow-list an SSE endpoint URL")
    analyze.add_argument("--timestamps", action="store_true", help="include wall-clock timings in the report")

    validate = sub.add_parser("validate", help="probe a live server from a launch descriptor")
    validate.add_argument("descriptor")
    validate.add_argument("--format", choices=("json", "text"), default="json")
    validate.add_argument("--timeout", type=float, default=15.0)
    validate.add_argument("--allow-endpoint", action="append", default=[])

    corpus = sub.add_parser("corpus", help="analyze every project in a manifest and aggregate")
    corpus.add_argument("manifest")
    corpus.add_argument("--format", choices=("json", "text"), default="json")
    corpus.add_argument("--jobs", type=int, default=1)
    corpus.add_argument("--api-table")
    corpus.add_argument("--lexicon")
    corpus.add_argument("--exempt-no-sensitive", action="store_true",
                        help="exclude projects with no sensitive capability from the rate denominator")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8378)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            payload = _dispatch(args, "/analyze", _analyze_request(args))
            _write(payload, args.format)
            return EXIT_VULNERABLE if payload.get("vulnerable") else EXIT_CLEAN
        if args.command == "validate":
            payload = _dispatch(args, "/validate", _validate_request(args))
            _write(payload, args.format)
            not_enforced = any(v == "NotEnforced" for v in payload.get("verdicts", {}).values())
            return EXIT_VULNERABLE if not_enforced else EXIT_CLEAN
        if args.command == "corpus":
            payload = _dispatch(args, "/corpus", _corpus_request(args))
            _write(payload, args.format)
            vulnerable = payload.get("totals", {}).get("vulnerable_projects", 0)
            return EXIT_VULNERABLE if vulnerable else EXIT_CLEAN
        if args.command == "serve":
            import uvicorn

            from .service import app

            uvicorn.run(app, host=args.host, port=args.port)
            return EXIT_CLEAN
    except (ProjectNotFound, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SpawnFailure, HandshakeTimeout, ProtocolMismatch, TransportFailure, ProbeSafetyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except _RemoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


class _RemoteError(Exception):
    pass


def _analyze_request(args) -> AnalyzeRequest:
    return AnalyzeRequest(
        path=args.path,
        dynamic=args.dynamic,
        descriptor_path=args.descriptor,
        api_table_path=args.api_table,
        lexicon_path=args.lexicon,
        deterministic=not args.timestamps,
        allow_endpoints=args.allow_endpoint,
        probe_timeout=args.timeout,
    )


def _validate_request(args) -> ValidateRequest:
    return ValidateRequest(
        descriptor_path=args.descriptor,
        allow_endpoints=args.allow_endpoint,
        probe_timeout=args.timeout,
    )


def _corpus_request(args) -> CorpusRequest:
    return CorpusRequest(
        manifest_path=args.manifest,
        jobs=args.jobs,
        api_table_path=args.api_table,
        lexicon_path=args.lexicon,
        exempt_no_sensitive=args.exempt_no_sensitive,
    )


def _dispatch(args, endpoint: str, request) -> dict:
    if args.server:
        import httpx

        response = httpx.post(args.server.rstrip("/") + endpoint, json=request.model_dump(), timeout=300.0)
        if response.status_code >= 400:
            raise _RemoteError(f"HTTP {response.status_code}: {response.text}")
        return response.json()
    handlers = {"/analyze": run_analyze, "/validate": run_validate, "/corpus": run_corpus}
    return handlers[endpoint](request)


def _write(payload: dict, format: str) -> None:
    sys.stdout.buffer.write(emit(payload, format))
    sys.stdout.buffer.flush()


if __name__ == "__main__":
    sys.exit(main())
