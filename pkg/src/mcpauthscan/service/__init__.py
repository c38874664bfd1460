"""Service layer: FastAPI app plus request/response schemas."""

from .app import app, run_analyze, run_corpus, run_validate

__all__ = ["app", "run_analyze", "run_corpus", "run_validate"]
