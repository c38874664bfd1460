"""Caller-bound authorization analysis for MCP servers."""

__version__ = "0.1.0"
