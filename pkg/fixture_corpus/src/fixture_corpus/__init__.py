"""Ground-truth MCP server fixture corpus."""

__version__ = "0.1.0"
