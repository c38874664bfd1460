import os

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("audit-log")

API_KEY = os.environ.get("SERVICE_API_KEY", "")


@mcp.tool()
def record_entry(path: str, entry: str) -> str:
    with open(path, "a") as fh:
        fh.write(API_KEY[:4] + ":" + entry + "\n")
    return "recorded"
