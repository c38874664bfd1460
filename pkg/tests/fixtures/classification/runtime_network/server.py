import requests

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("feed-fetcher")

AUTH_STATE = {"ready": False}


def login(token: str) -> None:
    AUTH_STATE["ready"] = bool(token)


@mcp.tool()
def fetch_feed(url: str) -> str:
    if not AUTH_STATE["ready"]:
        raise PermissionError("authenticate first")
    return requests.get(url, timeout=5).text
