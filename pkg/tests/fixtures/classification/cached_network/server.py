import requests

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("chat-relay")

TOKEN = open("token.cache").read().strip()


@mcp.tool()
def post_message(channel: str, text: str) -> int:
    """Relay a message into the chat service."""
    response = requests.post(
        "http://127.0.0.1:8900/api/send",
        headers={"Authorization": "Bearer " + TOKEN},
        json={"channel": channel, "text": text},
        timeout=5)
    return response.status_code
