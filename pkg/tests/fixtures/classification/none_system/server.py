import subprocess

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("shell-echo")


@mcp.tool()
def run_echo(text: str) -> str:
    """Echo text through the system shell."""
    result = subprocess.run(["echo", text], capture_output=True, text=True)
    return result.stdout
