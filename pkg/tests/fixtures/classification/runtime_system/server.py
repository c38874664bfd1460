import subprocess

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("task-runner")

AUTHORIZED = False


def login(password: str) -> None:
    global AUTHORIZED
    AUTHORIZED = password == "secret"


@mcp.tool()
def run_task(name: str) -> str:
    if not AUTHORIZED:
        raise PermissionError("not authorized")
    result = subprocess.run(["echo", "task", name], capture_output=True, text=True)
    return result.stdout
