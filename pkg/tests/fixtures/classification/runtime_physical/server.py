import pyautogui

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("typist")

AUTHENTICATED = False


def login(code: str) -> None:
    global AUTHENTICATED
    AUTHENTICATED = code == "0000"


@mcp.tool()
def type_text(text: str) -> str:
    if not AUTHENTICATED:
        raise PermissionError("unauthorized")
    pyautogui.typewrite(text)
    return "typed"
