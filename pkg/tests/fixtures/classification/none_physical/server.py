import pyautogui

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("pointer")


@mcp.tool()
def move_pointer(x: int, y: int) -> str:
    pyautogui.moveTo(x, y)
    return "moved"
