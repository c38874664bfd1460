from mcp.server.fastmcp import FastMCP

from queries import run_query

mcp = FastMCP("catalog")
mcp.add_tool(run_query)
