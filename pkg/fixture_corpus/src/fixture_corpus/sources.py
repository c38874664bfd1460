"""Source templates for every generated fixture.

Dangerous capabilities are simulated harmlessly while keeping the exact
API names a static analyzer matches: commands run ``echo``, file writes
stay inside ``./scratch``, the HTTP client and pointer libraries are
local in-memory stand-ins shipped next to the server.
"""
from __future__ import annotations

import sys

from .specs import AUTH_TO_PROBE, AUTH_TO_VERDICT, FixtureSpec

MCPLIB = '''"""Tiny in-process MCP runtime: a tool decorator plus a stdio JSON-RPC loop."""
import inspect
import json
import sys

PROTOCOL_VERSION = "2024-11-05"

_TYPE_NAMES = {str: "string", int: "integer", float: "number", bool: "boolean"}


class FastMCP:
    def __init__(self, name):
        self.name = name
        self._tools = {}

    def tool(self, name=None):
        def register(fn):
            self._tools[name or fn.__name__] = fn
            return fn
        return register

    def _schema(self, fn):
        props = {}
        for pname, param in inspect.signature(fn).parameters.items():
            props[pname] = {"type": _TYPE_NAMES.get(param.annotation, "string")}
        return {"type": "object", "properties": props}

    def _reply(self, msg_id, result=None, error=None):
        payload = {"jsonrpc": "2.0", "id": msg_id}
        if error is not None:
            payload["error"] = error
        else:
            payload["result"] = result
        sys.stdout.write(json.dumps(payload) + "\\n")
        sys.stdout.flush()

    def run(self):
        for raw in sys.stdin:
            raw = raw.strip()
            if not raw:
                continue
            try:
                message = json.loads(raw)
            except ValueError:
                continue
            msg_id = message.get("id")
            if msg_id is None:
                continue
            method = message.get("method")
            if method == "initialize":
                self._reply(msg_id, {"protocolVersion": PROTOCOL_VERSION, "capabilities": {},
                                     "serverInfo": {"name": self.name, "version": "1"}})
            elif method == "tools/list":
                advertised = [{"name": tool_name, "inputSchema": self._schema(fn)}
                              for tool_name, fn in sorted(self._tools.items())]
                self._reply(msg_id, {"tools": advertised})
            elif method == "tools/call":
                params = message.get("params") or {}
                fn = self._tools.get(params.get("name", ""))
                if fn is None:
                    self._reply(msg_id, None, {"code": -32602, "message": "unknown tool"})
                    continue
                try:
                    output = fn(**(params.get("arguments") or {}))
                    self._reply(msg_id, {"content": [{"type": "text", "text": str(output)}]})
                except Exception as exc:
                    self._reply(msg_id, {"isError": True,
                                         "content": [{"type": "text", "text": str(exc)}]})
            else:
                self._reply(msg_id, None, {"code": -32601, "message": "unsupported method"})
'''

REQUESTS_STUB = '''"""Loopback stand-in for the HTTP client: records calls, always succeeds."""

CALLS = []


class _Response:
    def __init__(self, status_code, text):
        self.status_code = status_code
        self.text = text


def post(url, headers=None, json=None, timeout=None):
    CALLS.append(("post", url))
    return _Response(200, "ok")


def get(url, headers=None, params=None, timeout=None):
    CALLS.append(("get", url))
    return _Response(200, "ok")
'''

PYAUTOGUI_STUB = '''"""No-op pointer stand-in: records intended actions in memory."""

EVENTS = []


def click(x=0, y=0):
    EVENTS.append(("click", x, y))


def moveTo(x=0, y=0):
    EVENTS.append(("move", x, y))


def dragTo(x=0, y=0):
    EVENTS.append(("drag", x, y))


def typewrite(text=""):
    EVENTS.append(("type", text))
'''

RUN_BLOCK = '\n\nif __name__ == "__main__":\n    mcp.run()\n'

TOKEN_FILE = "fixture-token:probe-client\n"


def _launch_descriptor() -> str:
    import json

    return json.dumps(
        {"transport": "stdio", "command": [sys.executable, "server.py"], "env": ["PATH"], "cwd": "."},
        indent=2,
    ) + "\n"


# -- classification fixtures ----------------------------------------------------

_CAPABILITY_PARTS = {
    "SystemExecution": {
        "imports": "import subprocess",
        "stub_files": {},
        "body": (
            '    result = subprocess.run(["echo", {tag}text], capture_output=True, text=True)\n'
            "    return result.stdout\n"
        ),
        "params": "text: str",
    },
    "PersistentData": {
        "imports": "import os",
        "stub_files": {},
        "body": (
            '    os.makedirs("scratch", exist_ok=True)\n'
            '    path = os.path.join("scratch", name + ".log")\n'
            '    with open(path, "a") as fh:\n'
            "        fh.write({tag}entry + \"\\n\")\n"
            '    return "stored"\n'
        ),
        "params": "name: str, entry: str",
    },
    "NetworkCommunication": {
        "imports": "import requests",
        "stub_files": {"requests.py": REQUESTS_STUB},
        "body": (
            "    response = requests.post(\n"
            '        "http://127.0.0.1:8990/api/send",\n'
            "        headers={{\"X-Relay\": {tag}\"fixture\"}},\n"
            "        json={{\"channel\": channel, \"text\": text}})\n"
            "    return str(response.status_code)\n"
        ),
        "params": "channel: str, text: str",
    },
    "PhysicalInterface": {
        "imports": "import pyautogui",
        "stub_files": {"pyautogui.py": PYAUTOGUI_STUB},
        "body": "    pyautogui.click(x, y)\n    return {tag}\"tapped\"\n",
        "params": "x: int, y: int",
    },
}

_AUTH_PARTS = {
    "None": {
        "setup": "",
        "extra_imports": "",
        "guard": "",
        "tag": "",
        "tool_prefix": "open",
    },
    "CachedStartup": {
        "setup": 'TOKEN = open("token.cache").read().strip()\n',
        "extra_imports": "",
        "guard": "",
        "tag": "TOKEN[:4] + ",
        "tool_prefix": "relay",
    },
    "RuntimeUnbound": {
        "setup": (
            "AUTHORIZED = False\n"
            "\n"
            "\n"
            "def login(code: str) -> None:\n"
            "    global AUTHORIZED\n"
            '    AUTHORIZED = code == "0000"\n'
        ),
        "extra_imports": "",
        "guard": '    if not AUTHORIZED:\n        raise PermissionError("not authorized")\n',
        "tag": "",
        "tool_prefix": "flagged",
    },
    "CallerBound": {
        "setup": "SESSIONS = {}\n",
        "extra_imports": "",
        "guard": (
            "    if connection_id not in SESSIONS:\n"
            '        raise PermissionError("session not initialized")\n'
        ),
        "tag": "",
        "tool_prefix": "scoped",
    },
}

_CAPABILITY_SHORT = {
    "SystemExecution": "system",
    "PersistentData": "data",
    "NetworkCommunication": "network",
    "PhysicalInterface": "physical",
}

_CAPABILITY_VERB = {
    "SystemExecution": "echo",
    "PersistentData": "store",
    "NetworkCommunication": "relay",
    "PhysicalInterface": "tap",
}


def classification_fixture(auth: str, capability: str) -> FixtureSpec:
    cap = _CAPABILITY_PARTS[capability]
    auth_parts = _AUTH_PARTS[auth]
    short = _CAPABILITY_SHORT[capability]
    fixture_id = f"classification/{auth.lower()}_{short}"
    tool_name = f"{auth_parts['tool_prefix']}_{_CAPABILITY_VERB[capability]}"

    params = cap["params"]
    if auth == "CallerBound":
        params = "connection_id: str, " + params
    body = cap["body"].format(tag=auth_parts["tag"])
    # RuntimeUnbound fixtures expose login() so the flag is genuinely mutable state
    server = (
        f"{cap['imports']}\n\nfrom mcplib import FastMCP\n\n"
        f"mcp = FastMCP(\"{auth.lower()}-{short}\")\n\n"
    )
    if auth_parts["setup"]:
        server += auth_parts["setup"] + "\n"
    server += (
        "\n@mcp.tool()\n"
        f"def {tool_name}({params}) -> str:\n"
        f"{auth_parts['guard']}{body}"
    )
    server += RUN_BLOCK

    files = {"server.py": server, "mcplib.py": MCPLIB, "launch.json": _launch_descriptor()}
    files.update(cap["stub_files"])
    if auth == "CachedStartup":
        files["token.cache"] = TOKEN_FILE
    probe = AUTH_TO_PROBE.get(auth)
    if auth in ("None",):
        probe = "NotEnforced"  # nothing rejects the probe
    elif auth == "RuntimeUnbound":
        probe = "Enforced"  # wire-level rejection that is still not caller-bound
    return FixtureSpec(
        fixture_id=fixture_id,
        registration_pattern="DecoratorBased",
        auth_pattern=auth,
        capability=capability,
        expected_verdict=AUTH_TO_VERDICT[auth],
        runnable=True,
        expected_tool=tool_name,
        launch="launch.json",
        expected_probe=probe,
        files=files,
    )


# -- registration fixtures --------------------------------------------------------

_REGISTRATION_SOURCES: dict[str, tuple[str, str, dict[str, str]]] = {
    "DecoratorBased": (
        "reg_decorator",
        "title_case",
        {
            "server.py": (
                "from mcp.server.fastmcp import FastMCP\n\n"
                'mcp = FastMCP("text-tools")\n\n\n'
                "@mcp.tool()\n"
                "def title_case(text: str) -> str:\n"
                '    """Title-case a fragment of text."""\n'
                "    return text.title()\n"
            )
        },
    ),
    "AddToolApi": (
        "reg_add_tool",
        "word_count",
        {
            "counters.py": (
                "def word_count(text: str) -> int:\n"
                '    """Count whitespace-separated words."""\n'
                "    return len(text.split())\n"
            ),
            "server.py": (
                "from mcp.server.fastmcp import FastMCP\n\n"
                "from counters import word_count\n\n"
                'mcp = FastMCP("counters")\n'
                "mcp.add_tool(word_count)\n"
            ),
        },
    ),
    "ToolObject": (
        "reg_tool_object",
        "reverse_text",
        {
            "server.py": (
                "from mcp.types import Tool\n\n\n"
                "def reverse_text(text: str) -> str:\n"
                "    return text[::-1]\n\n\n"
                'TOOLS = [Tool("reverse_text", reverse_text)]\n'
            )
        },
    ),
    "RouteOperationId": (
        "reg_route",
        "swap_case",
        {
            "app.py": (
                "from fastapi import FastAPI\n\n"
                "app = FastAPI()\n\n\n"
                '@app.get("/swap", operation_id="swap_case")\n'
                "def swap_handler(text: str) -> str:\n"
                "    return text.swapcase()\n"
            )
        },
    ),
    "RuntimeEnumeration": (
        "reg_runtime_enum",
        "strip_spaces",
        {
            "server.py": (
                "def strip_spaces(text: str) -> str:\n"
                '    return text.replace(" ", "")\n\n\n'
                "def list_tools():\n"
                "    return [strip_spaces]\n"
            )
        },
    ),
    "RegisterApi": (
        "reg_register_api",
        "repeat_text",
        {
            "server.py": (
                "from mcp_runtime import Server\n\n"
                'server = Server("repeaters")\n\n\n'
                "def repeat_text(text: str, times: int) -> str:\n"
                "    return text * times\n\n\n"
                "server.register_tool(repeat_text)\n"
            )
        },
    ),
    "ToolHandlerSubclass": (
        "reg_toolhandler",
        "quote_ops",
        {
            "handlers.py": (
                "from mcp_runtime import ToolHandler\n\n\n"
                "class QuoteHandler(ToolHandler):\n"
                '    name = "quote_ops"\n\n'
                "    def run_tool(self, args: dict) -> str:\n"
                "        return '\"' + str(args) + '\"'\n"
            )
        },
    ),
}


def registration_fixture(pattern: str) -> FixtureSpec:
    fixture_id, tool_name, files = _REGISTRATION_SOURCES[pattern]
    return FixtureSpec(
        fixture_id=f"registration/{fixture_id}",
        registration_pattern=pattern,
        auth_pattern=None,
        capability=None,
        expected_verdict="NoSensitiveOps",
        runnable=False,
        expected_tool=tool_name,
        files=files,
    )


# -- real-world reference servers ---------------------------------------------------

GIT_FRAGMENT_SERVER = '''from typing import List
import subprocess

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("git")


@mcp.tool()
def git_run(repo_path: str, command: List[str]) -> str:
    """Run a git subcommand inside the given repository."""
    return _run_git_command(repo_path, command)


def _run_git_command(repo_path: str, command: List[str]) -> str:
    full_command = ["git"] + command
    result = subprocess.run(
        full_command, cwd=repo_path,
        check=True, capture_output=True, text=True)
    return result.stdout
'''

SESSION_LISTING_SERVER = '''import subprocess
from uuid import uuid4

from mcplib import FastMCP

mcp = FastMCP("secure-git")

SESSIONS = {}


def mcp_initialize(connection_id: str, client_name: str):
    token, client_id = open("token.cache").read().split(":")
    if client_id != client_name:
        raise PermissionError("caller mismatch")
    session = {  # Creates fresh session per connection
        "session_id": uuid4().hex,
        "token": token,
        "client_id": client_id,
        "connection_id": connection_id,
    }
    SESSIONS[connection_id] = session
    return {"session_id": session["session_id"]}


def mcp_call(connection_id: str, params):
    if connection_id not in SESSIONS:
        raise PermissionError("session not initialized")
    return run_tool(SESSIONS[connection_id], params)


def run_tool(session, params):
    result = subprocess.run(
        ["echo", str(params.get("command", ""))],
        capture_output=True, text=True)
    return result.stdout


@mcp.tool()
def run_git(connection_id: str, command: str) -> str:
    """Run a git action inside the caller's session."""
    return mcp_call(connection_id, {"command": command})
'''


def realworld_fixtures() -> list[FixtureSpec]:
    git = FixtureSpec(
        fixture_id="realworld/git_fragment",
        registration_pattern="DecoratorBased",
        auth_pattern="None",
        capability="SystemExecution",
        expected_verdict="AuthNone",
        runnable=False,
        expected_tool="git_run",
        files={"server.py": GIT_FRAGMENT_SERVER},
    )
    session = FixtureSpec(
        fixture_id="realworld/session_listing",
        registration_pattern="DecoratorBased",
        auth_pattern="CallerBound",
        capability="SystemExecution",
        expected_verdict="Secure",
        runnable=True,
        expected_tool="run_git",
        launch="launch.json",
        expected_probe="Enforced",
        files={
            "server.py": SESSION_LISTING_SERVER + RUN_BLOCK.lstrip("\n"),
            "mcplib.py": MCPLIB,
            "launch.json": _launch_descriptor(),
            "token.cache": TOKEN_FILE,
        },
    )
    return [git, session]
