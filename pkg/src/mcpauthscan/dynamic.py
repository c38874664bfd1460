"""Selective dynamic validation over the MCP wire protocol.

A native JSON-RPC 2.0 client speaks ``initialize``, ``tools/list`` and
``tools/call`` to a live server, over newline-delimited stdio or an SSE
HTTP channel, and classifies each probe outcome. Probes only ever target
processes this harness spawned itself or endpoints the operator
allow-listed; every protocol message is captured verbatim.
"""
from __future__ import annotations

import json
import os
import queue
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import (
    HandshakeTimeout,
    ProbeSafetyError,
    ProtocolMismatch,
    SessionStateError,
    SpawnFailure,
    TransportFailure,
)

DEFAULT_PROTOCOL_VERSION = "2024-11-05"
DEFAULT_HANDSHAKE_TIMEOUT = 10.0
DEFAULT_PROBE_TIMEOUT = 15.0
DEFAULT_SERVER_BUDGET = 120.0
PROBE_MARKER = "mcp-authprobe"
TRANSPORT_ERROR_CODES = range(-32603, -32599)  # -32603..-32600 inclusive


def load_auth_markers(path: Optional[str] = None) -> tuple[str, ...]:
    markers_path = (
        Path(path) if path else Path(str(resources.files("mcpauthscan").joinpath("data/auth_markers.txt")))
    )
    markers = []
    for line in markers_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            markers.append(line.lower())
    return tuple(markers)


class TransportKind(str, Enum):
    STDIO = "Stdio"
    SSE_HTTP = "SseHttp"


class ProtocolState(str, Enum):
    SPAWNED = "Spawned"
    INITIALIZED = "Initialized"
    FAILED = "Failed"


class ProbeResult(str, Enum):
    EXECUTED = "ExecutedUnderExistingAuth"
    AUTH_ENFORCED = "AuthorizationEnforced"
    TRANSPORT_ERROR = "TransportError"
    TIMEOUT = "Timeout"
    INCONCLUSIVE = "Inconclusive"


class EnforcementVerdict(str, Enum):
    ENFORCED = "Enforced"
    NOT_ENFORCED = "NotEnforced"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class LaunchDescriptor:
    """How to reach one server: a spawnable command or an SSE URL."""

    transport: str
    command: Optional[list[str]] = None
    url: Optional[str] = None
    env: Optional[dict | list] = None
    cwd: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "LaunchDescriptor":
        transport = data.get("transport", "stdio").lower()
        if transport not in ("stdio", "sse"):
            raise ValueError(f"unsupported transport {transport!r}")
        return cls(
            transport=transport,
            command=data.get("command"),
            url=data.get("url"),
            env=data.get("env"),
            cwd=data.get("cwd"),
        )

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "LaunchDescriptor":
        descriptor_path = Path(path)
        data = json.loads(descriptor_path.read_text(encoding="utf-8"))
        descriptor = cls.from_dict(data)
        if descriptor.cwd is not None and not os.path.isabs(descriptor.cwd):
            descriptor.cwd = str((descriptor_path.parent / descriptor.cwd).resolve())
        return descriptor

    def resolved_env(self) -> dict[str, str]:
        """Literal mapping, or an allow-list of names inherited from os.environ."""
        if isinstance(self.env, dict):
            resolved = dict(self.env)
        elif isinstance(self.env, list):
            resolved = {name: os.environ[name] for name in self.env if name in os.environ}
        else:
            resolved = {}
        resolved.setdefault("PATH", os.environ.get("PATH", os.defpath))
        return resolved


@dataclass
class TrafficEvent:
    direction: str  # "send" | "recv" | "timeout"
    raw: str
    timestamp: float

    def to_dict(self) -> dict:
        return {"direction": self.direction, "raw": self.raw, "timestamp": self.timestamp}


@dataclass
class ValidationOutcome:
    tool_name: str
    arguments_used: dict
    result: ProbeResult
    raw_response: Optional[dict]
    elapsed_ms: int

    def to_dict(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "arguments_used": self.arguments_used,
            "result": self.result.value,
            "raw_response": self.raw_response,
            "elapsed_ms": self.elapsed_ms,
        }


class _StdioTransport:
    def __init__(self, command: list[str], env: dict[str, str], cwd: str):
        try:
            self.process = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                cwd=cwd,
                env=env,
            )
        except (FileNotFoundError, PermissionError, NotADirectoryError, OSError) as exc:
            raise SpawnFailure(f"{command[0]}: {exc}") from exc
        self._lines: queue.Queue[Optional[str]] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self.process.stdout is not None
        for raw in self.process.stdout:
            try:
                self._lines.put(raw.decode("utf-8").strip())
            except UnicodeDecodeError:
                continue
        self._lines.put(None)

    def send(self, text: str) -> None:
        if self.process.poll() is not None or self.process.stdin is None:
            raise TransportFailure("server process exited")
        try:
            self.process.stdin.write((text + "\n").encode("utf-8"))
            self.process.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportFailure(str(exc)) from exc

    def recv(self, deadline: float) -> Optional[str]:
        """Next line, or None once the deadline passes (message may arrive later)."""
        remaining = deadline - time.monotonic()
        while remaining > 0:
            try:
                line = self._lines.get(timeout=min(remaining, 0.25))
            except queue.Empty:
                remaining = deadline - time.monotonic()
                continue
            if line is None:
                raise TransportFailure("server closed stdout")
            if line:
                return line
            remaining = deadline - time.monotonic()
        return None

    def close(self) -> None:
        if self.process.poll() is None:
            self.process.terminate()
            try:
                self.process.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.process.kill()
                self.process.wait(timeout=2)


class _SseTransport:
    """HTTP POST for requests; a text/event-stream for responses."""

    def __init__(self, url: str):
        import httpx

        self.url = url
        self._lines: queue.Queue[Optional[str]] = queue.Queue()
        self._client = httpx.Client(timeout=10.0)
        try:
            self._stream_ctx = self._client.stream("GET", url, headers={"Accept": "text/event-stream"})
            self._stream = self._stream_ctx.__enter__()
            if self._stream.status_code >= 400:
                raise TransportFailure(f"event stream rejected: HTTP {self._stream.status_code}")
        except TransportFailure:
            self._client.close()
            raise
        except Exception as exc:
            self._client.close()
            raise TransportFailure(f"cannot open event stream at {url}: {exc}") from exc
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        try:
            for raw in self._stream.iter_lines():
                if raw.startswith("data:"):
                    self._lines.put(raw[len("data:") :].strip())
        except Exception:
            pass
        self._lines.put(None)

    def send(self, text: str) -> None:
        try:
            response = self._client.post(self.url, content=text, headers={"Content-Type": "application/json"})
        except Exception as exc:
            raise TransportFailure(str(exc)) from exc
        if response.status_code >= 400:
            raise TransportFailure(f"HTTP {response.status_code}")

    def recv(self, deadline: float) -> Optional[str]:
        remaining = deadline - time.monotonic()
        while remaining > 0:
            try:
                line = self._lines.get(timeout=min(remaining, 0.25))
            except queue.Empty:
                remaining = deadline - time.monotonic()
                continue
            if line is None:
                raise TransportFailure("event stream closed")
            if line:
                return line
            remaining = deadline - time.monotonic()
        return None

    def close(self) -> None:
        try:
            self._stream_ctx.__exit__(None, None, None)
        except Exception:
            pass
        self._client.close()


@dataclass
class ServerSession:
    """One stateful protocol session; request/response traffic is captured verbatim."""

    transport: TransportKind
    endpoint: str
    protocol_state: ProtocolState = ProtocolState.SPAWNED
    negotiated_protocol_version: str = ""
    captured_traffic: list[TrafficEvent] = field(default_factory=list)
    _channel: object = None
    _next_id: int = 1
    _scratch: Optional[tempfile.TemporaryDirectory] = None

    def _record(self, direction: str, raw: str) -> None:
        self.captured_traffic.append(TrafficEvent(direction=direction, raw=raw, timestamp=time.time()))

    def request(self, method: str, params: dict, timeout: float) -> dict:
        """Send one request and wait for its response; raises on timeout."""
        if method != "initialize" and self.protocol_state != ProtocolState.INITIALIZED:
            raise SessionStateError(f"{method} requires an initialized session")
        request_id = self._next_id
        self._next_id += 1
        payload = json.dumps({"jsonrpc": "2.0", "id": request_id, "method": method, "params": params})
        self._record("send", payload)
        self._channel.send(payload)
        deadline = time.monotonic() + timeout
        while True:
            line = self._channel.recv(deadline)
            if line is None:
                marker = json.dumps({"timed_out_id": request_id, "method": method})
                self._record("timeout", marker)
                raise TimeoutError(method)
            self._record("recv", line)
            try:
                message = json.loads(line)
            except json.JSONDecodeError:
                continue
            if isinstance(message, dict) and message.get("id") == request_id:
                return message

    def notify(self, method: str, params: dict) -> None:
        payload = json.dumps({"jsonrpc": "2.0", "method": method, "params": params})
        self._record("send", payload)
        self._channel.send(payload)

    def close(self) -> None:
        if self._channel is not None:
            self._channel.close()
        if self._scratch is not None:
            self._scratch.cleanup()


def activate_server(
    spec: LaunchDescriptor | dict | str | os.PathLike,
    allow_endpoints: tuple[str, ...] = (),
    handshake_timeout: float = DEFAULT_HANDSHAKE_TIMEOUT,
    protocol_version: str = DEFAULT_PROTOCOL_VERSION,
) -> ServerSession:
    """Spawn or connect, run the initialize handshake, and return a live session."""
    if isinstance(spec, (str, os.PathLike)):
        descriptor = LaunchDescriptor.from_file(spec)
    elif isinstance(spec, dict):
        descriptor = LaunchDescriptor.from_dict(spec)
    else:
        descriptor = spec

    if descriptor.transport == "stdio":
        if not descriptor.command:
            raise ValueError("stdio descriptor requires a command")
        scratch = None
        cwd = descriptor.cwd
        if cwd is None:
            scratch = tempfile.TemporaryDirectory(prefix="mcpauthscan-")
            cwd = scratch.name
        channel = _StdioTransport(descriptor.command, descriptor.resolved_env(), cwd)
        session = ServerSession(transport=TransportKind.STDIO, endpoint=" ".join(descriptor.command))
        session._scratch = scratch
    else:
        if not descriptor.url:
            raise ValueError("sse descriptor requires a url")
        if descriptor.url not in allow_endpoints:
            raise ProbeSafetyError(
                f"endpoint {descriptor.url} is not allow-listed; refusing to probe"
            )
        channel = _SseTransport(descriptor.url)
        session = ServerSession(transport=TransportKind.SSE_HTTP, endpoint=descriptor.url)
    session._channel = channel

    try:
        response = session.request(
            "initialize",
            {
                "protocolVersion": protocol_version,
                "capabilities": {},
                "clientInfo": {"name": "mcpauthscan", "version": "0.1.0"},
            },
            timeout=handshake_timeout,
        )
    except TimeoutError as exc:
        session.protocol_state = ProtocolState.FAILED
        session.close()
        raise HandshakeTimeout(str(exc)) from exc
    except TransportFailure:
        session.protocol_state = ProtocolState.FAILED
        session.close()
        raise
    result = response.get("result")
    if not isinstance(result, dict) or "protocolVersion" not in result:
        session.protocol_state = ProtocolState.FAILED
        session.close()
        raise ProtocolMismatch(f"unusable initialize response: {response}")
    session.negotiated_protocol_version = str(result["protocolVersion"])
    session.protocol_state = ProtocolState.INITIALIZED
    session.notify("notifications/initialized", {})
    return session


def list_tools(session: ServerSession, timeout: float = DEFAULT_PROBE_TIMEOUT) -> list[tuple[str, dict]]:
    """Server-advertised (name, input schema) pairs."""
    try:
        response = session.request("tools/list", {}, timeout=timeout)
    except TimeoutError as exc:
        raise TransportFailure(f"tools/list timed out: {exc}") from exc
    tools = (response.get("result") or {}).get("tools", [])
    return [(t.get("name", ""), t.get("inputSchema", {}) or {}) for t in tools]


def probe_arguments(schema: dict) -> dict:
    """Minimal benign arguments derived from a JSON schema."""
    args = {}
    for name, prop in (schema.get("properties") or {}).items():
        kind = prop.get("type", "string") if isinstance(prop, dict) else "string"
        if kind in ("number", "integer"):
            args[name] = 0
        elif kind == "boolean":
            args[name] = False
        elif kind == "array":
            args[name] = []
        elif kind == "object":
            args[name] = {}
        else:
            args[name] = PROBE_MARKER
    return args


def invoke_tool(
    session: ServerSession,
    name: str,
    args: dict,
    deadline: float = DEFAULT_PROBE_TIMEOUT,
    markers: Optional[tuple[str, ...]] = None,
) -> ValidationOutcome:
    """One controlled tools/call probe; failures land in the outcome, never raise."""
    if markers is None:
        markers = load_auth_markers()
    started = time.monotonic()
    try:
        response = session.request("tools/call", {"name": name, "arguments": args}, timeout=deadline)
    except TimeoutError:
        return ValidationOutcome(name, args, ProbeResult.TIMEOUT, None, _ms(started))
    except (TransportFailure, SessionStateError) as exc:
        return ValidationOutcome(name, args, ProbeResult.TRANSPORT_ERROR, {"error": str(exc)}, _ms(started))
    return ValidationOutcome(name, args, classify_response(response, markers), response, _ms(started))


def classify_response(response: dict, markers: tuple[str, ...]) -> ProbeResult:
    error = response.get("error")
    if isinstance(error, dict):
        code = error.get("code")
        if isinstance(code, int) and code in TRANSPORT_ERROR_CODES:
            return ProbeResult.TRANSPORT_ERROR
        if _contains_marker(error, markers):
            return ProbeResult.AUTH_ENFORCED
        return ProbeResult.INCONCLUSIVE
    result = response.get("result")
    if isinstance(result, dict):
        if result.get("isError"):
            if _contains_marker(result, markers):
                return ProbeResult.AUTH_ENFORCED
            return ProbeResult.INCONCLUSIVE
        return ProbeResult.EXECUTED
    return ProbeResult.INCONCLUSIVE


def _contains_marker(payload: dict, markers: tuple[str, ...]) -> bool:
    text = json.dumps(payload).lower()
    return any(marker in text for marker in markers)


def _ms(started: float) -> int:
    return int((time.monotonic() - started) * 1000)


def judge_enforcement(outcomes: list[ValidationOutcome]) -> EnforcementVerdict:
    """Pure function of the outcome multiset (order-insensitive)."""
    results = [o.result for o in outcomes]
    if any(r == ProbeResult.EXECUTED for r in results):
        return EnforcementVerdict.NOT_ENFORCED
    if results and all(r == ProbeResult.AUTH_ENFORCED for r in results):
        return EnforcementVerdict.ENFORCED
    return EnforcementVerdict.INCONCLUSIVE


@dataclass
class ServerValidation:
    """Everything observed while probing one server."""

    advertised_tools: list[tuple[str, dict]]
    outcomes: dict[str, list[ValidationOutcome]]
    verdicts: dict[str, EnforcementVerdict]
    negotiated_protocol_version: str
    traffic: list[TrafficEvent]

    def to_dict(self) -> dict:
        return {
            "advertised_tools": [{"name": n, "input_schema": s} for n, s in self.advertised_tools],
            "outcomes": {k: [o.to_dict() for o in v] for k, v in self.outcomes.items()},
            "verdicts": {k: v.value for k, v in self.verdicts.items()},
            "negotiated_protocol_version": self.negotiated_protocol_version,
            "traffic": [t.to_dict() for t in self.traffic],
        }


def validate_server(
    spec: LaunchDescriptor | dict | str | os.PathLike,
    tool_filter: Optional[set[str]] = None,
    allow_endpoints: tuple[str, ...] = (),
    probe_timeout: float = DEFAULT_PROBE_TIMEOUT,
    handshake_timeout: float = DEFAULT_HANDSHAKE_TIMEOUT,
    budget: float = DEFAULT_SERVER_BUDGET,
    markers: Optional[tuple[str, ...]] = None,
) -> ServerValidation:
    """Activate, enumerate, probe each advertised tool once, and judge."""
    if markers is None:
        markers = load_auth_markers()
    session = activate_server(spec, allow_endpoints=allow_endpoints, handshake_timeout=handshake_timeout)
    stop_at = time.monotonic() + budget
    try:
        advertised = list_tools(session, timeout=probe_timeout)
        outcomes: dict[str, list[ValidationOutcome]] = {}
        for name, schema in advertised:
            if tool_filter is not None and name not in tool_filter:
                continue
            if time.monotonic() >= stop_at:
                break
            remaining = min(probe_timeout, max(0.1, stop_at - time.monotonic()))
            outcome = invoke_tool(session, name, probe_arguments(schema), deadline=remaining, markers=markers)
            outcomes.setdefault(name, []).append(outcome)
        verdicts = {name: judge_enforcement(tool_outcomes) for name, tool_outcomes in outcomes.items()}
        return ServerValidation(
            advertised_tools=advertised,
            outcomes=outcomes,
            verdicts=verdicts,
            negotiated_protocol_version=session.negotiated_protocol_version,
            traffic=list(session.captured_traffic),
        )
    finally:
        session.close()
