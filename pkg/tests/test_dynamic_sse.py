"""Live SSE transport round-trip against a loopback stub."""
from __future__ import annotations

import json
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from mcpauthscan.dynamic import (
    EnforcementVerdict,
    LaunchDescriptor,
    ProbeResult,
    activate_server,
    invoke_tool,
    judge_enforcement,
    list_tools,
)


class _SseStub(BaseHTTPRequestHandler):
    """POST runs the JSON-RPC method; responses flow out the event stream."""

    outbox: "queue.Queue[str]" = queue.Queue()

    def do_GET(self):
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.end_headers()
        while True:
            try:
                payload = self.outbox.get(timeout=10)
            except queue.Empty:
                break
            try:
                self.wfile.write(f"data: {payload}\n\n".encode("utf-8"))
                self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                break

    def do_POST(self):
        body = self.rfile.read(int(self.headers.get("Content-Length", "0")))
        message = json.loads(body)
        self.send_response(202)
        self.end_headers()
        method = message.get("method")
        msg_id = message.get("id")
        if msg_id is None:
            return
        if method == "initialize":
            result = {"protocolVersion": "sse-fixture-1.0", "capabilities": {}}
        elif method == "tools/list":
            result = {"tools": [{"name": "ping", "inputSchema": {"type": "object", "properties": {}}}]}
        elif method == "tools/call":
            result = {"content": [{"type": "text", "text": "pong"}]}
        else:
            result = {}
        self.outbox.put(json.dumps({"jsonrpc": "2.0", "id": msg_id, "result": result}))

    def log_message(self, *args):  # keep test output quiet
        pass


@pytest.fixture
def sse_endpoint():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _SseStub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/mcp"
    server.shutdown()
    server.server_close()


def test_sse_round_trip(sse_endpoint):
    descriptor = LaunchDescriptor(transport="sse", url=sse_endpoint)
    session = activate_server(descriptor, allow_endpoints=(sse_endpoint,), handshake_timeout=8)
    try:
        assert session.negotiated_protocol_version == "sse-fixture-1.0"
        tools = list_tools(session, timeout=8)
        assert [name for name, _ in tools] == ["ping"]
        outcome = invoke_tool(session, "ping", {}, deadline=8)
        assert outcome.result == ProbeResult.EXECUTED
        assert judge_enforcement([outcome]) == EnforcementVerdict.NOT_ENFORCED
    finally:
        session.close()
