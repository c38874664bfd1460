"""Wire-protocol session, probe classification, and enforcement judgment."""
from __future__ import annotations

import itertools
import json
import sys
from pathlib import Path

import pytest

from mcpauthscan.dynamic import (
    EnforcementVerdict,
    LaunchDescriptor,
    ProbeResult,
    ProtocolState,
    ValidationOutcome,
    activate_server,
    classify_response,
    invoke_tool,
    judge_enforcement,
    list_tools,
    load_auth_markers,
    probe_arguments,
    validate_server,
)
from mcpauthscan.errors import ProbeSafetyError, SessionStateError, SpawnFailure, TransportFailure

SERVER = str(Path(__file__).parent / "fixtures" / "servers" / "tiny_server.py")
MARKERS = load_auth_markers()


def descriptor(mode: str) -> LaunchDescriptor:
    return LaunchDescriptor(transport="stdio", command=[sys.executable, SERVER, mode])


@pytest.fixture
def echo_session():
    session = activate_server(descriptor("echo"), handshake_timeout=8)
    yield session
    session.close()


def test_handshake_reaches_initialized(echo_session):
    assert echo_session.protocol_state == ProtocolState.INITIALIZED
    assert echo_session.negotiated_protocol_version == "fixture-1.0"


def test_list_tools_matches_fixture(echo_session):
    assert [name for name, _ in list_tools(echo_session)] == ["echo_text"]


def test_zero_tools_server():
    session = activate_server(descriptor("empty"), handshake_timeout=8)
    try:
        assert list_tools(session) == []
    finally:
        session.close()


def test_probe_success_is_executed_under_existing_auth(echo_session):
    tools = list_tools(echo_session)
    outcome = invoke_tool(echo_session, "echo_text", probe_arguments(tools[0][1]), deadline=8)
    assert outcome.result == ProbeResult.EXECUTED
    assert outcome.arguments_used == {"text": "mcp-authprobe"}


def test_guarded_server_probe_is_authorization_enforced():
    session = activate_server(descriptor("guarded"), handshake_timeout=8)
    try:
        outcome = invoke_tool(session, "locked_op", {"text": "x"}, deadline=8)
        assert outcome.result == ProbeResult.AUTH_ENFORCED
    finally:
        session.close()


def test_slow_tool_times_out():
    session = activate_server(descriptor("slow"), handshake_timeout=8)
    try:
        outcome = invoke_tool(session, "sleepy", {}, deadline=1.0)
        assert outcome.result == ProbeResult.TIMEOUT
        assert any(e.direction == "timeout" for e in session.captured_traffic)
    finally:
        session.close()


def test_missing_binary_is_spawn_failure():
    with pytest.raises(SpawnFailure):
        activate_server(LaunchDescriptor(transport="stdio", command=["/nonexistent-binary-xyz"]))


def test_unusable_initialize_response_is_protocol_mismatch():
    from mcpauthscan.errors import ProtocolMismatch

    with pytest.raises(ProtocolMismatch):
        activate_server(descriptor("badinit"), handshake_timeout=8)


def test_refused_connection_is_transport_error():
    spec = LaunchDescriptor(transport="sse", url="http://127.0.0.1:9/mcp")
    with pytest.raises(TransportFailure):
        activate_server(spec, allow_endpoints=("http://127.0.0.1:9/mcp",), handshake_timeout=2)


def test_unlisted_endpoint_is_refused():
    spec = LaunchDescriptor(transport="sse", url="http://127.0.0.1:9/mcp")
    with pytest.raises(ProbeSafetyError):
        activate_server(spec)


def test_tools_require_initialized_state(echo_session):
    echo_session.protocol_state = ProtocolState.SPAWNED
    with pytest.raises(SessionStateError):
        list_tools(echo_session)


def test_no_tool_requests_before_initialize(echo_session):
    list_tools(echo_session)
    sends = [json.loads(e.raw) for e in echo_session.captured_traffic if e.direction == "send"]
    methods = [m.get("method") for m in sends]
    first_tool_request = next(i for i, m in enumerate(methods) if m and m.startswith("tools/"))
    assert "initialize" in methods[:first_tool_request]
    init_index = methods.index("initialize")
    assert init_index < first_tool_request


def test_traffic_capture_completeness(echo_session):
    list_tools(echo_session)
    invoke_tool(echo_session, "echo_text", {"text": "x"}, deadline=8)
    sends = [json.loads(e.raw) for e in echo_session.captured_traffic if e.direction == "send"]
    request_ids = {m["id"] for m in sends if "id" in m}
    recvs = [json.loads(e.raw) for e in echo_session.captured_traffic if e.direction == "recv"]
    answered = {m.get("id") for m in recvs}
    timeouts = {
        json.loads(e.raw).get("timed_out_id")
        for e in echo_session.captured_traffic
        if e.direction == "timeout"
    }
    assert request_ids <= (answered | timeouts)


def test_probe_arguments_from_schema():
    schema = {
        "type": "object",
        "properties": {
            "name": {"type": "string"},
            "count": {"type": "integer"},
            "ratio": {"type": "number"},
            "flag": {"type": "boolean"},
            "items": {"type": "array"},
            "extra": {"type": "object"},
        },
    }
    assert probe_arguments(schema) == {
        "name": "mcp-authprobe",
        "count": 0,
        "ratio": 0,
        "flag": False,
        "items": [],
        "extra": {},
    }
    assert probe_arguments({}) == {}


# -- response classification -----------------------------------------------------


@pytest.mark.parametrize(
    ("response", "expected"),
    [
        ({"result": {"content": [{"type": "text", "text": "done"}]}}, ProbeResult.EXECUTED),
        ({"result": {"isError": True, "content": [{"type": "text", "text": "permission denied"}]}},
         ProbeResult.AUTH_ENFORCED),
        ({"result": {"isError": True, "content": [{"type": "text", "text": "disk full"}]}},
         ProbeResult.INCONCLUSIVE),
        ({"error": {"code": -32600, "message": "invalid request"}}, ProbeResult.TRANSPORT_ERROR),
        ({"error": {"code": -32603, "message": "internal"}}, ProbeResult.TRANSPORT_ERROR),
        ({"error": {"code": -32000, "message": "unauthorized"}}, ProbeResult.AUTH_ENFORCED),
        ({"error": {"code": -32000, "message": "boom"}}, ProbeResult.INCONCLUSIVE),
        ({}, ProbeResult.INCONCLUSIVE),
    ],
)
def test_response_classification(response, expected):
    assert classify_response(response, MARKERS) == expected


# -- enforcement judgment ----------------------------------------------------------


def outcome(result: ProbeResult) -> ValidationOutcome:
    return ValidationOutcome("t", {}, result, None, 1)


def expected_judgment(results: tuple[ProbeResult, ...]) -> EnforcementVerdict:
    """Independent statement of the merge rule used as the table oracle."""
    if any(r == ProbeResult.EXECUTED for r in results):
        return EnforcementVerdict.NOT_ENFORCED
    if results and all(r == ProbeResult.AUTH_ENFORCED for r in results):
        return EnforcementVerdict.ENFORCED
    return EnforcementVerdict.INCONCLUSIVE


def test_single_probe_judgments():
    assert judge_enforcement([outcome(ProbeResult.EXECUTED)]) == EnforcementVerdict.NOT_ENFORCED
    assert judge_enforcement([outcome(ProbeResult.AUTH_ENFORCED)]) == EnforcementVerdict.ENFORCED
    assert judge_enforcement([outcome(ProbeResult.TIMEOUT)]) == EnforcementVerdict.INCONCLUSIVE


def test_all_two_probe_combinations():
    for pair in itertools.product(list(ProbeResult), repeat=2):
        outcomes = [outcome(r) for r in pair]
        assert judge_enforcement(outcomes) == expected_judgment(pair), pair


def test_judgment_is_order_insensitive():
    for pair in itertools.product(list(ProbeResult), repeat=2):
        forward = judge_enforcement([outcome(r) for r in pair])
        backward = judge_enforcement([outcome(r) for r in reversed(pair)])
        assert forward == backward


def test_validate_server_end_to_end():
    validation = validate_server(descriptor("guarded"), probe_timeout=8, handshake_timeout=8)
    assert validation.verdicts == {"locked_op": EnforcementVerdict.ENFORCED}
    assert validation.negotiated_protocol_version == "fixture-1.0"
    sends = [json.loads(e.raw) for e in validation.traffic if e.direction == "send"]
    assert sends[0]["method"] == "initialize"


def test_descriptor_file_round_trip(tmp_path):
    payload = {"transport": "stdio", "command": [sys.executable, SERVER, "echo"], "env": ["PATH"], "cwd": "."}
    path = tmp_path / "launch.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    spec = LaunchDescriptor.from_file(path)
    assert spec.command[2] == "echo"
    assert spec.cwd == str(tmp_path.resolve())
    env = spec.resolved_env()
    assert "PATH" in env
