"""Authorization-check detection and the classification decision procedure."""
from __future__ import annotations

import random

import pytest

from mcpauthscan.authz import (
    SEVERITY,
    AuthCheck,
    AuthForm,
    CheckTiming,
    Verdict,
    classify_tool,
    matches_term,
)
from mcpauthscan.deptree import ToolContext
from mcpauthscan.errors import InconsistentInput
from mcpauthscan.model import SourceLocation
from mcpauthscan.sensitive import ResourceCategory, SensitiveOperation
from mcpauthscan.toolentries import RegistrationPattern, ToolEntry

from conftest import FIXTURES, run_pipeline


# -- detection goldens ---------------------------------------------------------


def test_listing_one_session_guard_detected(api_table):
    result = run_pipeline(FIXTURES / "realworld" / "session_project", api_table)
    checks = result.checks_by_tool["run_git"]
    session_guards = [
        c
        for c in checks
        if c.form == AuthForm.SESSION_CHECK
        and c.timing == CheckTiming.PER_INVOCATION
        and c.evidence == "connection_id not in SESSIONS"
    ]
    assert len(session_guards) == 1
    assert session_guards[0].caller_bound is True


def test_startup_cached_credential_detected(api_table):
    result = run_pipeline(FIXTURES / "classification" / "cached_network", api_table)
    checks = result.checks_by_tool["post_message"]
    cached = [c for c in checks if c.form == AuthForm.CACHED_CREDENTIAL]
    assert len(cached) == 1
    assert cached[0].timing == CheckTiming.STARTUP_ONCE
    assert cached[0].caller_bound is False
    assert "TOKEN" in cached[0].state_vars


def test_tool_without_credentials_has_no_checks(api_table):
    result = run_pipeline(FIXTURES / "classification" / "none_system", api_table)
    assert result.checks_by_tool["run_echo"] == []


def test_cross_file_startup_credential_yields_auth_cache(tmp_path, api_table):
    from conftest import write_project

    root = write_project(
        tmp_path,
        {
            "config.py": 'TOKEN = open("token.cache").read().strip()\n',
            "server.py": (
                "import requests\n"
                "from mcp.server.fastmcp import FastMCP\n"
                "from config import TOKEN\n\n"
                "mcp = FastMCP('x')\n\n"
                "@mcp.tool()\n"
                "def push(url: str) -> int:\n"
                "    return requests.post(url, headers={'Authorization': TOKEN}, timeout=5).status_code\n"
            ),
        },
    )
    result = run_pipeline(root, api_table)
    assert result.single_verdict() == Verdict.AUTH_CACHE.value


def test_env_api_key_acquisition_detected(api_table):
    result = run_pipeline(FIXTURES / "classification" / "cached_data", api_table)
    checks = result.checks_by_tool["record_entry"]
    assert any(c.form == AuthForm.API_KEY and c.timing == CheckTiming.STARTUP_ONCE for c in checks)


def test_identity_lexicon_matching_is_token_aware():
    assert matches_term("connection_id", "connection")
    assert matches_term("SESSIONS", "session")
    assert matches_term("client_id", "client_id")
    assert not matches_term("subprocess", "sub")
    assert matches_term("sub", "sub")


def test_custom_identity_lexicon_changes_caller_binding(tmp_path, api_table):
    from mcpauthscan.authz import detect_auth_checks, load_identity_lexicon
    from conftest import write_project

    root = write_project(
        tmp_path,
        {
            "m.py": (
                "import subprocess\n"
                "from mcp.server.fastmcp import FastMCP\n"
                "mcp = FastMCP('x')\n\n"
                "BADGES = {}\n\n"
                "@mcp.tool()\n"
                "def stamp(operator_badge: str, text: str) -> str:\n"
                "    if operator_badge not in BADGES:\n"
                "        raise PermissionError('badge not authorized')\n"
                "    return subprocess.run(['echo', text], capture_output=True, text=True).stdout\n"
            )
        },
    )
    result = run_pipeline(root, api_table)
    ctx = result.single_context()
    default_checks = detect_auth_checks(ctx, result.model)
    assert not any(c.caller_bound for c in default_checks)

    lexicon_file = tmp_path / "lexicon.txt"
    lexicon_file.write_text("badge\n", encoding="utf-8")
    custom = load_identity_lexicon(str(lexicon_file))
    custom_checks = detect_auth_checks(ctx, result.model, custom)
    assert any(c.caller_bound for c in custom_checks)


# -- fixture verdicts ----------------------------------------------------------

CLASSIFICATION_EXPECTED = {
    "none": Verdict.AUTH_NONE,
    "cached": Verdict.AUTH_CACHE,
    "runtime": Verdict.AUTH_RUNTIME,
    "bound": Verdict.SECURE,
}


@pytest.mark.parametrize(
    "fixture",
    sorted(p.name for p in (FIXTURES / "classification").iterdir()),
)
def test_classification_fixture_verdicts(fixture, api_table):
    result = run_pipeline(FIXTURES / "classification" / fixture, api_table)
    auth_pattern = fixture.split("_")[0]
    assert result.single_verdict() == CLASSIFICATION_EXPECTED[auth_pattern].value


def test_table4_row_correspondence(api_table):
    expected = {
        "pre_auth": Verdict.AUTH_NONE,
        "auth_trigger": Verdict.AUTH_CACHE,
        "subsequent": Verdict.AUTH_CACHE,
        "caller_bound": Verdict.SECURE,
    }
    for fixture, verdict in expected.items():
        result = run_pipeline(FIXTURES / "table4" / fixture, api_table)
        assert result.single_verdict() == verdict.value, fixture


def test_verdict_totality_and_exclusivity(api_table):
    fixture_dirs = list((FIXTURES / "classification").iterdir()) + [
        FIXTURES / "realworld" / "git_project",
        FIXTURES / "realworld" / "session_project",
        FIXTURES / "misc" / "pure_tool",
    ]
    for project in fixture_dirs:
        result = run_pipeline(project, api_table)
        for classification in result.classifications.values():
            assert classification.verdict in Verdict


def test_no_sensitive_ops_verdict(api_table):
    result = run_pipeline(FIXTURES / "misc" / "pure_tool", api_table)
    assert result.single_verdict() == Verdict.NO_SENSITIVE_OPS.value


def test_authnone_implies_no_supporting_checks(api_table):
    for fixture in ("none_system", "none_data", "none_network", "none_physical"):
        result = run_pipeline(FIXTURES / "classification" / fixture, api_table)
        classification = next(iter(result.classifications.values()))
        assert classification.verdict == Verdict.AUTH_NONE
        assert classification.supporting_checks == []


def test_runtime_unbound_flag_not_unconfirmed(api_table):
    result = run_pipeline(FIXTURES / "classification" / "runtime_system", api_table)
    classification = next(iter(result.classifications.values()))
    assert classification.verdict == Verdict.AUTH_RUNTIME
    assert classification.unconfirmed is False  # no caller-bound check exists


# -- synthetic scenarios ---------------------------------------------------------


def make_entry() -> ToolEntry:
    return ToolEntry(
        tool_name="probe",
        handler="t",
        registration_pattern=RegistrationPattern.DECORATOR_BASED,
        location=SourceLocation("srv.py", 1, 0),
    )


def make_context(edges: dict[str, set[str]], edge_sites: dict, referenced: dict) -> ToolContext:
    related = set(edges)
    return ToolContext(
        tool=make_entry(),
        related_functions=related,
        call_edges=edges,
        edge_sites=edge_sites,
        referenced_names=referenced,
    )


def op_at(fn: str, line: int, via: list[str]) -> SensitiveOperation:
    return SensitiveOperation(
        category=ResourceCategory.SYSTEM_EXECUTION,
        subcategory="System Execution",
        matched_api="subprocess.run",
        location=SourceLocation("srv.py", line, 0),
        via_path=via,
        input_dependent=True,
    )


def guard(fn: str, line: int, caller_bound: bool, timing: CheckTiming, dominated=(), state=()) -> AuthCheck:
    return AuthCheck(
        form=AuthForm.SESSION_CHECK if caller_bound else AuthForm.OTHER,
        timing=timing,
        caller_bound=caller_bound,
        guard_location=SourceLocation("srv.py", line, 0),
        guarded_functions=set(),
        evidence=f"guard@{fn}:{line}",
        function=fn,
        state_vars=tuple(state),
        dominated_sites=set(dominated),
        raises_on_failure=True,
    )


def test_partial_path_coverage_is_auth_runtime():
    edges = {"t": {"a", "b"}, "a": {"s"}, "b": {"s"}, "s": set()}
    edge_sites = {
        ("t", "a"): [("srv.py", 10, 0)],
        ("t", "b"): [("srv.py", 11, 0)],
        ("a", "s"): [("srv.py", 20, 0)],
        ("b", "s"): [("srv.py", 30, 0)],
    }
    ctx = make_context(edges, edge_sites, {f: set() for f in edges})
    op = op_at("s", 40, ["t", "a", "s"])
    covering_a = guard("a", 19, True, CheckTiming.PER_INVOCATION, dominated={("srv.py", 20, 0)})
    partial = classify_tool(make_entry(), ctx, [covering_a], [op])
    assert partial.verdict == Verdict.AUTH_RUNTIME
    assert partial.unconfirmed is True  # caller-bound check exists but does not cover every path

    covering_b = guard("b", 29, True, CheckTiming.PER_INVOCATION, dominated={("srv.py", 30, 0)})
    full = classify_tool(make_entry(), ctx, [covering_a, covering_b], [op])
    assert full.verdict == Verdict.SECURE


def test_aggregate_is_worst_path_verdict():
    edges = {"t": {"a", "b"}, "a": {"s"}, "b": {"s"}, "s": set()}
    edge_sites = {
        ("t", "a"): [("srv.py", 10, 0)],
        ("t", "b"): [("srv.py", 11, 0)],
        ("a", "s"): [("srv.py", 20, 0)],
        ("b", "s"): [("srv.py", 30, 0)],
    }
    ctx = make_context(edges, edge_sites, {f: set() for f in edges})
    op = op_at("s", 40, ["t", "a", "s"])
    both = [
        guard("a", 19, True, CheckTiming.PER_INVOCATION, dominated={("srv.py", 20, 0)}),
        guard("b", 29, True, CheckTiming.PER_INVOCATION, dominated={("srv.py", 30, 0)}),
    ]
    # per-path verdicts: Secure + Secure -> Secure; drop one guard: Secure + AuthRuntime -> AuthRuntime
    assert classify_tool(make_entry(), ctx, both, [op]).verdict == Verdict.SECURE
    assert classify_tool(make_entry(), ctx, both[:1], [op]).verdict == Verdict.AUTH_RUNTIME


def test_worst_case_aggregation_across_operations():
    edges = {"t": {"a", "u"}, "a": {"s1"}, "s1": set(), "u": set()}
    edge_sites = {
        ("t", "a"): [("srv.py", 10, 0)],
        ("t", "u"): [("srv.py", 11, 0)],
        ("a", "s1"): [("srv.py", 20, 0)],
    }
    ctx = make_context(edges, edge_sites, {f: ({"TOKEN"} if f == "u" else set()) for f in edges})
    op_one = op_at("s1", 40, ["t", "a", "s1"])
    op_two = op_at("u", 50, ["t", "u"])
    startup = guard("mod.py::<module>", 1, False, CheckTiming.STARTUP_ONCE, state=("TOKEN",))
    dominating = guard("a", 19, True, CheckTiming.PER_INVOCATION, dominated={("srv.py", 20, 0)})
    # op_one is Secure (dominated on its only path); op_two's path never meets the
    # per-invocation guard and only consumes the startup credential: AuthCache.
    # Worst-case aggregation (AuthNone > AuthCache > AuthRuntime > Secure) picks AuthCache.
    classification = classify_tool(make_entry(), ctx, [startup, dominating], [op_one, op_two])
    assert classification.verdict == Verdict.AUTH_CACHE
    assert len(classification.unguarded_operations) == 1
    assert classification.unguarded_operations[0].location.line == 50


def test_inconsistent_input_rejected():
    ctx = make_context({"t": set()}, {}, {"t": set()})
    foreign = guard("elsewhere.py::ghost", 3, False, CheckTiming.PER_INVOCATION)
    with pytest.raises(InconsistentInput):
        classify_tool(make_entry(), ctx, [foreign], [op_at("t", 5, ["t"])])
    with pytest.raises(InconsistentInput):
        classify_tool(make_entry(), ctx, [], [op_at("t", 5, ["t", "ghost"])])


def random_scenario(rng: random.Random):
    fn_count = rng.randint(0, 3)
    fns = ["t"] + [f"f{i}" for i in range(fn_count)]
    edges: dict[str, set[str]] = {f: set() for f in fns}
    edge_sites: dict = {}
    line = 100
    for i, u in enumerate(fns):
        for v in fns[i + 1 :]:
            if rng.random() < 0.6:
                edges[u].add(v)
                edge_sites[(u, v)] = [("srv.py", line, 0)]
                line += 1

    def reachable(start):
        seen, stack = {start}, [start]
        while stack:
            for nxt in edges[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    related = reachable("t")
    ops = []
    for _ in range(rng.randint(1, 3)):
        fn = rng.choice(sorted(related))
        via = ["t"] if fn == "t" else ["t", fn]
        ops.append(op_at(fn, line, via))
        line += 1
    site_pool = [op.location.key() for op in ops] + [s for sites in edge_sites.values() for s in sites]
    checks = []
    for _ in range(rng.randint(0, 4)):
        fn = rng.choice(sorted(related))
        timing = rng.choice([CheckTiming.PER_INVOCATION, CheckTiming.STARTUP_ONCE])
        dominated = {s for s in site_pool if rng.random() < 0.5}
        checks.append(
            guard(
                fn,
                line,
                rng.random() < 0.5,
                timing,
                dominated=dominated,
                state=("TOKEN",) if rng.random() < 0.7 else (),
            )
        )
        line += 1
    referenced = {f: ({"TOKEN"} if rng.random() < 0.6 else set()) for f in fns}
    ctx = ToolContext(
        tool=make_entry(),
        related_functions=related,
        call_edges={f: edges[f] & related for f in related},
        edge_sites=edge_sites,
        referenced_names=referenced,
    )
    return ctx, checks, [op for op in ops if op.via_path[-1] in related]


def test_removing_a_check_never_improves_verdict():
    rng = random.Random(7)
    trials = 0
    while trials < 200:
        ctx, checks, ops = random_scenario(rng)
        if not checks or not ops:
            continue
        trials += 1
        before = classify_tool(make_entry(), ctx, checks, ops).verdict
        victim = rng.randrange(len(checks))
        reduced = checks[:victim] + checks[victim + 1 :]
        after = classify_tool(make_entry(), ctx, reduced, ops).verdict
        assert SEVERITY[after] <= SEVERITY[before], (before, after)
