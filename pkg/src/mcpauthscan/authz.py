"""Authorization-check detection and per-tool classification.

Checks are found in three shapes: conditional guards over credential or
identity data, credential acquisition sites (environment and file reads,
login-style calls) with their timing, and raise-on-failure validator
helpers whose guard lifts to their call sites. Classification then walks
every handler-to-operation path: a tool is Secure only when each path is
dominated by a per-invocation, caller-bound check; cached startup state
alone yields AuthCache; per-invocation checks that are unbound or do not
cover every path yield AuthRuntime; no relevant check yields AuthNone.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional

from .deptree import ToolContext
from .errors import InconsistentInput
from .model import (
    MODULE_SCOPE,
    FunctionDef,
    NormExpr,
    ProgramModel,
    SourceLocation,
    Statement,
    StatementKind,
)
from .sensitive import SensitiveOperation
from .toolentries import ToolEntry

CREDENTIAL_MARKERS = (
    "token", "key", "secret", "cred", "credential", "password", "passwd",
    "auth", "authorization", "authenticated", "login", "logged", "oauth",
    "bearer", "api_key", "apikey", "cookie", "session", "permission",
)
INIT_FUNCTION_NAMES = re.compile(
    r"^(__init__|__post_init__|initialize|init|setup|login|connect|authenticate|configure|mcp_initialize)$"
)
ACQUISITION_CALL_PATTERN = re.compile(r"(login|authenticate|authorize|oauth)", re.IGNORECASE)
MAX_PATHS_PER_OP = 200


class AuthForm(str, Enum):
    OAUTH = "OAuth"
    BEARER_TOKEN = "BearerToken"
    API_KEY = "ApiKey"
    USERNAME_PASSWORD = "UsernamePassword"
    CACHED_CREDENTIAL = "CachedCredential"
    SESSION_CHECK = "SessionCheck"
    OTHER = "Other"


class CheckTiming(str, Enum):
    STARTUP_ONCE = "StartupOnce"
    PER_INVOCATION = "PerInvocation"


class Verdict(str, Enum):
    SECURE = "Secure"
    AUTH_NONE = "AuthNone"
    AUTH_CACHE = "AuthCache"
    AUTH_RUNTIME = "AuthRuntime"
    NO_SENSITIVE_OPS = "NoSensitiveOps"


# severity lattice: lower value = worse; aggregation takes the minimum
SEVERITY = {Verdict.AUTH_NONE: 0, Verdict.AUTH_CACHE: 1, Verdict.AUTH_RUNTIME: 2, Verdict.SECURE: 3}


@dataclass
class AuthCheck:
    form: AuthForm
    timing: CheckTiming
    caller_bound: bool
    guard_location: SourceLocation
    guarded_functions: set[str]
    evidence: str
    function: str = ""
    state_vars: tuple[str, ...] = ()
    dominated_sites: set[tuple[str, int, int]] = field(default_factory=set)
    raises_on_failure: bool = False

    def to_dict(self) -> dict:
        return {
            "form": self.form.value,
            "timing": self.timing.value,
            "caller_bound": self.caller_bound,
            "file": self.guard_location.file,
            "line": self.guard_location.line,
            "guarded_functions": sorted(self.guarded_functions),
            "evidence": self.evidence,
        }


@dataclass
class Classification:
    tool: ToolEntry
    verdict: Verdict
    supporting_checks: list[AuthCheck]
    unguarded_operations: list[SensitiveOperation]
    rationale: str
    unconfirmed: bool = False

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "unconfirmed": self.unconfirmed,
            "rationale": self.rationale,
            "supporting_checks": [c.to_dict() for c in self.supporting_checks],
            "unguarded_operations": [op.to_dict() for op in self.unguarded_operations],
        }


# -- lexicons -----------------------------------------------------------------


def default_lexicon_path() -> Path:
    return Path(str(resources.files("mcpauthscan").joinpath("data/identity_lexicon.txt")))


def load_identity_lexicon(path: Optional[str] = None) -> tuple[str, ...]:
    lexicon_path = Path(path) if path else default_lexicon_path()
    terms = []
    for line in lexicon_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.append(line.lower())
    return tuple(terms)


def _tokens(identifier: str) -> list[str]:
    spaced = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", "_", identifier)
    return [t for t in spaced.lower().replace(".", "_").split("_") if t]


def matches_term(identifier: str, term: str) -> bool:
    if "_" in term:
        return term in identifier.lower()
    tokens = _tokens(identifier)
    return any(tok == term or (len(term) >= 4 and tok.startswith(term)) for tok in tokens)


def _matches_any(identifier: str, terms: tuple[str, ...]) -> bool:
    return any(matches_term(identifier, term) for term in terms)


# -- check detection ----------------------------------------------------------


def detect_auth_checks(
    context: ToolContext,
    model: ProgramModel,
    identity_lexicon: Optional[tuple[str, ...]] = None,
) -> list[AuthCheck]:
    """Authorization checks observable from this tool's execution context."""
    lexicon = identity_lexicon if identity_lexicon is not None else load_identity_lexicon()
    checks: list[AuthCheck] = []
    seen_keys: set[tuple] = set()

    scan_functions = _scan_set(context, model)
    for fn in scan_functions:
        timing = _function_timing(fn, context)
        for guard in _find_guards(fn.body, fn, lexicon):
            guard.timing = timing
            guard.guarded_functions = _guarded_closure(guard, context, model)
            _dedup_add(checks, seen_keys, guard)
        for check in _find_acquisitions(fn.body, fn, model, timing):
            _dedup_add(checks, seen_keys, check)

    for check in _module_scope_checks(context, model, lexicon):
        _dedup_add(checks, seen_keys, check)

    checks.extend(_lift_validator_guards(checks, context, model))
    checks.sort(key=lambda c: (c.guard_location.file, c.guard_location.line, c.guard_location.column))
    return checks


def _dedup_add(checks: list[AuthCheck], seen: set, check: AuthCheck) -> None:
    key = (check.guard_location.key(), check.form, check.timing)
    if key not in seen:
        seen.add(key)
        checks.append(check)


def _scan_set(context: ToolContext, model: ProgramModel) -> list[FunctionDef]:
    """Related functions plus initialization-only functions anywhere.

    Startup-time checks found outside the related set only become relevant
    when their stored state is consumed on a path, so the wide scan does
    not cost precision.
    """
    functions = []
    for name in sorted(context.related_functions):
        fn = model.function(name)
        if fn is not None:
            functions.append(fn)
    for fn in model.functions:
        if fn.qualified_name in context.related_functions:
            continue
        if INIT_FUNCTION_NAMES.match(fn.name):
            functions.append(fn)
    return functions


def _function_timing(fn: FunctionDef, context: ToolContext) -> CheckTiming:
    if fn.qualified_name in context.related_functions:
        return CheckTiming.PER_INVOCATION
    if INIT_FUNCTION_NAMES.match(fn.name):
        return CheckTiming.STARTUP_ONCE
    return CheckTiming.PER_INVOCATION


def _find_guards(
    body: list[Statement], fn: Optional[FunctionDef], lexicon: tuple[str, ...]
) -> list[AuthCheck]:
    guards = []
    for block in _blocks(body):
        for index, stmt in enumerate(block):
            if stmt.kind != StatementKind.CONDITIONAL or stmt.expression is None:
                continue
            names = stmt.predicate_names()
            credentialish = [n for n in names if _matches_any(n, CREDENTIAL_MARKERS)]
            identity = [n for n in names if _matches_any(n, lexicon)]
            membership = _is_membership_test(stmt.expression)
            if not credentialish and not identity:
                continue
            dominated = _dominated_statements(block, index, stmt)
            enclosing = fn.qualified_name if fn is not None else stmt.enclosing_function
            state_vars = _written_after(block, index)
            raises = any(
                s.kind in (StatementKind.RAISE, StatementKind.RETURN)
                for s in list(stmt.children) + list(stmt.orelse)
            )
            guards.append(
                AuthCheck(
                    form=_guard_form(names, membership, bool(identity)),
                    timing=CheckTiming.PER_INVOCATION,
                    caller_bound=bool(identity),
                    guard_location=stmt.expression.location,
                    guarded_functions=set(),
                    evidence=stmt.expression.text,
                    function=enclosing,
                    state_vars=state_vars,
                    dominated_sites=_site_keys(dominated),
                    raises_on_failure=raises,
                )
            )
    return guards


def _guard_form(names: tuple[str, ...], membership: bool, identity: bool) -> AuthForm:
    joined = " ".join(names).lower()
    if membership and identity:
        return AuthForm.SESSION_CHECK
    if "oauth" in joined:
        return AuthForm.OAUTH
    if "bearer" in joined:
        return AuthForm.BEARER_TOKEN
    if "api_key" in joined or "apikey" in joined:
        return AuthForm.API_KEY
    if "password" in joined or "passwd" in joined:
        return AuthForm.USERNAME_PASSWORD
    if identity:
        return AuthForm.SESSION_CHECK
    if "token" in joined:
        return AuthForm.BEARER_TOKEN
    return AuthForm.OTHER


def _is_membership_test(expr: NormExpr) -> bool:
    for node in expr.walk():
        if node.kind == "op" and node.params and any(op in ("In", "NotIn") for op in node.params[0].split()):
            return True
    return False


def _blocks(body: list[Statement]):
    yield body
    for stmt in body:
        if stmt.children:
            yield from _blocks(stmt.children)
        if stmt.orelse:
            yield from _blocks(stmt.orelse)


def _dominated_statements(block: list[Statement], index: int, guard: Statement) -> list[Statement]:
    children_terminal = any(s.kind in (StatementKind.RAISE, StatementKind.RETURN) for s in guard.children)
    orelse_terminal = any(s.kind in (StatementKind.RAISE, StatementKind.RETURN) for s in guard.orelse)
    rest = block[index + 1 :]
    if children_terminal and not orelse_terminal:
        return rest + guard.orelse
    if orelse_terminal and not children_terminal:
        return list(guard.children) + rest
    if children_terminal and orelse_terminal:
        return rest
    return list(guard.children)


def _site_keys(statements: list[Statement]) -> set[tuple[str, int, int]]:
    keys: set[tuple[str, int, int]] = set()
    for stmt in statements:
        for sub in stmt.walk():
            keys.add(sub.location.key())
            if sub.expression is not None:
                for node in sub.expression.walk():
                    if node.kind == "call":
                        keys.add(node.location.key())
    return keys


def _written_after(block: list[Statement], index: int) -> tuple[str, ...]:
    names: list[str] = []
    for stmt in block[index:]:
        for sub in stmt.walk():
            if sub.kind == StatementKind.ASSIGNMENT:
                for target in sub.targets:
                    head = re.split(r"[.\[]", target, 1)[0].strip()
                    if head.isidentifier() and head not in names:
                        names.append(head)
    return tuple(names)


def _find_acquisitions(
    body: list[Statement], fn: Optional[FunctionDef], model: ProgramModel, timing: CheckTiming
) -> list[AuthCheck]:
    checks = []
    for stmt in _walk_all(body):
        if stmt.kind == StatementKind.ASSIGNMENT and stmt.expression is not None:
            if not _has_direct_read(stmt.expression, model, stmt.location.file):
                continue
            credentialish = any(_matches_any(t, CREDENTIAL_MARKERS) for t in stmt.targets) or _matches_any(
                stmt.expression.text, CREDENTIAL_MARKERS
            )
            if not credentialish:
                continue
            heads = tuple(re.split(r"[.\[]", t, 1)[0].strip() for t in stmt.targets)
            checks.append(
                AuthCheck(
                    form=_acquisition_form(stmt),
                    timing=timing,
                    caller_bound=False,
                    guard_location=stmt.location,
                    guarded_functions=set(),
                    evidence=f"{', '.join(stmt.targets)} = {stmt.expression.text}",
                    function=stmt.enclosing_function,
                    state_vars=heads,
                )
            )
        elif stmt.kind in (StatementKind.CALL, StatementKind.ASSIGNMENT) and stmt.expression is not None:
            callee = stmt.expression.name or ""
            if stmt.expression.kind == "call" and ACQUISITION_CALL_PATTERN.search(callee):
                heads = tuple(re.split(r"[.\[]", t, 1)[0].strip() for t in stmt.targets)
                checks.append(
                    AuthCheck(
                        form=AuthForm.OAUTH if "oauth" in callee.lower() else AuthForm.USERNAME_PASSWORD,
                        timing=timing,
                        caller_bound=False,
                        guard_location=stmt.location,
                        guarded_functions=set(),
                        evidence=stmt.expression.text,
                        function=stmt.enclosing_function,
                        state_vars=heads,
                    )
                )
    return checks


def _has_direct_read(expr: NormExpr, model: ProgramModel, path: str) -> bool:
    """True when the expression itself reads the environment or a file."""
    for node in expr.walk():
        if node.kind == "call" and node.name:
            canonical = model.canonical_callee(path, node.name)
            if canonical in ("os.getenv", "os.environ.get", "open", "io.open"):
                return True
            if canonical.endswith((".environ.get", ".read_text", ".read_bytes")):
                return True
        if node.kind in ("subscript", "attr") and node.name:
            if model.canonical_callee(path, node.name) == "os.environ":
                return True
    return False


def _acquisition_form(stmt: Statement) -> AuthForm:
    text = " ".join(stmt.targets) + " " + (stmt.expression.text if stmt.expression else "")
    lowered = text.lower()
    if "oauth" in lowered:
        return AuthForm.OAUTH
    if "api_key" in lowered or "apikey" in lowered:
        return AuthForm.API_KEY
    if "password" in lowered or "passwd" in lowered:
        return AuthForm.USERNAME_PASSWORD
    return AuthForm.CACHED_CREDENTIAL


def _walk_all(body: list[Statement]):
    for stmt in body:
        yield from stmt.walk()


def _module_scope_checks(
    context: ToolContext, model: ProgramModel, lexicon: tuple[str, ...]
) -> list[AuthCheck]:
    files = {sf.path for sf in model.source_files if sf.parsed}
    checks: list[AuthCheck] = []
    for path in sorted(files):
        statements = model.module_statements_in_file(path)
        for guard in _find_guards(statements, None, lexicon):
            guard.timing = CheckTiming.STARTUP_ONCE
            checks.append(guard)
        for check in _find_acquisitions(statements, None, model, CheckTiming.STARTUP_ONCE):
            checks.append(check)
    return checks


def _guarded_closure(guard: AuthCheck, context: ToolContext, model: ProgramModel) -> set[str]:
    """Functions control-dependent on the guard (nesting plus call graph)."""
    direct: set[str] = set()
    for fn_name in context.related_functions:
        for site in model.call_sites_in(fn_name):
            if site.location.key() in guard.dominated_sites:
                target = _edge_target(site, context, model)
                if target is not None:
                    direct.add(target)
    guarded = set(direct)
    changed = True
    while changed:
        changed = False
        for fn_name in sorted(context.related_functions - guarded):
            callers = [
                (caller, site)
                for caller in context.related_functions
                for site in model.call_sites_in(caller)
                if _edge_target(site, context, model) == fn_name
            ]
            if not callers:
                continue
            if all(
                caller in guarded or site.location.key() in guard.dominated_sites for caller, site in callers
            ):
                guarded.add(fn_name)
                changed = True
    return guarded


def _edge_target(site, context: ToolContext, model: ProgramModel) -> Optional[str]:
    key = site.location.key()
    if key in context.site_targets:
        target = context.site_targets[key]
    else:
        from .callgraph import resolve_call_target

        target = resolve_call_target(model, site)
    return target if target in context.related_functions else None


def _lift_validator_guards(
    checks: list[AuthCheck], context: ToolContext, model: ProgramModel
) -> list[AuthCheck]:
    """A helper whose body opens with a raise-on-failure guard protects its callers."""
    lifted = []
    by_function: dict[str, list[AuthCheck]] = {}
    for check in checks:
        if check.raises_on_failure and check.timing == CheckTiming.PER_INVOCATION:
            by_function.setdefault(check.function, []).append(check)
    for validator, validator_checks in by_function.items():
        fn = model.function(validator)
        if fn is None or not fn.body:
            continue
        top_guard = next(
            (c for c in validator_checks if c.guard_location.line <= fn.body[0].location.line), None
        )
        if top_guard is None:
            continue
        for caller_name in sorted(context.related_functions):
            caller = model.function(caller_name)
            if caller is None or caller_name == validator:
                continue
            for block in _blocks(caller.body):
                for index, stmt in enumerate(block):
                    if stmt.expression is None:
                        continue
                    is_call_of_validator = any(
                        node.kind == "call"
                        and _edge_target(_pseudo_site(node, stmt, caller), context, model) == validator
                        for node in stmt.expression.walk()
                    )
                    if not is_call_of_validator:
                        continue
                    dominated = _site_keys(block[index + 1 :])
                    lifted.append(
                        AuthCheck(
                            form=top_guard.form,
                            timing=CheckTiming.PER_INVOCATION,
                            caller_bound=top_guard.caller_bound,
                            guard_location=stmt.location,
                            guarded_functions=set(),
                            evidence=f"{stmt.expression.text} -> {top_guard.evidence}",
                            function=caller_name,
                            dominated_sites=dominated,
                            raises_on_failure=True,
                        )
                    )
    return lifted


def _pseudo_site(node: NormExpr, stmt: Statement, caller: FunctionDef):
    from .model import CallSite

    return CallSite(
        callee_expression=node.name or node.text,
        arguments=node.args,
        keyword_arguments=node.kwargs,
        enclosing_function=caller.qualified_name,
        location=node.location,
    )


# -- classification -----------------------------------------------------------


def classify_tool(
    entry: ToolEntry,
    context: ToolContext,
    checks: list[AuthCheck],
    sensitive: list[SensitiveOperation],
) -> Classification:
    """Decision procedure evaluated per sensitive operation, aggregated worst-case."""
    _validate_inputs(context, checks, sensitive)
    if not sensitive:
        return Classification(
            tool=entry,
            verdict=Verdict.NO_SENSITIVE_OPS,
            supporting_checks=[],
            unguarded_operations=[],
            rationale="tool reaches no sensitive operations",
        )

    op_verdicts: list[Verdict] = []
    unguarded: list[SensitiveOperation] = []
    relevant_checks: list[AuthCheck] = []
    caller_bound_present = False

    for op in sensitive:
        verdict, op_checks = _classify_operation(op, context, checks)
        op_verdicts.append(verdict)
        if verdict != Verdict.SECURE:
            unguarded.append(op)
        for check in op_checks:
            if check not in relevant_checks:
                relevant_checks.append(check)
            if check.timing == CheckTiming.PER_INVOCATION and check.caller_bound:
                caller_bound_present = True

    verdict = min(op_verdicts, key=lambda v: SEVERITY[v])
    unconfirmed = verdict == Verdict.AUTH_RUNTIME and caller_bound_present
    rationale = _rationale(verdict, sensitive, relevant_checks, unconfirmed)
    return Classification(
        tool=entry,
        verdict=verdict,
        supporting_checks=relevant_checks,
        unguarded_operations=unguarded,
        rationale=rationale,
        unconfirmed=unconfirmed,
    )


def _validate_inputs(context: ToolContext, checks: list[AuthCheck], sensitive: list[SensitiveOperation]) -> None:
    allowed = set(context.related_functions)
    allowed_files = set()
    for name in context.related_functions:
        allowed_files.add(name.split("::", 1)[0])
    for check in checks:
        fn = check.function
        if fn in allowed or fn.endswith(MODULE_SCOPE):
            continue
        if fn.split("::", 1)[0] in allowed_files:
            continue  # init-only scope in a related file
        raise InconsistentInput(f"check at {check.guard_location} references foreign function {fn}")
    for op in sensitive:
        if op.via_path and any(step not in allowed for step in op.via_path):
            raise InconsistentInput(f"operation {op.matched_api} path leaves the tool context")


def _classify_operation(
    op: SensitiveOperation,
    context: ToolContext,
    checks: list[AuthCheck],
) -> tuple[Verdict, list[AuthCheck]]:
    handler = getattr(context.tool, "handler", None)
    target = op.via_path[-1] if op.via_path else handler
    paths = _enumerate_paths(handler, target, context.call_edges)
    if not paths:
        paths = [op.via_path or [target]]

    path_functions = {fn for path in paths for fn in path}
    consumed_names = set()
    for fn in path_functions:
        consumed_names.update(context.referenced_names.get(fn, set()))
    per_invocation = [
        c for c in checks if c.timing == CheckTiming.PER_INVOCATION and c.function in path_functions
    ]
    startup = [
        c
        for c in checks
        if c.timing == CheckTiming.STARTUP_ONCE and c.state_vars and set(c.state_vars) & consumed_names
    ]
    relevant = per_invocation + startup
    if not relevant:
        return Verdict.AUTH_NONE, []

    path_verdicts = []
    for path in paths:
        path_verdicts.append(_path_verdict(path, op, per_invocation, startup, context))
    worst = min(path_verdicts, key=lambda v: SEVERITY[v])
    return worst, relevant


def _path_verdict(
    path: list[str],
    op: SensitiveOperation,
    per_invocation: list[AuthCheck],
    startup: list[AuthCheck],
    context: ToolContext,
) -> Verdict:
    if any(
        check.caller_bound and _dominates_path(check, path, op, context)
        for check in per_invocation
    ):
        return Verdict.SECURE
    if per_invocation:
        return Verdict.AUTH_RUNTIME
    if startup:
        return Verdict.AUTH_CACHE
    return Verdict.AUTH_NONE


def _dominates_path(check: AuthCheck, path: list[str], op: SensitiveOperation, context: ToolContext) -> bool:
    if check.function not in path:
        return False
    position = path.index(check.function)
    if position == len(path) - 1:
        return op.location.key() in check.dominated_sites
    next_fn = path[position + 1]
    edge_sites = context.edge_sites.get((check.function, next_fn), [])
    return bool(edge_sites) and all(site in check.dominated_sites for site in edge_sites)


def _enumerate_paths(start: Optional[str], goal: Optional[str], edges: dict[str, set[str]]) -> list[list[str]]:
    if start is None or goal is None:
        return []
    paths: list[list[str]] = []

    def dfs(node: str, path: list[str]) -> None:
        if len(paths) >= MAX_PATHS_PER_OP:
            return
        if node == goal:
            paths.append(list(path))
            return
        for succ in sorted(edges.get(node, ())):
            if succ in path:
                continue
            path.append(succ)
            dfs(succ, path)
            path.pop()

    dfs(start, [start])
    return paths


def _rationale(
    verdict: Verdict, sensitive: list[SensitiveOperation], checks: list[AuthCheck], unconfirmed: bool
) -> str:
    ops = ", ".join(sorted({op.matched_api for op in sensitive}))
    if verdict == Verdict.AUTH_NONE:
        return f"sensitive operations ({ops}) execute with no relevant authorization check"
    if verdict == Verdict.AUTH_CACHE:
        return f"only startup-time cached credentials guard {ops}; no per-invocation re-validation"
    if verdict == Verdict.AUTH_RUNTIME:
        suffix = "; enforcement unclear, flagged for dynamic validation" if unconfirmed else ""
        return f"per-invocation checks exist but are not caller-bound on every path to {ops}{suffix}"
    return f"every path to {ops} is dominated by a per-invocation, caller-bound check"
