"""Tool-entry extraction across the supported registration patterns.

Seven registration mechanisms are recognized: tool decorators, add-tool
APIs, tool-object construction, route registration keyed by operation_id,
runtime enumeration through list_tools(), register_tool APIs, and
ToolHandler subclasses. Tool names resolve by priority: decorator
argument, then an explicit name argument, then the handler's own name.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .callgraph import resolve_call_target
from .model import (
    CallSite,
    ClassRecord,
    Diagnostic,
    FunctionDef,
    NormExpr,
    ProgramModel,
    SourceLocation,
)

TOOL_DECORATOR_TAILS = {"tool", "call_tool"}
ADD_TOOL_TAILS = {"add_tool", "add_tool_handler"}
REGISTER_TAILS = {"register_tool"}
ROUTE_TAILS = {"get", "post", "put", "delete", "patch"}
HANDLER_METHOD_NAMES = ("run_tool", "run", "execute", "handle", "call", "__call__")
HANDLER_KWARGS = ("handler", "func", "fn", "callback")


class RegistrationPattern(str, Enum):
    DECORATOR_BASED = "DecoratorBased"
    ADD_TOOL_API = "AddToolApi"
    TOOL_OBJECT = "ToolObject"
    ROUTE_OPERATION_ID = "RouteOperationId"
    RUNTIME_ENUMERATION = "RuntimeEnumeration"
    REGISTER_API = "RegisterApi"
    TOOL_HANDLER_SUBCLASS = "ToolHandlerSubclass"


@dataclass
class ToolEntry:
    tool_name: str
    handler: str
    registration_pattern: RegistrationPattern
    location: SourceLocation
    description: str = ""

    def key(self) -> tuple[str, str]:
        return (self.tool_name, self.handler)

    def to_dict(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "handler": self.handler,
            "registration_pattern": self.registration_pattern.value,
            "file": self.location.file,
            "line": self.location.line,
            "description": self.description,
        }


@dataclass
class ExtractionResult:
    entries: list[ToolEntry] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)


def extract_tool_entries(model: ProgramModel) -> list[ToolEntry]:
    return extract_tool_entries_with_diagnostics(model).entries


def extract_tool_entries_with_diagnostics(model: ProgramModel) -> ExtractionResult:
    result = ExtractionResult()
    candidates: list[ToolEntry] = []
    candidates.extend(_decorator_entries(model, result))
    candidates.extend(_call_registration_entries(model, result))
    candidates.extend(_tool_object_entries(model, result))
    candidates.extend(_route_entries(model))
    candidates.extend(_subclass_entries(model, result))
    candidates.extend(_runtime_enumeration_entries(model, result))

    seen: dict[tuple[str, str], ToolEntry] = {}
    for entry in candidates:
        if model.function(entry.handler) is None:
            result.diagnostics.append(
                Diagnostic(
                    kind="UnresolvedHandler",
                    message=f"handler {entry.handler} for tool {entry.tool_name!r} is not a known function",
                    file=entry.location.file,
                    line=entry.location.line,
                )
            )
            continue
        if entry.key() in seen:
            existing = seen[entry.key()]
            if existing.registration_pattern != entry.registration_pattern:
                result.diagnostics.append(
                    Diagnostic(
                        kind="MultiplePatterns",
                        message=(
                            f"tool {entry.tool_name!r} matches {existing.registration_pattern.value} "
                            f"and {entry.registration_pattern.value}; keeping the first"
                        ),
                        file=entry.location.file,
                        line=entry.location.line,
                    )
                )
            continue
        seen[entry.key()] = entry
    result.entries = sorted(seen.values(), key=lambda e: (e.location.file, e.location.line, e.tool_name))
    return result


# -- pattern detectors --------------------------------------------------------


def _decorator_entries(model: ProgramModel, result: ExtractionResult) -> list[ToolEntry]:
    entries = []
    for fn in model.functions:
        for dec in fn.decorators:
            if dec.tail not in TOOL_DECORATOR_TAILS:
                continue
            name = _literal_str(dec.args[0]) if dec.args else None
            if name is None:
                name = _literal_kwarg(dec.kwargs, "name")
            if name is None and dec.args:
                result.diagnostics.append(
                    Diagnostic(
                        kind="Ambiguity",
                        message=f"non-literal tool name in decorator on {fn.qualified_name}",
                        file=fn.file,
                        line=dec.location.line,
                    )
                )
            entries.append(
                ToolEntry(
                    tool_name=name or fn.name,
                    handler=fn.qualified_name,
                    registration_pattern=RegistrationPattern.DECORATOR_BASED,
                    location=fn.location,
                    description=fn.docstring or "",
                )
            )
            break
    return entries


def _call_registration_entries(model: ProgramModel, result: ExtractionResult) -> list[ToolEntry]:
    entries = []
    for site in model.call_sites:
        tail = site.callee_expression.rsplit(".", 1)[-1]
        if tail in ADD_TOOL_TAILS:
            pattern = RegistrationPattern.ADD_TOOL_API
        elif tail in REGISTER_TAILS:
            pattern = RegistrationPattern.REGISTER_API
        else:
            continue
        handler = _first_function_ref(model, site)
        if handler is None:
            result.diagnostics.append(
                Diagnostic(
                    kind="UnresolvedHandler",
                    message=f"{site.callee_expression} at line {site.location.line} has no resolvable handler",
                    file=site.location.file,
                    line=site.location.line,
                )
            )
            continue
        name = _literal_kwarg(site.keyword_arguments, "name")
        fn = model.function(handler)
        entries.append(
            ToolEntry(
                tool_name=name or (fn.name if fn else handler),
                handler=handler,
                registration_pattern=pattern,
                location=site.location,
                description=(fn.docstring if fn else "") or "",
            )
        )
    return entries


def _tool_object_entries(model: ProgramModel, result: ExtractionResult) -> list[ToolEntry]:
    entries = []
    for site in model.call_sites:
        canonical = model.canonical_callee(site.location.file, site.callee_expression)
        if canonical.rsplit(".", 1)[-1] != "Tool":
            continue
        handler = _first_function_ref(model, site)
        if handler is None:
            continue  # metadata-only Tool(...) carries no executable handler
        fn = model.function(handler)
        name = _literal_kwarg(site.keyword_arguments, "name")
        ambiguous = False
        if name is None:
            for arg in site.arguments:
                literal = _literal_str(arg)
                if literal is not None:
                    name = literal
                    break
                if arg.kind != "name":
                    ambiguous = True
        if name is None and (ambiguous or _nonliteral_name_kwarg(site)):
            result.diagnostics.append(
                Diagnostic(
                    kind="Ambiguity",
                    message=f"Tool(...) at line {site.location.line} has a non-literal name",
                    file=site.location.file,
                    line=site.location.line,
                )
            )
        description = _literal_kwarg(site.keyword_arguments, "description") or (fn.docstring if fn else "") or ""
        entries.append(
            ToolEntry(
                tool_name=name or (fn.name if fn else handler),
                handler=handler,
                registration_pattern=RegistrationPattern.TOOL_OBJECT,
                location=site.location,
                description=description,
            )
        )
    return entries


def _route_entries(model: ProgramModel) -> list[ToolEntry]:
    entries = []
    for fn in model.functions:
        for dec in fn.decorators:
            if dec.tail not in ROUTE_TAILS:
                continue
            operation_id = _literal_kwarg(dec.kwargs, "operation_id")
            if operation_id is None:
                continue
            entries.append(
                ToolEntry(
                    tool_name=operation_id,
                    handler=fn.qualified_name,
                    registration_pattern=RegistrationPattern.ROUTE_OPERATION_ID,
                    location=fn.location,
                    description=fn.docstring or "",
                )
            )
            break
    return entries


def _subclass_entries(model: ProgramModel, result: ExtractionResult) -> list[ToolEntry]:
    entries = []
    for cls in model.classes:
        if not any(base.rsplit(".", 1)[-1] == "ToolHandler" for base in cls.bases):
            continue
        name_attr = cls.attributes.get("name")
        tool_name = _literal_str(name_attr) if name_attr is not None else None
        handler = None
        for method_name in HANDLER_METHOD_NAMES:
            candidate = f"{cls.qualified_name}.{method_name}"
            if model.function(candidate) is not None:
                handler = candidate
                break
        if handler is None:
            result.diagnostics.append(
                Diagnostic(
                    kind="UnresolvedHandler",
                    message=f"ToolHandler subclass {cls.name} has no recognizable handler method",
                    file=cls.file,
                    line=cls.location.line,
                )
            )
            continue
        entries.append(
            ToolEntry(
                tool_name=tool_name or cls.name,
                handler=handler,
                registration_pattern=RegistrationPattern.TOOL_HANDLER_SUBCLASS,
                location=cls.location,
                description=(model.function(handler).docstring if model.function(handler) else "") or "",
            )
        )
    return entries


def _runtime_enumeration_entries(model: ProgramModel, result: ExtractionResult) -> list[ToolEntry]:
    entries = []
    for fn in model.functions:
        is_enumerator = fn.name == "list_tools" or any(d.tail == "list_tools" for d in fn.decorators)
        if not is_enumerator:
            continue
        found_static = False
        for stmt in fn.statements():
            if stmt.kind.value != "Return" or stmt.expression is None:
                continue
            expr = stmt.expression
            if expr.kind == "container":
                found_static = True
                for element in expr.children:
                    handler = _function_ref(model, fn.file, element)
                    if handler is None:
                        continue
                    target = model.function(handler)
                    entries.append(
                        ToolEntry(
                            tool_name=target.name if target else handler,
                            handler=handler,
                            registration_pattern=RegistrationPattern.RUNTIME_ENUMERATION,
                            location=element.location,
                            description=(target.docstring if target else "") or "",
                        )
                    )
            elif expr.kind == "name":
                resolved = _resolve_module_container(model, fn.file, expr.name or "")
                if resolved is not None:
                    found_static = True
                    for element in resolved:
                        handler = _function_ref(model, fn.file, element)
                        if handler is None:
                            continue
                        target = model.function(handler)
                        entries.append(
                            ToolEntry(
                                tool_name=target.name if target else handler,
                                handler=handler,
                                registration_pattern=RegistrationPattern.RUNTIME_ENUMERATION,
                                location=element.location,
                                description=(target.docstring if target else "") or "",
                            )
                        )
        if not found_static:
            result.diagnostics.append(
                Diagnostic(
                    kind="Incompleteness",
                    message=f"{fn.qualified_name} enumerates tools dynamically; static claims are incomplete",
                    file=fn.file,
                    line=fn.location.line,
                )
            )
    return entries


def _resolve_module_container(model: ProgramModel, path: str, name: str) -> Optional[list[NormExpr]]:
    for stmt in model.module_statements_in_file(path):
        if stmt.kind.value == "Assignment" and name in stmt.targets and stmt.expression is not None:
            if stmt.expression.kind == "container":
                return stmt.expression.children
    return None


# -- helpers ------------------------------------------------------------------


def _literal_str(expr: Optional[NormExpr]) -> Optional[str]:
    if expr is None or expr.kind != "const":
        return None
    try:
        value = ast.literal_eval(expr.text)
    except (ValueError, SyntaxError):
        return None
    return value if isinstance(value, str) else None


def _literal_kwarg(kwargs: dict[str, NormExpr], key: str) -> Optional[str]:
    return _literal_str(kwargs.get(key))


def _nonliteral_name_kwarg(site: CallSite) -> bool:
    expr = site.keyword_arguments.get("name")
    return expr is not None and _literal_str(expr) is None


def _first_function_ref(model: ProgramModel, site: CallSite) -> Optional[str]:
    for arg in site.arguments:
        ref = _function_ref(model, site.location.file, arg)
        if ref is not None:
            return ref
    for key in HANDLER_KWARGS:
        if key in site.keyword_arguments:
            ref = _function_ref(model, site.location.file, site.keyword_arguments[key])
            if ref is not None:
                return ref
    return None


def _function_ref(model: ProgramModel, path: str, expr: NormExpr) -> Optional[str]:
    """Resolve a bare name or dotted reference to a project function."""
    if expr.kind not in ("name", "attr") or not expr.name or expr.name.startswith("*."):
        return None
    probe = CallSite(
        callee_expression=expr.name,
        arguments=[],
        keyword_arguments={},
        enclosing_function=model.module_scope_name(path),
        location=expr.location,
    )
    return resolve_call_target(model, probe)
