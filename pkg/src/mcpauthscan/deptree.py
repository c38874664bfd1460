"""Value-origin reconstruction: dependency trees and per-tool contexts.

For every assignment or call, a tree explains where the value ultimately
comes from (parameters, literals, globals, object fields, call results,
environment or file reads). Trees whose sources trace back to a tool
handler's parameters are flagged input-dependent; the trace crosses
function boundaries through the argument-to-parameter mapping of each
resolved call site, iterated to a fixpoint.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .callgraph import CallGraph, bfs_reachable, resolve_call_target
from .model import (
    CallSite,
    Diagnostic,
    FunctionDef,
    NormExpr,
    ProgramModel,
    SourceLocation,
    Statement,
    StatementKind,
)

ENV_READ_CALLEES = {"os.getenv", "os.environ.get", "*.environ.get", "environ.get"}
FILE_OPEN_CALLEES = {"open", "io.open"}
FILE_READ_TAILS = {"read_text", "read_bytes"}
STREAM_READ_TAILS = {"read", "readline", "readlines"}
CONTAINER_CALLEES = {
    "list", "dict", "set", "tuple", "frozenset", "sorted", "reversed",
    "List", "Dict", "Set", "Tuple", "Optional",
    "typing.List", "typing.Dict", "typing.Optional", "collections.OrderedDict",
}
ITERATION_CALLEES = {"map", "filter"}


class LeafKind(str, Enum):
    PARAMETER = "Parameter"
    LITERAL = "Literal"
    GLOBAL_VARIABLE = "GlobalVariable"
    OBJECT_FIELD = "ObjectField"
    CALL_RESULT = "CallResult"
    CALLBACK_PARAMETER = "CallbackParameter"
    LOOP_VARIABLE = "LoopVariable"
    ENV_READ = "EnvRead"
    FILE_READ = "FileRead"
    UNRESOLVED = "Unresolved"


class OriginFlag(str, Enum):
    INPUT_DEPENDENT = "InputDependent"
    INTERNAL_OR_STATIC = "InternalOrStatic"


@dataclass
class DependencyTree:
    """One node: ``root`` is the explained expression text.

    ``leaf_kind`` classifies source nodes; plain structural nodes carry
    None. Source nodes for loop variables and callback parameters may keep
    a child tree describing where the iterated / passed value comes from.
    """

    root: str
    children: list["DependencyTree"] = field(default_factory=list)
    leaf_kind: Optional[LeafKind] = None
    origin_flag: Optional[OriginFlag] = None
    source_param: Optional[tuple[str, str]] = None
    location: Optional[SourceLocation] = None

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    def leaves(self) -> list["DependencyTree"]:
        return [node for node in self.walk() if not node.children]

    def parameter_sources(self) -> list[tuple[str, str]]:
        return [
            node.source_param
            for node in self.walk()
            if node.source_param is not None
            and node.leaf_kind in (LeafKind.PARAMETER, LeafKind.CALLBACK_PARAMETER)
        ]


@dataclass
class ToolContext:
    """Per-tool slice of the program: reachable functions plus value chains.

    ``edge_sites`` maps a (caller, callee) edge to the location keys of the
    call sites realizing it; ``referenced_names`` caches the identifiers
    each related function mentions (used for cached-state consumption).
    """

    tool: object
    related_functions: set[str]
    chains: list[tuple[DependencyTree, OriginFlag]] = field(default_factory=list)
    call_edges: dict[str, set[str]] = field(default_factory=dict)
    param_taint: dict[tuple[str, str], bool] = field(default_factory=dict)
    edge_sites: dict[tuple[str, str], list[tuple[str, int, int]]] = field(default_factory=dict)
    referenced_names: dict[str, set[str]] = field(default_factory=dict)
    site_targets: dict[tuple[str, int, int], Optional[str]] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)


@dataclass
class ContextMap:
    entries: dict[tuple[str, str], ToolContext] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def for_tool(self, tool) -> Optional[ToolContext]:
        return self.entries.get((tool.tool_name, tool.handler))

    def contexts(self) -> list[ToolContext]:
        return list(self.entries.values())


def extract_dependency_tree(op: Statement, model: ProgramModel) -> DependencyTree:
    """Dependency tree for an assignment or call statement.

    The provisional origin flag treats the enclosing function as the
    handler; construct_context_map re-evaluates flags against the actual
    tool through the interprocedural parameter map.
    """
    builder = _TreeBuilder(model, model.function(op.enclosing_function), op.location.file)
    tree = builder.build_statement(op)
    tree.origin_flag = origin_of(tree, None)
    return tree


def origin_of(tree: DependencyTree, taint: Optional[dict[tuple[str, str], bool]]) -> OriginFlag:
    """Input-dependent iff a parameter/callback-parameter source traces to the handler."""
    for source in tree.parameter_sources():
        if taint is None or taint.get(source, False):
            return OriginFlag.INPUT_DEPENDENT
    return OriginFlag.INTERNAL_OR_STATIC


class _TreeBuilder:
    def __init__(self, model: ProgramModel, enclosing: Optional[FunctionDef], path: str):
        self.model = model
        self.fn = enclosing
        self.path = path
        self.params = set(enclosing.parameter_names()) if enclosing else set()
        self.assignments: dict[str, list[tuple[int, NormExpr]]] = {}
        self.loop_bindings: dict[str, tuple[int, NormExpr]] = {}
        self.with_bindings: dict[str, tuple[int, NormExpr]] = {}
        if enclosing is not None:
            for stmt in enclosing.statements():
                self._index_statement(stmt)
        self.module_names = {
            t for s in model.module_statements_in_file(path) if s.kind == StatementKind.ASSIGNMENT for t in s.targets
        }

    def _index_statement(self, stmt: Statement) -> None:
        if stmt.kind == StatementKind.ASSIGNMENT and stmt.expression is not None:
            for target in stmt.targets:
                if target.isidentifier():
                    self.assignments.setdefault(target, []).append((stmt.location.line, stmt.expression))
        elif stmt.kind == StatementKind.LOOP and stmt.expression is not None:
            for target in stmt.targets:
                self.loop_bindings[target] = (stmt.location.line, stmt.expression)
        elif stmt.kind == StatementKind.WITH and stmt.expression is not None:
            for target in stmt.targets:
                if target.isidentifier():
                    self.with_bindings[target] = (stmt.location.line, stmt.expression)

    # -- public -------------------------------------------------------------

    def build_statement(self, op: Statement) -> DependencyTree:
        if op.expression is None:
            return DependencyTree(root=" ".join(op.targets) or "<empty>", leaf_kind=LeafKind.LITERAL)
        return self.build(op.expression, before_line=op.location.line + 1, active=frozenset(), bindings={})

    def build_call_arguments(self, site: CallSite) -> list[DependencyTree]:
        before = site.location.line + 1
        trees = [self.build(a, before, frozenset(), {}) for a in site.arguments]
        trees.extend(self.build(v, before, frozenset(), {}) for v in site.keyword_arguments.values())
        return trees

    # -- recursive construction ----------------------------------------------

    def build(
        self,
        expr: NormExpr,
        before_line: int,
        active: frozenset,
        bindings: dict[str, DependencyTree],
    ) -> DependencyTree:
        kind = expr.kind
        if kind == "const":
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.LITERAL, location=expr.location)
        if kind == "name":
            return self._resolve_name(expr.name or expr.text, expr, before_line, active, bindings)
        if kind == "attr":
            return self._resolve_attr(expr, before_line, active, bindings)
        if kind == "call":
            return self._resolve_call(expr, before_line, active, bindings)
        if kind == "lambda":
            inner = dict(bindings)
            for param in expr.params:
                inner[param] = DependencyTree(
                    root=param, leaf_kind=LeafKind.CALLBACK_PARAMETER, location=expr.location
                )
            children = [self.build(c, before_line, active, inner) for c in expr.children]
            return DependencyTree(root=expr.text, children=children, location=expr.location)
        if kind == "comprehension":
            inner = dict(bindings)
            iter_exprs = expr.children[1:] if len(expr.children) > 1 else []
            iter_tree = (
                self.build(iter_exprs[0], before_line, active, bindings) if iter_exprs else None
            )
            for param in expr.params:
                loop_node = DependencyTree(
                    root=param, leaf_kind=LeafKind.LOOP_VARIABLE, location=expr.location
                )
                if iter_tree is not None:
                    loop_node.children = [iter_tree]
                inner[param] = loop_node
            body = self.build(expr.children[0], before_line, active, inner) if expr.children else None
            children = [body] if body is not None else []
            return DependencyTree(root=expr.text, children=children, location=expr.location)
        if kind == "subscript":
            resolved = self.model.canonical_callee(self.path, expr.name or "")
            if resolved == "os.environ":
                return DependencyTree(root=expr.text, leaf_kind=LeafKind.ENV_READ, location=expr.location)
            children = [self.build(c, before_line, active, bindings) for c in expr.children]
            return DependencyTree(root=expr.text, children=children, location=expr.location)
        if kind in ("container", "op", "other"):
            children = [self.build(c, before_line, active, bindings) for c in expr.children]
            if not children:
                leaf = LeafKind.LITERAL if kind == "container" else LeafKind.UNRESOLVED
                if kind == "other" and not expr.children:
                    leaf = LeafKind.UNRESOLVED
                return DependencyTree(root=expr.text, leaf_kind=leaf, location=expr.location)
            return DependencyTree(root=expr.text, children=children, location=expr.location)
        return DependencyTree(root=expr.text, leaf_kind=LeafKind.UNRESOLVED, location=expr.location)

    def _resolve_name(
        self,
        name: str,
        expr: NormExpr,
        before_line: int,
        active: frozenset,
        bindings: dict[str, DependencyTree],
    ) -> DependencyTree:
        if name in bindings:
            bound = bindings[name]
            return DependencyTree(
                root=expr.text,
                children=list(bound.children),
                leaf_kind=bound.leaf_kind,
                source_param=bound.source_param,
                location=expr.location,
            )
        if name in active:
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.UNRESOLVED, location=expr.location)
        if self.fn is not None and name in self.params:
            return DependencyTree(
                root=expr.text,
                leaf_kind=LeafKind.PARAMETER,
                source_param=(self.fn.qualified_name, name),
                location=expr.location,
            )
        if name in self.loop_bindings:
            bound_line, iterable = self.loop_bindings[name]
            child = self.build(iterable, bound_line, active | {name}, bindings)
            return DependencyTree(
                root=expr.text, children=[child], leaf_kind=LeafKind.LOOP_VARIABLE, location=expr.location
            )
        if name in self.with_bindings:
            bound_line, ctx = self.with_bindings[name]
            return self.build(ctx, bound_line, active | {name}, bindings)
        assigned = [entry for entry in self.assignments.get(name, ()) if entry[0] < before_line]
        if assigned:
            line, rhs = assigned[-1]
            return self.build(rhs, line, active | {name}, bindings)
        if name in self.module_names:
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.GLOBAL_VARIABLE, location=expr.location)
        # identifier-as-function / imported binding: a static module-level name
        if self.model.function(f"{self.path}::{name}") is not None or name in self.model.import_map(self.path):
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.GLOBAL_VARIABLE, location=expr.location)
        return DependencyTree(root=expr.text, leaf_kind=LeafKind.UNRESOLVED, location=expr.location)

    def _resolve_attr(
        self, expr: NormExpr, before_line: int, active: frozenset, bindings: dict[str, DependencyTree]
    ) -> DependencyTree:
        dotted = expr.name or ""
        if dotted.startswith(("self.", "cls.")):
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.OBJECT_FIELD, location=expr.location)
        if dotted.startswith("*."):
            base = self.build(expr.children[0], before_line, active, bindings) if expr.children else None
            children = [base] if base is not None else []
            if children:
                return DependencyTree(root=expr.text, children=children, location=expr.location)
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.UNRESOLVED, location=expr.location)
        canonical = self.model.canonical_callee(self.path, dotted)
        if canonical == "os.environ":
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.ENV_READ, location=expr.location)
        head = dotted.split(".")[0]
        base_tree = self._resolve_name(head, expr, before_line, active, bindings)
        if base_tree.leaf_kind in (LeafKind.PARAMETER, LeafKind.CALLBACK_PARAMETER, LeafKind.LOOP_VARIABLE):
            return base_tree  # field access on traced data keeps the source
        if base_tree.leaf_kind == LeafKind.GLOBAL_VARIABLE:
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.GLOBAL_VARIABLE, location=expr.location)
        if base_tree.leaf_kind == LeafKind.UNRESOLVED and not base_tree.children:
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.UNRESOLVED, location=expr.location)
        return base_tree

    def _resolve_call(
        self, expr: NormExpr, before_line: int, active: frozenset, bindings: dict[str, DependencyTree]
    ) -> DependencyTree:
        callee = expr.name or ""
        canonical = self.model.canonical_callee(self.path, callee)
        tail = canonical.rsplit(".", 1)[-1]
        if canonical in ENV_READ_CALLEES or canonical.endswith(".environ.get"):
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.ENV_READ, location=expr.location)
        if canonical in FILE_OPEN_CALLEES or tail in FILE_READ_TAILS:
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.FILE_READ, location=expr.location)
        if tail in STREAM_READ_TAILS and expr.children:
            base = self.build(expr.children[0], before_line, active, bindings)
            if any(node.leaf_kind == LeafKind.FILE_READ for node in base.walk()):
                return DependencyTree(root=expr.text, leaf_kind=LeafKind.FILE_READ, location=expr.location)
        if canonical in CONTAINER_CALLEES:
            children = [self.build(a, before_line, active, bindings) for a in expr.args]
            children.extend(self.build(v, before_line, active, bindings) for v in expr.kwargs.values())
            if not children:
                return DependencyTree(root=expr.text, leaf_kind=LeafKind.LITERAL, location=expr.location)
            return DependencyTree(root=expr.text, children=children, location=expr.location)
        if canonical in ITERATION_CALLEES and len(expr.args) >= 2 and expr.args[0].kind == "lambda":
            iterable_tree = self.build(expr.args[1], before_line, active, bindings)
            inner = dict(bindings)
            for param in expr.args[0].params:
                inner[param] = DependencyTree(
                    root=param,
                    leaf_kind=LeafKind.CALLBACK_PARAMETER,
                    children=[iterable_tree],
                    location=expr.args[0].location,
                )
            body = [self.build(c, before_line, active, inner) for c in expr.args[0].children]
            return DependencyTree(root=expr.text, children=body or [iterable_tree], location=expr.location)
        children = [self.build(base, before_line, active, bindings) for base in expr.children]
        if "." in callee and not callee.startswith("*."):
            # a method call's receiver is itself a data source (params.get(...))
            head = callee.split(".")[0]
            if head not in ("self", "cls") and head not in self.model.import_map(self.path):
                receiver = self._resolve_name(head, expr, before_line, active, bindings)
                if receiver.leaf_kind != LeafKind.UNRESOLVED or receiver.children:
                    children.append(receiver)
        children.extend(self.build(a, before_line, active, bindings) for a in expr.args)
        children.extend(self.build(v, before_line, active, bindings) for v in expr.kwargs.values())
        if not children:
            return DependencyTree(root=expr.text, leaf_kind=LeafKind.CALL_RESULT, location=expr.location)
        return DependencyTree(
            root=expr.text, children=children, leaf_kind=LeafKind.CALL_RESULT, location=expr.location
        )


def construct_context_map(model: ProgramModel, tools: list, graph: CallGraph) -> ContextMap:
    """Per tool: reachable functions, then dependency chains flagged by input origin."""
    context_map = ContextMap()
    for tool in tools:
        key = (tool.tool_name, tool.handler)
        if tool.handler not in graph.nodes:
            ctx = ToolContext(tool=tool, related_functions=set())
            ctx.diagnostics.append(
                Diagnostic(kind="UnknownHandler", message=f"handler {tool.handler} not in call graph")
            )
            context_map.entries[key] = ctx
            continue
        related, truncated = bfs_reachable(tool.handler, graph.forward_edges)
        ctx = ToolContext(tool=tool, related_functions=related)
        if truncated:
            ctx.diagnostics.append(
                Diagnostic(kind="DepthCap", message=f"reachability truncated at {tool.handler}")
            )
        ctx.call_edges = {fn: set(graph.callees(fn)) & related for fn in related}
        ctx.param_taint = _parameter_taint(model, tool.handler, related)
        for fn_name in related:
            for site in model.call_sites_in(fn_name):
                target = resolve_call_target(model, site)
                ctx.site_targets[site.location.key()] = target
                if target in related:
                    ctx.edge_sites.setdefault((fn_name, target), []).append(site.location.key())
            fn = model.function(fn_name)
            names: set[str] = set()
            if fn is not None:
                for stmt in fn.statements():
                    if stmt.expression is not None:
                        names.update(stmt.expression.referenced_names())
                    for target in stmt.targets:
                        head = target.split(".")[0].split("[")[0].strip()
                        if head.isidentifier():
                            names.add(head)
            ctx.referenced_names[fn_name] = names
        for fn_name in sorted(related):
            fn = model.function(fn_name)
            if fn is None:
                continue
            builder = _TreeBuilder(model, fn, fn.file)
            for stmt in fn.statements():
                if stmt.kind not in (StatementKind.ASSIGNMENT, StatementKind.CALL):
                    continue
                tree = builder.build_statement(stmt)
                flag = origin_of(tree, ctx.param_taint)
                tree.origin_flag = flag
                ctx.chains.append((tree, flag))
        context_map.entries[key] = ctx
    return context_map


def _parameter_taint(model: ProgramModel, handler: str, related: set[str]) -> dict[tuple[str, str], bool]:
    """Least fixpoint of parameter reachability from the handler's inputs."""
    taint: dict[tuple[str, str], bool] = {}
    for fn_name in related:
        fn = model.function(fn_name)
        if fn is None:
            continue
        for param in fn.parameter_names():
            taint[(fn_name, param)] = fn_name == handler
    sites: list[tuple[CallSite, str]] = []
    builders: dict[str, _TreeBuilder] = {}
    for fn_name in related:
        for site in model.call_sites_in(fn_name):
            target = resolve_call_target(model, site)
            if target in related:
                sites.append((site, target))
                if fn_name not in builders:
                    builders[fn_name] = _TreeBuilder(model, model.function(fn_name), site.location.file)
    changed = True
    while changed:
        changed = False
        for site, target in sites:
            callee = model.function(target)
            if callee is None:
                continue
            builder = builders[site.enclosing_function]
            for param, arg in _map_arguments(callee, site):
                if taint.get((target, param), False):
                    continue
                tree = builder.build(arg, site.location.line + 1, frozenset(), {})
                if origin_of(tree, taint) == OriginFlag.INPUT_DEPENDENT:
                    taint[(target, param)] = True
                    changed = True
    return taint


def _map_arguments(callee: FunctionDef, site: CallSite) -> list[tuple[str, NormExpr]]:
    """Positional + keyword argument to parameter name mapping."""
    names = callee.parameter_names()
    if names and names[0] in ("self", "cls") and "." in site.callee_expression:
        names = names[1:]
    mapped = list(zip(names, site.arguments))
    for key, value in site.keyword_arguments.items():
        if key in callee.parameter_names():
            mapped.append((key, value))
    return mapped


def call_input_dependent(site: CallSite, model: ProgramModel, ctx: ToolContext) -> bool:
    """Whether any argument of this call carries handler-input data."""
    builder = _TreeBuilder(model, model.function(site.enclosing_function), site.location.file)
    for tree in builder.build_call_arguments(site):
        if origin_of(tree, ctx.param_taint) == OriginFlag.INPUT_DEPENDENT:
            return True
    return False
