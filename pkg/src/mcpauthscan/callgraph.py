"""Call graph construction and reachability.

Caller-callee edges are resolved by name matching against qualified
names with import-alias tracking, ``self.method`` resolution, and
method-on-locally-constructed-object resolution. Calls into external
libraries produce no edge; the call site itself stays in the model for
sensitive-API matching.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import UnknownHandler
from .model import CallSite, ProgramModel

MAX_HOPS = 50


@dataclass
class CallGraph:
    nodes: set[str] = field(default_factory=set)
    forward_edges: dict[str, set[str]] = field(default_factory=dict)
    reverse_edges: dict[str, set[str]] = field(default_factory=dict)

    def add_node(self, name: str) -> None:
        self.nodes.add(name)
        self.forward_edges.setdefault(name, set())
        self.reverse_edges.setdefault(name, set())

    def add_edge(self, caller: str, callee: str) -> None:
        self.add_node(caller)
        self.add_node(callee)
        self.forward_edges[caller].add(callee)
        self.reverse_edges[callee].add(caller)

    def callees(self, name: str) -> set[str]:
        return self.forward_edges.get(name, set())

    def callers(self, name: str) -> set[str]:
        return self.reverse_edges.get(name, set())


def build_call_graph(model: ProgramModel) -> CallGraph:
    graph = CallGraph()
    for fn in model.functions:
        graph.add_node(fn.qualified_name)
    for site in model.call_sites:
        target = resolve_call_target(model, site)
        if target is not None and site.enclosing_function in graph.nodes:
            graph.add_edge(site.enclosing_function, target)
    return graph


def resolve_call_target(model: ProgramModel, site: CallSite) -> Optional[str]:
    """Qualified name of the project function a call site invokes, or None."""
    callee = site.callee_expression
    path = site.location.file
    enclosing = model.function(site.enclosing_function)

    if callee.startswith(("self.", "cls.")) and enclosing is not None and enclosing.class_name:
        scope_prefix = enclosing.qualified_name.rsplit(".", 1)[0]
        candidate = f"{scope_prefix}.{callee.split('.', 1)[1]}"
        if model.function(candidate) is not None:
            return candidate
        return None

    canonical = model.canonical_callee(path, callee)

    if "." not in canonical:
        name = canonical
        same_file = f"{path}::{name}"
        if model.function(same_file) is not None:
            return same_file
        for cls in model.classes_in_file(path):
            if cls.name == name:
                init = f"{cls.qualified_name}.__init__"
                return init if model.function(init) is not None else None
        return None

    head, rest = canonical.split(".", 1)
    local_target = _resolve_local_object(model, site, head)
    if local_target is not None:
        candidate = f"{local_target}.{rest}"
        if model.function(candidate) is not None:
            return candidate

    # longest module prefix resolution: pkg.mod.Class.method / mod.func
    parts = canonical.split(".")
    for split in range(len(parts) - 1, 0, -1):
        module = ".".join(parts[:split])
        file_path = model.module_file(module)
        if file_path is None:
            continue
        candidate = f"{file_path}::{'.'.join(parts[split:])}"
        if model.function(candidate) is not None:
            return candidate
        return None

    # imported name that canonicalized into "module.func" without the module
    # being a project file resolves nowhere; same-file class-dotted calls
    # (ClassName.method) are looked up directly
    candidate = f"{path}::{canonical}"
    if model.function(candidate) is not None:
        return candidate
    return None


def _resolve_local_object(model: ProgramModel, site: CallSite, var_name: str) -> Optional[str]:
    """Class qualified name when ``var_name`` is a locally constructed instance."""
    scopes = []
    enclosing = model.function(site.enclosing_function)
    if enclosing is not None:
        scopes.append(enclosing.statements())
    scopes.append(iter(model.module_statements_in_file(site.location.file)))
    for statements in scopes:
        for stmt in statements:
            if stmt.kind.value != "Assignment" or stmt.expression is None:
                continue
            if var_name not in stmt.targets or stmt.expression.kind != "call":
                continue
            ctor = model.canonical_callee(site.location.file, stmt.expression.name or "")
            for cls in model.classes:
                if cls.name == ctor.split(".")[-1] and (
                    cls.file == site.location.file or model.module_file(ctor.rsplit(".", 1)[0]) == cls.file
                ):
                    return cls.qualified_name
    return None


def reachable_functions(tool_or_handler, graph: CallGraph) -> set[str]:
    """Forward-reachable set from a tool handler, handler included.

    Cycle-safe (visited set); traversal-order independent by construction.
    """
    handler = getattr(tool_or_handler, "handler", tool_or_handler)
    if handler not in graph.nodes:
        raise UnknownHandler(handler)
    reached, _ = bfs_reachable(handler, graph.forward_edges, MAX_HOPS)
    return reached


def bfs_reachable(
    start: str, edges: dict[str, set[str]], max_hops: int = MAX_HOPS
) -> tuple[set[str], bool]:
    """Visited-set BFS with a hop cap; returns (reached, truncated)."""
    visited = {start}
    frontier = [start]
    truncated = False
    for _ in range(max_hops):
        if not frontier:
            break
        next_frontier = []
        for node in frontier:
            for succ in sorted(edges.get(node, ())):
                if succ not in visited:
                    visited.add(succ)
                    next_frontier.append(succ)
        frontier = next_frontier
    if frontier:
        truncated = True
    return visited, truncated
