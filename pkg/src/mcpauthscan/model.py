"""Normalized program representation shared by every analysis stage.

The front end (see :mod:`mcpauthscan.frontend`) lowers source files into
these structures; everything downstream (call graph, dependency trees,
tool-entry extraction, authorization classification) consumes only this
model and never the original syntax tree, keeping the front end pluggable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional

MODULE_SCOPE = "<module>"


@dataclass(frozen=True)
class SourceLocation:
    """File-relative position of a syntactic element (1-based line, 0-based column)."""

    file: str
    line: int
    column: int

    def key(self) -> tuple[str, int, int]:
        return (self.file, self.line, self.column)


@dataclass(frozen=True)
class Diagnostic:
    """Non-fatal analysis event attached to a project or a tool."""

    kind: str
    message: str
    file: str = ""
    line: int = 0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": self.message, "file": self.file, "line": self.line}


class StatementKind(str, Enum):
    ASSIGNMENT = "Assignment"
    CALL = "Call"
    RETURN = "Return"
    CONDITIONAL = "Conditional"
    RAISE = "Raise"
    LOOP = "Loop"
    WITH = "With"
    OTHER = "Other"


@dataclass
class NormExpr:
    """Language-agnostic expression node.

    kind is one of: name, const, call, attr, container, op, lambda,
    subscript, other. ``name`` holds the identifier for name nodes and the
    dotted path for attribute chains rooted in a name ("sp.run"); attribute
    chains on non-name bases use a "*." prefix ("*.read").
    """

    kind: str
    text: str
    location: SourceLocation
    name: Optional[str] = None
    children: list["NormExpr"] = field(default_factory=list)
    args: list["NormExpr"] = field(default_factory=list)
    kwargs: dict[str, "NormExpr"] = field(default_factory=dict)
    params: tuple[str, ...] = ()

    def walk(self) -> Iterator["NormExpr"]:
        yield self
        for child in self.children:
            yield from child.walk()
        for arg in self.args:
            yield from arg.walk()
        for value in self.kwargs.values():
            yield from value.walk()

    def referenced_names(self) -> tuple[str, ...]:
        """Identifiers this expression mentions, in source order, deduplicated."""
        seen: dict[str, None] = {}
        for node in self.walk():
            if node.name:
                seen.setdefault(node.name.split(".")[0], None)
        return tuple(seen)


@dataclass
class Statement:
    """One normalized statement.

    ``expression`` holds the RHS for assignments, the call for call
    statements, the predicate for conditionals (verbatim text preserved),
    the iterable for loops, and the value for return/raise.
    ``children`` holds the success-branch/body statements; ``orelse`` the
    else branch where the syntax has one.
    """

    kind: StatementKind
    targets: list[str]
    expression: Optional[NormExpr]
    location: SourceLocation
    enclosing_function: str
    children: list["Statement"] = field(default_factory=list)
    orelse: list["Statement"] = field(default_factory=list)

    def predicate_names(self) -> tuple[str, ...]:
        if self.expression is None:
            return ()
        return self.expression.referenced_names()

    def walk(self) -> Iterator["Statement"]:
        yield self
        for child in self.children:
            yield from child.walk()
        for child in self.orelse:
            yield from child.walk()


@dataclass
class CallSite:
    """A call expression observed anywhere in a function or at module scope."""

    callee_expression: str
    arguments: list[NormExpr]
    keyword_arguments: dict[str, NormExpr]
    enclosing_function: str
    location: SourceLocation


@dataclass
class DecoratorRecord:
    """Decorator applied to a function: verbatim text plus parsed arguments."""

    text: str
    callee_text: str
    args: list[NormExpr]
    kwargs: dict[str, NormExpr]
    location: SourceLocation

    @property
    def tail(self) -> str:
        return self.callee_text.rsplit(".", 1)[-1]


@dataclass
class FunctionDef:
    """One function or method, uniquely identified by its qualified name.

    Qualified names are ``<relative file path>::<scope chain>`` where the
    scope chain joins enclosing classes/functions with dots.
    """

    qualified_name: str
    name: str
    parameters: list[tuple[str, int]]
    decorators: list[DecoratorRecord]
    body: list[Statement]
    is_async: bool
    location: SourceLocation
    file: str
    class_name: Optional[str] = None
    docstring: Optional[str] = None

    def parameter_names(self) -> list[str]:
        return [name for name, _ in self.parameters]

    def statements(self) -> Iterator[Statement]:
        for stmt in self.body:
            yield from stmt.walk()


@dataclass
class ClassRecord:
    """Class-level facts needed for subclass-based registration and method resolution."""

    qualified_name: str
    name: str
    bases: list[str]
    attributes: dict[str, NormExpr]
    methods: list[str]
    location: SourceLocation
    file: str


@dataclass
class ImportRecord:
    """One imported binding: ``local_name`` refers to dotted ``target``."""

    file: str
    local_name: str
    target: str
    location: SourceLocation


@dataclass
class SourceFile:
    path: str
    module_name: str
    parsed: bool


@dataclass
class ProgramModel:
    """Everything the analyses need to know about one project."""

    project_id: str
    root: str
    source_files: list[SourceFile] = field(default_factory=list)
    functions: list[FunctionDef] = field(default_factory=list)
    module_statements: list[Statement] = field(default_factory=list)
    call_sites: list[CallSite] = field(default_factory=list)
    classes: list[ClassRecord] = field(default_factory=list)
    imports: list[ImportRecord] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._functions_by_qname: dict[str, FunctionDef] = {}
        self._rebuild_indexes()

    def _rebuild_indexes(self) -> None:
        self._functions_by_qname = {f.qualified_name: f for f in self.functions}
        self._imports_by_file: dict[str, dict[str, str]] = {}
        for record in self.imports:
            self._imports_by_file.setdefault(record.file, {})[record.local_name] = record.target
        self._module_names = {sf.module_name: sf.path for sf in self.source_files if sf.parsed}
        self._classes_by_qname = {c.qualified_name: c for c in self.classes}
        self._functions_by_file: dict[str, list[FunctionDef]] = {}
        for fn in self.functions:
            self._functions_by_file.setdefault(fn.file, []).append(fn)
        self._classes_by_file: dict[str, list[ClassRecord]] = {}
        for cls in self.classes:
            self._classes_by_file.setdefault(cls.file, []).append(cls)
        self._sites_by_function: dict[str, list[CallSite]] = {}
        for site in self.call_sites:
            self._sites_by_function.setdefault(site.enclosing_function, []).append(site)
        self._module_statements_by_file: dict[str, list[Statement]] = {}
        for stmt in self.module_statements:
            self._module_statements_by_file.setdefault(stmt.location.file, []).append(stmt)

    def finalize(self) -> None:
        """Re-index after the front end finishes populating the lists."""
        self._rebuild_indexes()

    # -- lookups -----------------------------------------------------------

    def function(self, qualified_name: str) -> Optional[FunctionDef]:
        return self._functions_by_qname.get(qualified_name)

    def functions_in_file(self, path: str) -> list[FunctionDef]:
        return self._functions_by_file.get(path, [])

    def import_map(self, path: str) -> dict[str, str]:
        return self._imports_by_file.get(path, {})

    def module_file(self, module_name: str) -> Optional[str]:
        return self._module_names.get(module_name)

    def class_record(self, qualified_name: str) -> Optional[ClassRecord]:
        return self._classes_by_qname.get(qualified_name)

    def classes_in_file(self, path: str) -> list[ClassRecord]:
        return self._classes_by_file.get(path, [])

    def module_statements_in_file(self, path: str) -> list[Statement]:
        return self._module_statements_by_file.get(path, [])

    def call_sites_in(self, qualified_name: str) -> list[CallSite]:
        return self._sites_by_function.get(qualified_name, [])

    def module_scope_name(self, path: str) -> str:
        return f"{path}::{MODULE_SCOPE}"

    # -- name canonicalization ---------------------------------------------

    def canonical_callee(self, path: str, callee_expression: str) -> str:
        """Resolve the leading import alias of a dotted callee.

        ``sp.run`` with ``import subprocess as sp`` becomes
        ``subprocess.run``; names without an import record are returned
        unchanged. Matching of sensitive APIs and call-graph resolution both
        run on this canonical form.
        """
        imports = self.import_map(path)
        head, sep, rest = callee_expression.partition(".")
        target = imports.get(head)
        if target is None:
            return callee_expression
        return target + sep + rest if sep else target

    def statements_of(self, qualified_name: str) -> Iterable[Statement]:
        fn = self.function(qualified_name)
        if fn is not None:
            yield from fn.statements()
        elif qualified_name.endswith(MODULE_SCOPE):
            path = qualified_name.split("::", 1)[0]
            for stmt in self.module_statements_in_file(path):
                yield from stmt.walk()
