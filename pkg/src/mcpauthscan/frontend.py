"""Source-to-ProgramModel front end.

Only the Python front end ships; the :class:`FrontEnd` protocol keeps the
door open for other languages. Parsing is deterministic: files are walked
in sorted order and functions come out ordered by (file, line). Files that
fail to parse are recorded as diagnostics, never raised.
"""
from __future__ import annotations

import ast
import os
import re
from pathlib import Path
from typing import Optional, Protocol

from .errors import ProjectNotFound
from .model import (
    MODULE_SCOPE,
    CallSite,
    ClassRecord,
    DecoratorRecord,
    Diagnostic,
    FunctionDef,
    ImportRecord,
    NormExpr,
    ProgramModel,
    SourceFile,
    SourceLocation,
    Statement,
    StatementKind,
)

SKIP_DIRS = {".git", "__pycache__", ".venv", "venv", "node_modules", ".tox", "build", "dist"}


class FrontEnd(Protocol):
    """Anything that can lower a project directory into a ProgramModel."""

    extension: str

    def parse(self, project_root: Path, project_id: str) -> ProgramModel: ...


def parse_source(project_root: str | os.PathLike, project_id: Optional[str] = None) -> ProgramModel:
    """Parse every supported source file under ``project_root``.

    Raises ProjectNotFound if the root is missing; an empty directory is a
    valid (empty) project.
    """
    root = Path(project_root)
    if not root.exists() or not root.is_dir():
        raise ProjectNotFound(str(project_root))
    return PythonFrontEnd().parse(root, project_id or root.name)


class PythonFrontEnd:
    """Lowers CPython ASTs into the normalized model."""

    extension = ".py"

    def parse(self, project_root: Path, project_id: str) -> ProgramModel:
        model = ProgramModel(project_id=project_id, root=str(project_root))
        for path in self._source_paths(project_root):
            rel = path.relative_to(project_root).as_posix()
            try:
                source = path.read_text(encoding="utf-8")
                tree = ast.parse(source, filename=rel)
            except (SyntaxError, UnicodeDecodeError, OSError) as exc:
                model.source_files.append(SourceFile(path=rel, module_name=_module_name(rel), parsed=False))
                model.diagnostics.append(
                    Diagnostic(kind="ParseFailure", message=f"{type(exc).__name__}: {exc}", file=rel)
                )
                continue
            model.source_files.append(SourceFile(path=rel, module_name=_module_name(rel), parsed=True))
            _FileLowering(model, rel, source).lower_module(tree)
        model.functions.sort(key=lambda f: (f.file, f.location.line, f.location.column))
        model.call_sites.sort(key=lambda c: (c.location.file, c.location.line, c.location.column))
        model.finalize()
        return model

    def _source_paths(self, root: Path) -> list[Path]:
        paths = []
        for dirpath, dirnames, filenames in os.walk(root):
            dirnames[:] = sorted(d for d in dirnames if d not in SKIP_DIRS and not d.startswith("."))
            for name in sorted(filenames):
                if name.endswith(self.extension):
                    paths.append(Path(dirpath) / name)
        return sorted(paths, key=lambda p: p.relative_to(root).as_posix())


def _module_name(rel_path: str) -> str:
    parts = rel_path[: -len(".py")].split("/")
    if parts[-1] == "__init__":
        parts = parts[:-1]
    return ".".join(parts) if parts else ""


class _FileLowering:
    """Per-file lowering state: qualified-name scopes and source access."""

    def __init__(self, model: ProgramModel, rel_path: str, source: str):
        self.model = model
        self.path = rel_path
        self.source = source
        # parser-style line split (\r\n, \r, \n; form feeds stay in-line),
        # cached once: per-node ast.get_source_segment is quadratic
        self._lines = _split_lines(source)
        self._ascii = source.isascii()

    # -- scope walk ----------------------------------------------------------

    def lower_module(self, tree: ast.Module) -> None:
        module_fn = self.model.module_scope_name(self.path)
        for node in tree.body:
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                self._lower_function(node, [], None)
            elif isinstance(node, ast.ClassDef):
                self._lower_class(node, [], module_fn)
            else:
                if isinstance(node, (ast.Import, ast.ImportFrom)):
                    self._record_imports(node)
                stmt = self._lower_statement(node, module_fn)
                if stmt is not None:
                    self.model.module_statements.append(stmt)
                    self._collect_call_sites(stmt)

    def _lower_function(
        self, node: ast.FunctionDef | ast.AsyncFunctionDef, scope: list[str], class_name: Optional[str]
    ) -> None:
        chain = scope + [node.name]
        qname = f"{self.path}::{'.'.join(chain)}"
        params = self._parameters(node.args)
        decorators = [self._lower_decorator(d) for d in node.decorator_list]
        body = []
        for child in node.body:
            if isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef)):
                self._lower_function(child, chain, None)
                continue
            if isinstance(child, ast.ClassDef):
                self._lower_class(child, chain, qname)
                continue
            if isinstance(child, (ast.Import, ast.ImportFrom)):
                self._record_imports(child)
            stmt = self._lower_statement(child, qname)
            if stmt is not None:
                body.append(stmt)
        fn = FunctionDef(
            qualified_name=qname,
            name=node.name,
            parameters=params,
            decorators=decorators,
            body=body,
            is_async=isinstance(node, ast.AsyncFunctionDef),
            location=self._loc(node),
            file=self.path,
            class_name=class_name,
            docstring=ast.get_docstring(node),
        )
        self.model.functions.append(fn)
        for stmt in body:
            self._collect_call_sites(stmt)

    def _lower_class(self, node: ast.ClassDef, scope: list[str], enclosing: str) -> None:
        chain = scope + [node.name]
        qname = f"{self.path}::{'.'.join(chain)}"
        attributes: dict[str, NormExpr] = {}
        methods: list[str] = []
        for child in node.body:
            if isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef)):
                methods.append(f"{self.path}::{'.'.join(chain + [child.name])}")
                self._lower_function(child, chain, node.name)
            elif isinstance(child, ast.ClassDef):
                self._lower_class(child, chain, enclosing)
            elif isinstance(child, ast.Assign) and len(child.targets) == 1 and isinstance(child.targets[0], ast.Name):
                attributes[child.targets[0].id] = self._expr(child.value)
            elif isinstance(child, ast.AnnAssign) and isinstance(child.target, ast.Name) and child.value is not None:
                attributes[child.target.id] = self._expr(child.value)
        self.model.classes.append(
            ClassRecord(
                qualified_name=qname,
                name=node.name,
                bases=[self._segment(b) for b in node.bases],
                attributes=attributes,
                methods=methods,
                location=self._loc(node),
                file=self.path,
            )
        )

    def _parameters(self, args: ast.arguments) -> list[tuple[str, int]]:
        ordered = [a.arg for a in args.posonlyargs + args.args]
        if args.vararg:
            ordered.append(args.vararg.arg)
        ordered.extend(a.arg for a in args.kwonlyargs)
        if args.kwarg:
            ordered.append(args.kwarg.arg)
        return [(name, idx) for idx, name in enumerate(ordered)]

    def _lower_decorator(self, node: ast.expr) -> DecoratorRecord:
        text = self._segment(node)
        if isinstance(node, ast.Call):
            callee = _dotted_path(node.func) or self._segment(node.func)
            args = [self._expr(a) for a in node.args]
            kwargs = {kw.arg: self._expr(kw.value) for kw in node.keywords if kw.arg}
        else:
            callee = _dotted_path(node) or text
            args, kwargs = [], {}
        return DecoratorRecord(text=text, callee_text=callee, args=args, kwargs=kwargs, location=self._loc(node))

    # -- statements ----------------------------------------------------------

    def _lower_statement(self, node: ast.stmt, enclosing: str) -> Optional[Statement]:
        loc = self._loc(node)
        if isinstance(node, ast.Assign):
            targets: list[str] = []
            for t in node.targets:
                if isinstance(t, (ast.Tuple, ast.List)):
                    targets.extend(self._segment(e) for e in t.elts)
                else:
                    targets.append(self._segment(t))
            return Statement(
                kind=StatementKind.ASSIGNMENT,
                targets=targets,
                expression=self._expr(node.value),
                location=loc,
                enclosing_function=enclosing,
            )
        if isinstance(node, ast.AugAssign):
            return Statement(
                kind=StatementKind.ASSIGNMENT,
                targets=[self._segment(node.target)],
                expression=self._expr(node.value),
                location=loc,
                enclosing_function=enclosing,
            )
        if isinstance(node, ast.AnnAssign):
            return Statement(
                kind=StatementKind.ASSIGNMENT,
                targets=[self._segment(node.target)],
                expression=self._expr(node.value) if node.value is not None else None,
                location=loc,
                enclosing_function=enclosing,
            )
        if isinstance(node, ast.Expr):
            kind = StatementKind.CALL if isinstance(node.value, ast.Call) else StatementKind.OTHER
            return Statement(
                kind=kind,
                targets=[],
                expression=self._expr(node.value),
                location=loc,
                enclosing_function=enclosing,
            )
        if isinstance(node, ast.Return):
            return Statement(
                kind=StatementKind.RETURN,
                targets=[],
                expression=self._expr(node.value) if node.value is not None else None,
                location=loc,
                enclosing_function=enclosing,
            )
        if isinstance(node, ast.If):
            return Statement(
                kind=StatementKind.CONDITIONAL,
                targets=[],
                expression=self._expr(node.test),
                location=loc,
                enclosing_function=enclosing,
                children=self._lower_block(node.body, enclosing),
                orelse=self._lower_block(node.orelse, enclosing),
            )
        if isinstance(node, ast.Raise):
            return Statement(
                kind=StatementKind.RAISE,
                targets=[],
                expression=self._expr(node.exc) if node.exc is not None else None,
                location=loc,
                enclosing_function=enclosing,
            )
        if isinstance(node, (ast.For, ast.AsyncFor)):
            return Statement(
                kind=StatementKind.LOOP,
                targets=_target_names(node.target),
                expression=self._expr(node.iter),
                location=loc,
                enclosing_function=enclosing,
                children=self._lower_block(node.body, enclosing),
                orelse=self._lower_block(node.orelse, enclosing),
            )
        if isinstance(node, ast.While):
            return Statement(
                kind=StatementKind.LOOP,
                targets=[],
                expression=self._expr(node.test),
                location=loc,
                enclosing_function=enclosing,
                children=self._lower_block(node.body, enclosing),
                orelse=self._lower_block(node.orelse, enclosing),
            )
        if isinstance(node, (ast.With, ast.AsyncWith)):
            targets = [self._segment(item.optional_vars) for item in node.items if item.optional_vars is not None]
            return Statement(
                kind=StatementKind.WITH,
                targets=targets,
                expression=self._expr(node.items[0].context_expr) if node.items else None,
                location=loc,
                enclosing_function=enclosing,
                children=self._lower_block(node.body, enclosing),
            )
        if isinstance(node, ast.Try):
            children = self._lower_block(node.body, enclosing)
            for handler in node.handlers:
                children.extend(self._lower_block(handler.body, enclosing))
            children.extend(self._lower_block(node.orelse, enclosing))
            children.extend(self._lower_block(node.finalbody, enclosing))
            return Statement(
                kind=StatementKind.OTHER,
                targets=[],
                expression=None,
                location=loc,
                enclosing_function=enclosing,
                children=children,
            )
        return Statement(
            kind=StatementKind.OTHER,
            targets=[],
            expression=None,
            location=loc,
            enclosing_function=enclosing,
        )

    def _lower_block(self, body: list[ast.stmt], enclosing: str) -> list[Statement]:
        out = []
        for child in body:
            if isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
                continue  # handled by the scope walk
            if isinstance(child, (ast.Import, ast.ImportFrom)):
                self._record_imports(child)
            stmt = self._lower_statement(child, enclosing)
            if stmt is not None:
                out.append(stmt)
        return out

    # -- expressions ---------------------------------------------------------

    def _expr(self, node: ast.expr) -> NormExpr:
        loc = self._loc(node)
        text = self._segment(node)
        if isinstance(node, ast.Name):
            return NormExpr(kind="name", text=text, location=loc, name=node.id)
        if isinstance(node, ast.Constant):
            return NormExpr(kind="const", text=text, location=loc)
        if isinstance(node, ast.Attribute):
            dotted = _dotted_path(node)
            if dotted is not None:
                return NormExpr(kind="attr", text=text, location=loc, name=dotted)
            return NormExpr(
                kind="attr", text=text, location=loc, name=f"*.{node.attr}", children=[self._expr(node.value)]
            )
        if isinstance(node, ast.Call):
            callee = _dotted_path(node.func)
            children = [] if callee is not None else [self._expr(node.func)]
            if callee is None and isinstance(node.func, ast.Attribute):
                callee = f"*.{node.func.attr}"
            return NormExpr(
                kind="call",
                text=text,
                location=loc,
                name=callee or self._segment(node.func),
                children=children,
                args=[self._expr(a) for a in node.args],
                kwargs={kw.arg: self._expr(kw.value) for kw in node.keywords if kw.arg},
            )
        if isinstance(node, (ast.List, ast.Tuple, ast.Set)):
            return NormExpr(kind="container", text=text, location=loc, children=[self._expr(e) for e in node.elts])
        if isinstance(node, ast.Dict):
            children = [self._expr(k) for k in node.keys if k is not None]
            children.extend(self._expr(v) for v in node.values)
            return NormExpr(kind="container", text=text, location=loc, children=children)
        if isinstance(node, ast.BinOp):
            return NormExpr(kind="op", text=text, location=loc, children=[self._expr(node.left), self._expr(node.right)])
        if isinstance(node, ast.BoolOp):
            return NormExpr(kind="op", text=text, location=loc, children=[self._expr(v) for v in node.values])
        if isinstance(node, ast.UnaryOp):
            return NormExpr(kind="op", text=text, location=loc, children=[self._expr(node.operand)])
        if isinstance(node, ast.Compare):
            ops = " ".join(type(o).__name__ for o in node.ops)
            expr = NormExpr(
                kind="op",
                text=text,
                location=loc,
                children=[self._expr(node.left)] + [self._expr(c) for c in node.comparators],
            )
            expr.params = (ops,)  # comparison operator names, used by guard analysis
            return expr
        if isinstance(node, ast.Lambda):
            params = tuple(a.arg for a in node.args.posonlyargs + node.args.args)
            return NormExpr(kind="lambda", text=text, location=loc, params=params, children=[self._expr(node.body)])
        if isinstance(node, ast.Subscript):
            return NormExpr(
                kind="subscript",
                text=text,
                location=loc,
                name=_dotted_path(node.value),
                children=[self._expr(node.value), self._expr(node.slice)],
            )
        if isinstance(node, (ast.ListComp, ast.SetComp, ast.GeneratorExp, ast.DictComp)):
            params: tuple[str, ...] = ()
            children: list[NormExpr] = []
            if isinstance(node, ast.DictComp):
                children.append(self._expr(node.key))
                children.append(self._expr(node.value))
            else:
                children.append(self._expr(node.elt))
            for comp in node.generators:
                params = params + tuple(_target_names(comp.target))
                children.append(self._expr(comp.iter))
            return NormExpr(kind="comprehension", text=text, location=loc, params=params, children=children)
        if isinstance(node, ast.IfExp):
            return NormExpr(
                kind="op",
                text=text,
                location=loc,
                children=[self._expr(node.body), self._expr(node.test), self._expr(node.orelse)],
            )
        if isinstance(node, ast.JoinedStr):
            children = [self._expr(v.value) for v in node.values if isinstance(v, ast.FormattedValue)]
            return NormExpr(kind="op", text=text, location=loc, children=children)
        if isinstance(node, ast.Starred):
            return NormExpr(kind="op", text=text, location=loc, children=[self._expr(node.value)])
        if isinstance(node, ast.Await):
            return self._expr(node.value)
        if isinstance(node, ast.NamedExpr):
            return NormExpr(kind="op", text=text, location=loc, children=[self._expr(node.value)])
        return NormExpr(kind="other", text=text, location=loc)

    def _collect_call_sites(self, stmt: Statement) -> None:
        for sub in stmt.walk():
            if sub.expression is None:
                continue
            for node in sub.expression.walk():
                if node.kind == "call":
                    self.model.call_sites.append(
                        CallSite(
                            callee_expression=node.name or node.text,
                            arguments=node.args,
                            keyword_arguments=node.kwargs,
                            enclosing_function=sub.enclosing_function,
                            location=node.location,
                        )
                    )

    # -- imports -------------------------------------------------------------

    def _record_imports(self, node: ast.Import | ast.ImportFrom) -> None:
        loc = self._loc(node)
        if isinstance(node, ast.Import):
            for alias in node.names:
                if alias.asname:
                    self.model.imports.append(
                        ImportRecord(file=self.path, local_name=alias.asname, target=alias.name, location=loc)
                    )
                else:
                    head = alias.name.split(".")[0]
                    self.model.imports.append(
                        ImportRecord(file=self.path, local_name=head, target=head, location=loc)
                    )
            return
        base = self._relative_base(node.level, node.module)
        for alias in node.names:
            if alias.name == "*":
                continue
            target = f"{base}.{alias.name}" if base else alias.name
            self.model.imports.append(
                ImportRecord(file=self.path, local_name=alias.asname or alias.name, target=target, location=loc)
            )

    def _relative_base(self, level: int, module: Optional[str]) -> str:
        if level == 0:
            return module or ""
        package_parts = _module_name(self.path).split(".")[:-1]
        if level > 1:
            package_parts = package_parts[: len(package_parts) - (level - 1)]
        base = ".".join(package_parts)
        if module:
            base = f"{base}.{module}" if base else module
        return base

    # -- helpers -------------------------------------------------------------

    def _loc(self, node: ast.AST) -> SourceLocation:
        return SourceLocation(file=self.path, line=getattr(node, "lineno", 0), column=getattr(node, "col_offset", 0))

    def _segment(self, node: ast.AST) -> str:
        lineno = getattr(node, "lineno", None)
        end_lineno = getattr(node, "end_lineno", None)
        end_col = getattr(node, "end_col_offset", None)
        if lineno is None or end_lineno is None or end_col is None:
            try:
                return ast.unparse(node)
            except Exception:
                return ""
        first = lineno - 1
        last = end_lineno - 1
        col = node.col_offset
        if self._ascii:
            if first == last:
                return self._lines[first][col:end_col]
            chunks = [self._lines[first][col:]]
            chunks.extend(self._lines[first + 1 : last])
            chunks.append(self._lines[last][:end_col])
            return "".join(chunks)
        # column offsets count UTF-8 bytes, not characters
        if first == last:
            return self._lines[first].encode()[col:end_col].decode()
        chunks = [self._lines[first].encode()[col:].decode()]
        chunks.extend(self._lines[first + 1 : last])
        chunks.append(self._lines[last].encode()[:end_col].decode())
        return "".join(chunks)


def _split_lines(source: str) -> list[str]:
    """Parser-style line split, keeping line ends; form feeds are not breaks."""
    lines = []
    start = 0
    for match in re.finditer(r"\r\n|\r|\n", source):
        lines.append(source[start : match.end()])
        start = match.end()
    if start < len(source):
        lines.append(source[start:])
    return lines


def _dotted_path(node: ast.expr) -> Optional[str]:
    """Dotted path for Name/Attribute chains; None when the base is complex."""
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        base = _dotted_path(node.value)
        return f"{base}.{node.attr}" if base is not None else None
    return None


def _target_names(node: ast.expr) -> list[str]:
    if isinstance(node, ast.Name):
        return [node.id]
    if isinstance(node, (ast.Tuple, ast.List)):
        names = []
        for elt in node.elts:
            names.extend(_target_names(elt))
        return names
    if isinstance(node, ast.Starred):
        return _target_names(node.value)
    return []
