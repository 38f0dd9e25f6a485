"""Walk source trees, emit function-level interchange dumps."""

from __future__ import annotations

import ast
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .convert import AST_SCHEMA, NODE_KINDS, convert_stmt


@dataclass
class ExtractionManifest:
    library: str
    version: str
    interpreter: str
    files_scanned: int = 0
    functions_emitted: int = 0
    functions_skipped: list = field(default_factory=list)
    files_skipped: list = field(default_factory=list)

    @property
    def functions_discovered(self) -> int:
        return self.functions_emitted + len(self.functions_skipped)

    def to_dict(self) -> dict:
        return {
            "library": self.library,
            "version": self.version,
            "interpreter": self.interpreter,
            "files_scanned": self.files_scanned,
            "functions_discovered": self.functions_discovered,
            "functions_emitted": self.functions_emitted,
            "functions_skipped": self.functions_skipped,
            "files_skipped": self.files_skipped,
        }


def _params(args: ast.arguments) -> list[str]:
    names = [a.arg for a in args.posonlyargs]
    names += [a.arg for a in args.args]
    if args.vararg:
        names.append(args.vararg.arg)
    names += [a.arg for a in args.kwonlyargs]
    if args.kwarg:
        names.append(args.kwarg.arg)
    return names


_FUNC_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)


def _walk_functions(body: list[ast.stmt], qualifier: str):
    """Yield (qualified-name, funcdef) for functions, methods, and nested
    functions, depth-first in source order."""
    for node in body:
        if isinstance(node, _FUNC_NODES):
            fqname = f"{qualifier}.{node.name}" if qualifier else node.name
            yield fqname, node
            yield from _walk_functions(node.body, fqname)
        elif isinstance(node, ast.ClassDef):
            prefix = f"{qualifier}.{node.name}" if qualifier else node.name
            yield from _walk_functions(node.body, prefix)


def _unit_from_funcdef(fqname: str, node, rel_file: str,
                       library: str) -> dict:
    return {
        "fqname": fqname,
        "params": _params(node.args),
        "decorators": [ast.unparse(d) for d in node.decorator_list],
        "source_library": library,
        "source_span": {
            "file": rel_file,
            "line_start": node.lineno,
            "line_end": node.end_lineno or node.lineno,
        },
        "body": [convert_stmt(s) for s in node.body],
    }


def _module_qualifier(rel_file: Path, library: str) -> str:
    parts = list(rel_file.with_suffix("").parts)
    if parts and parts[-1] == "__init__":
        parts = parts[:-1]
    if library and (not parts or parts[0] != library):
        parts = [library] + parts
    return ".".join(parts)


def extract(source_root: Path, out_path: Path,
            library: Optional[str] = None,
            version: str = "") -> ExtractionManifest:
    """Parse every .py file under source_root into the interchange dump."""
    source_root = Path(source_root)
    library = library or source_root.name
    manifest = ExtractionManifest(
        library=library,
        version=version,
        interpreter=f"{platform.python_implementation()} "
                    f"{platform.python_version()}",
    )
    functions: list[dict] = []
    files = sorted(p for p in source_root.rglob("*.py") if p.is_file())
    for path in files:
        rel = path.relative_to(source_root)
        manifest.files_scanned += 1
        try:
            tree = ast.parse(path.read_text(encoding="utf-8", errors="replace"),
                             filename=str(path))
        except (SyntaxError, ValueError) as exc:
            manifest.files_skipped.append(
                {"file": str(rel), "reason": f"{type(exc).__name__}: {exc}"})
            continue
        qualifier = _module_qualifier(rel, library)
        for fqname, node in _walk_functions(tree.body, qualifier):
            try:
                functions.append(
                    _unit_from_funcdef(fqname, node, str(rel), library))
                manifest.functions_emitted += 1
            except Exception as exc:  # conversion must never kill a run
                manifest.functions_skipped.append(
                    {"fqname": fqname, "file": str(rel),
                     "reason": f"{type(exc).__name__}: {exc}"})
    functions.sort(key=lambda u: (u["source_span"]["file"],
                                  u["source_span"]["line_start"],
                                  u["fqname"]))
    doc = {
        "schema": AST_SCHEMA,
        "source": {
            "library": library,
            "version": version,
            "root": str(source_root),
        },
        "manifest": manifest.to_dict(),
        "functions": functions,
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_suffix(out_path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True,
                              ensure_ascii=False) + "\n", encoding="utf-8")
    os.replace(tmp, out_path)
    return manifest


def stdlib_root(module_name: str) -> Path:
    """Source directory (or file's parent) of an importable module."""
    import importlib.util

    spec = importlib.util.find_spec(module_name)
    if spec is None:
        raise FileNotFoundError(f"module {module_name!r} not importable")
    if spec.submodule_search_locations:
        return Path(list(spec.submodule_search_locations)[0])
    if spec.origin is None or not spec.origin.endswith(".py"):
        raise FileNotFoundError(f"module {module_name!r} has no Python source")
    return Path(spec.origin).parent


def extract_stdlib(module_name: str, out_path: Path) -> ExtractionManifest:
    import importlib.util

    spec = importlib.util.find_spec(module_name)
    if spec is None:
        raise FileNotFoundError(f"module {module_name!r} not importable")
    if spec.submodule_search_locations:
        root = Path(list(spec.submodule_search_locations)[0])
    else:
        # single-file module: extract just that file via its parent with a
        # temp filter
        root = Path(spec.origin).parent
        return _extract_single(Path(spec.origin), out_path, module_name)
    return extract(root, out_path, library=module_name,
                   version=platform.python_version())


def _extract_single(path: Path, out_path: Path,
                    library: str) -> ExtractionManifest:
    manifest = ExtractionManifest(
        library=library, version=platform.python_version(),
        interpreter=f"{platform.python_implementation()} "
                    f"{platform.python_version()}")
    manifest.files_scanned = 1
    functions: list[dict] = []
    tree = ast.parse(path.read_text(encoding="utf-8", errors="replace"))
    for fqname, node in _walk_functions(tree.body, library):
        functions.append(_unit_from_funcdef(fqname, node, path.name, library))
        manifest.functions_emitted += 1
    doc = {
        "schema": AST_SCHEMA,
        "source": {"library": library,
                   "version": platform.python_version(),
                   "root": str(path)},
        "manifest": manifest.to_dict(),
        "functions": functions,
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(doc, indent=2, sort_keys=True,
                                   ensure_ascii=False) + "\n",
                        encoding="utf-8")
    return manifest


def schema_check(dump_path: Path) -> list[str]:
    """Validate a dump file; returns a list of violations (empty = ok)."""
    violations: list[str] = []
    try:
        text = Path(dump_path).read_text(encoding="utf-8")
    except OSError as exc:
        return [f"unreadable: {exc}"]
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        return [f"unexpected-eof or invalid JSON: {exc}"]
    if not isinstance(doc, dict):
        return ["document is not an object"]
    if doc.get("schema") != AST_SCHEMA:
        violations.append(
            f"schema header {doc.get('schema')!r} != {AST_SCHEMA!r}")
    functions = doc.get("functions")
    if not isinstance(functions, list):
        return violations + ["functions is not a list"]
    for idx, unit in enumerate(functions):
        where = unit.get("fqname", f"functions[{idx}]") \
            if isinstance(unit, dict) else f"functions[{idx}]"
        if not isinstance(unit, dict):
            violations.append(f"{where}: not an object")
            continue
        params = unit.get("params")
        if not isinstance(params, list) or \
                len(set(params)) != len(params or []):
            violations.append(f"{where}: bad or duplicate params")
        stack = list(unit.get("body") or [])
        while stack:
            node = stack.pop()
            if not isinstance(node, dict):
                violations.append(f"{where}: non-object node")
                break
            kind = node.get("kind")
            if kind not in NODE_KINDS:
                violations.append(f"{where}: unknown node kind {kind!r}")
                break
            span = node.get("span")
            if span is not None and (
                    not isinstance(span, list) or len(span) != 2
                    or any(not isinstance(x, int) or x < 0 for x in span)
                    or span[0] > span[1]):
                violations.append(f"{where}: bad span {span!r}")
                break
            stack.extend(node.get("children") or [])
    return violations
