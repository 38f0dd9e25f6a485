"""Lower Python AST nodes into the interchange schema.

The schema (owned by the scanner side) covers the statement and expression
forms its dependency rules read; everything else becomes an opaque node
whose nested statement blocks are preserved so inner code stays visible.
"""

from __future__ import annotations

import ast
from typing import Optional

AST_SCHEMA = "pickleguard-ast/1"

STMT_KINDS = frozenset({
    "assign", "aug-assign", "expr-stmt", "for", "while", "with", "if",
    "return", "opaque",
})
EXPR_KINDS = frozenset({
    "name", "attribute", "call", "constant", "subscript", "tuple", "list",
    "dict", "set", "binop", "unaryop", "boolop", "compare", "starred",
    "keyword", "slice", "opaque-expr",
})
NODE_KINDS = STMT_KINDS | EXPR_KINDS | {"block", "withitem"}

_MAX_LITERAL = 64


def _span(node: ast.AST) -> list[int]:
    start = getattr(node, "lineno", 0) or 0
    end = getattr(node, "end_lineno", start) or start
    return [start, max(start, end)]


def _node(kind: str, node: ast.AST, children: Optional[list] = None,
          literal: Optional[str] = None) -> dict:
    out: dict = {"kind": kind, "span": _span(node)}
    out["children"] = children or []
    out["literal"] = literal
    return out


def convert_expr(node: ast.expr) -> dict:
    if isinstance(node, ast.Name):
        return _node("name", node, literal=node.id)
    if isinstance(node, ast.Attribute):
        return _node("attribute", node, [convert_expr(node.value)],
                     literal=node.attr)
    if isinstance(node, ast.Call):
        children = [convert_expr(node.func)]
        children.extend(convert_expr(a) for a in node.args)
        for kw in node.keywords:
            children.append(_node("keyword", kw if kw.lineno else node,
                                  [convert_expr(kw.value)], literal=kw.arg))
        return _node("call", node, children)
    if isinstance(node, ast.Constant):
        return _node("constant", node, literal=repr(node.value)[:_MAX_LITERAL])
    if isinstance(node, ast.Subscript):
        return _node("subscript", node,
                     [convert_expr(node.value), convert_expr(node.slice)])
    if isinstance(node, ast.Tuple):
        return _node("tuple", node, [convert_expr(e) for e in node.elts])
    if isinstance(node, ast.List):
        return _node("list", node, [convert_expr(e) for e in node.elts])
    if isinstance(node, ast.Set):
        return _node("set", node, [convert_expr(e) for e in node.elts])
    if isinstance(node, ast.Dict):
        children = []
        for key, value in zip(node.keys, node.values):
            if key is not None:
                children.append(convert_expr(key))
            children.append(convert_expr(value))
        return _node("dict", node, children)
    if isinstance(node, ast.BinOp):
        return _node("binop", node,
                     [convert_expr(node.left), convert_expr(node.right)],
                     literal=type(node.op).__name__)
    if isinstance(node, ast.UnaryOp):
        return _node("unaryop", node, [convert_expr(node.operand)],
                     literal=type(node.op).__name__)
    if isinstance(node, ast.BoolOp):
        return _node("boolop", node, [convert_expr(v) for v in node.values],
                     literal=type(node.op).__name__)
    if isinstance(node, ast.Compare):
        return _node("compare", node,
                     [convert_expr(node.left)]
                     + [convert_expr(c) for c in node.comparators])
    if isinstance(node, ast.Starred):
        return _node("starred", node, [convert_expr(node.value)])
    if isinstance(node, ast.Slice):
        parts = [convert_expr(p) for p in
                 (node.lower, node.upper, node.step) if p is not None]
        return _node("slice", node, parts)
    # lambdas, comprehensions, f-strings, awaits: opaque in v1
    return _node("opaque-expr", node, literal=type(node).__name__)


def _block(stmts: list[ast.stmt], anchor: ast.AST) -> dict:
    return _node("block", anchor, [convert_stmt(s) for s in stmts])


def convert_stmt(node: ast.stmt) -> dict:
    if isinstance(node, ast.Assign):
        children = [convert_expr(t) for t in node.targets]
        children.append(convert_expr(node.value))
        return _node("assign", node, children)
    if isinstance(node, ast.AnnAssign) and node.value is not None:
        return _node("assign", node,
                     [convert_expr(node.target), convert_expr(node.value)])
    if isinstance(node, ast.AugAssign):
        return _node("aug-assign", node,
                     [convert_expr(node.target), convert_expr(node.value)],
                     literal=type(node.op).__name__)
    if isinstance(node, ast.Expr):
        return _node("expr-stmt", node, [convert_expr(node.value)])
    if isinstance(node, ast.Return):
        children = [convert_expr(node.value)] if node.value is not None else []
        return _node("return", node, children)
    if isinstance(node, ast.For) or isinstance(node, ast.AsyncFor):
        children = [convert_expr(node.target), convert_expr(node.iter),
                    _block(node.body, node)]
        if node.orelse:
            children.append(_block(node.orelse, node))
        return _node("for", node, children)
    if isinstance(node, ast.While):
        children = [convert_expr(node.test), _block(node.body, node)]
        if node.orelse:
            children.append(_block(node.orelse, node))
        return _node("while", node, children)
    if isinstance(node, ast.If):
        children = [convert_expr(node.test), _block(node.body, node)]
        if node.orelse:
            children.append(_block(node.orelse, node))
        return _node("if", node, children)
    if isinstance(node, ast.With) or isinstance(node, ast.AsyncWith):
        children = []
        for item in node.items:
            item_children = [convert_expr(item.context_expr)]
            if item.optional_vars is not None:
                item_children.append(convert_expr(item.optional_vars))
            children.append(_node("withitem", node, item_children))
        children.append(_block(node.body, node))
        return _node("with", node, children)
    if isinstance(node, ast.Try):
        blocks = [_block(node.body, node)]
        for handler in node.handlers:
            blocks.append(_block(handler.body, node))
        if node.orelse:
            blocks.append(_block(node.orelse, node))
        if node.finalbody:
            blocks.append(_block(node.finalbody, node))
        return _node("opaque", node, blocks, literal="Try")
    if isinstance(node, ast.Raise):
        children = [convert_expr(node.exc)] if node.exc is not None else []
        return _node("opaque", node, children, literal="Raise")
    if isinstance(node, ast.Assert):
        return _node("opaque", node, [convert_expr(node.test)],
                     literal="Assert")
    if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef,
                         ast.ClassDef)):
        # emitted as separate units by the walker; the body position is
        # kept as an opaque marker
        return _node("opaque", node, literal=type(node).__name__)
    return _node("opaque", node, literal=type(node).__name__)
