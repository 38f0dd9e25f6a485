"""Function-level data-dependency graphs and gadget-candidate discovery.

Edges are produced by exactly five statement rules (assignment, augmented
assignment, call, for-loop, with-statement); `return E` lowers to an
assignment into the reserved node `return`. A unit is a gadget candidate
when every critical argument of some sink call is reachable from one of
the unit's parameters. Parameters named self/cls are never used as
reachability sources: flows through instance fields are intentionally
pruned, which is the known-miss class of this analysis.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .risk_engine import ConfigError, RiskCategory, _read_records

AST_SCHEMA = "pickleguard-ast/1"
SINK_SCHEMA = "pickleguard-sinks/1"
CANDIDATE_SCHEMA = "pickleguard-candidates/1"

RULE_ASSIGNMENT = "assignment"
RULE_AUG_ASSIGNMENT = "aug-assignment"
RULE_CALL = "call"
RULE_FOR = "for-loop"
RULE_WITH = "with-stmt"
RULES = (RULE_ASSIGNMENT, RULE_AUG_ASSIGNMENT, RULE_CALL, RULE_FOR, RULE_WITH)

RETURN_NODE = "return"
_EXCLUDED_SOURCE_PARAMS = frozenset({"self", "cls"})

# Methods treated as mutating their receiver; "pop" mutates only when
# called with arguments (pop-with-arg).
MUTATOR_METHODS = frozenset({
    "append", "extend", "insert", "add", "update", "setdefault", "write",
    "push", "appendleft", "extendleft", "remove", "discard", "clear",
})

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


class SchemaViolation(ValueError):
    """An interchange node breaks the schema; the unit is skipped."""


@dataclass
class FunctionUnit:
    fqname: str
    params: list[str]
    body: list[dict]
    source_library: str = ""
    source_span: Optional[dict] = None
    decorators: list[str] = field(default_factory=list)

    @property
    def flow_params(self) -> list[str]:
        return [p for p in self.params if p not in _EXCLUDED_SOURCE_PARAMS]


@dataclass(frozen=True)
class DdgEdge:
    src: str
    dst: str
    span: tuple[int, int]
    rule: str


@dataclass(frozen=True)
class ArgSite:
    position: object  # int index or keyword name
    roots: tuple[str, ...]


@dataclass(frozen=True)
class CallSite:
    callee: str
    span: tuple[int, int]
    args: tuple[ArgSite, ...]


@dataclass
class DdgGraph:
    nodes: set[str] = field(default_factory=set)
    edges: list[DdgEdge] = field(default_factory=list)
    call_sites: list[CallSite] = field(default_factory=list)
    _edge_set: set[DdgEdge] = field(default_factory=set, repr=False)

    def add_edge(self, src: str, dst: str, span: tuple[int, int],
                 rule: str) -> None:
        edge = DdgEdge(src, dst, span, rule)
        if edge in self._edge_set:
            return
        self._edge_set.add(edge)
        self.edges.append(edge)
        self.nodes.add(src)
        self.nodes.add(dst)

    def adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, set[str]] = {}
        for edge in self.edges:
            adj.setdefault(edge.src, set()).add(edge.dst)
        return {k: sorted(v) for k, v in adj.items()}

    def reverse_adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, set[str]] = {}
        for edge in self.edges:
            adj.setdefault(edge.dst, set()).add(edge.src)
        return {k: sorted(v) for k, v in adj.items()}


@dataclass(frozen=True)
class SinkSpec:
    callee_pattern: str
    critical_args: tuple[object, ...]  # positions and/or keyword names
    category: RiskCategory = RiskCategory.CODE_EXECUTION


@dataclass
class WitnessPath:
    critical_arg: object
    nodes: tuple[str, ...]

    @property
    def text(self) -> str:
        if len(self.nodes) == 1:
            return f"{self.nodes[0]}→{self.nodes[0]}"
        return "→".join(self.nodes)


@dataclass
class GadgetCandidate:
    unit: FunctionUnit
    sink: SinkSpec
    call_site: CallSite
    witness_paths: list[WitnessPath]

    def sort_key(self) -> tuple:
        return (self.unit.fqname, self.call_site.span, self.sink.callee_pattern)


# ---------------------------------------------------------------------------
# interchange node helpers

def _kind(node: dict) -> str:
    return node.get("kind", "")


def _children(node: dict) -> list[dict]:
    return node.get("children") or []


def _literal(node: dict) -> Optional[str]:
    return node.get("literal")


def _span(node: dict) -> tuple[int, int]:
    span = node.get("span") or [0, 0]
    return (int(span[0]), int(span[-1]))


def expr_vars(node: dict) -> set[str]:
    """Vars(E): identifier roots occurring in E, function names included.

    Attribute chains and subscripts contribute only their root identifier.
    Opaque expressions contribute nothing.
    """
    kind = _kind(node)
    if kind == "name":
        text = _literal(node)
        return {text} if text else set()
    if kind in ("attribute", "subscript"):
        kids = _children(node)
        return expr_vars(kids[0]) if kids else set()
    if kind in ("constant", "opaque-expr"):
        return set()
    out: set[str] = set()
    for child in _children(node):
        out |= expr_vars(child)
    return out


def callee_text(node: dict) -> str:
    """Dotted rendering of a call's func expression for dst/sink matching."""
    kind = _kind(node)
    if kind == "name":
        return _literal(node) or "?"
    if kind == "attribute":
        kids = _children(node)
        base = callee_text(kids[0]) if kids else "?"
        return f"{base}.{_literal(node) or '?'}"
    if kind == "call":
        kids = _children(node)
        return f"{callee_text(kids[0]) if kids else '?'}()"
    if kind == "subscript":
        kids = _children(node)
        return f"{callee_text(kids[0]) if kids else '?'}[]"
    return "?"


def _receiver_root(func_node: dict) -> Optional[str]:
    """Root variable of a method call's receiver expression."""
    kids = _children(func_node)
    if not kids:
        return None
    roots = sorted(expr_vars(kids[0]))
    return roots[0] if roots else None


def _call_dst(func_node: dict, n_args: int) -> str:
    """dst(F): the callee for independent functions and non-mutating
    methods; the receiver's root variable for mutating methods."""
    if _kind(func_node) == "attribute":
        method = _literal(func_node) or ""
        mutating = method in MUTATOR_METHODS or (method == "pop" and n_args > 0)
        if mutating:
            root = _receiver_root(func_node)
            if root is not None:
                return root
    return callee_text(func_node)


# ---------------------------------------------------------------------------
# graph construction

def _iter_calls(node: dict):
    if _kind(node) == "call":
        yield node
    for child in _children(node):
        yield from _iter_calls(child)


def _call_args(call_node: dict) -> list[tuple[object, dict]]:
    """(position-or-keyword, value-expr) pairs for a call node."""
    kids = _children(call_node)
    out: list[tuple[object, dict]] = []
    pos = 0
    for child in kids[1:]:
        if _kind(child) == "keyword":
            name = _literal(child)
            value = _children(child)[0] if _children(child) else {}
            out.append((name if name else f"**{pos}", value))
        else:
            out.append((pos, child))
            pos += 1
    return out


def _apply_call_rule(graph: DdgGraph, node: dict) -> None:
    for call in _iter_calls(node):
        kids = _children(call)
        if not kids:
            continue
        func = kids[0]
        args = _call_args(call)
        dst = _call_dst(func, len(args))
        arg_sites = []
        arg_vars: set[str] = set()
        for position, value in args:
            roots = tuple(sorted(expr_vars(value)))
            arg_sites.append(ArgSite(position, roots))
            arg_vars |= set(roots)
        span = _span(call)
        for v in sorted(arg_vars):
            graph.add_edge(v, dst, span, RULE_CALL)
        graph.nodes.add(dst)
        graph.call_sites.append(CallSite(callee_text(func), span,
                                         tuple(arg_sites)))


def _walk_statements(graph: DdgGraph, stmts: Iterable[dict]) -> None:
    for stmt in stmts:
        kind = _kind(stmt)
        if kind not in STMT_KINDS and kind != "block":
            raise SchemaViolation(f"statement kind {kind!r} not in schema")
        span = _span(stmt)
        kids = _children(stmt)
        if kind == "assign":
            if len(kids) >= 2:
                value = kids[-1]
                targets = kids[:-1]
                value_vars = expr_vars(value)
                for target in targets:
                    for w in sorted(expr_vars(target)):
                        for v in sorted(value_vars):
                            graph.add_edge(v, w, span, RULE_ASSIGNMENT)
                        graph.nodes.add(w)
            _apply_call_rule(graph, stmt)
        elif kind == "aug-assign":
            if len(kids) >= 2:
                target, value = kids[0], kids[-1]
                target_vars = expr_vars(target)
                source_vars = expr_vars(value) | target_vars
                for w in sorted(target_vars):
                    for v in sorted(source_vars):
                        graph.add_edge(v, w, span, RULE_AUG_ASSIGNMENT)
            _apply_call_rule(graph, stmt)
        elif kind == "for":
            if len(kids) >= 2:
                target, iterable = kids[0], kids[1]
                for v in sorted(expr_vars(iterable)):
                    for w in sorted(expr_vars(target)):
                        graph.add_edge(v, w, span, RULE_FOR)
                _apply_call_rule(graph, iterable)
            for child in kids[2:]:
                _walk_statements(graph, _children(child))
        elif kind == "while":
            if kids:
                _apply_call_rule(graph, kids[0])
            for child in kids[1:]:
                _walk_statements(graph, _children(child))
        elif kind == "with":
            body_blocks = []
            for child in kids:
                if _kind(child) == "withitem":
                    item_kids = _children(child)
                    if not item_kids:
                        continue
                    ctx = item_kids[0]
                    _apply_call_rule(graph, ctx)
                    if len(item_kids) > 1:
                        for v in sorted(expr_vars(ctx)):
                            for w in sorted(expr_vars(item_kids[1])):
                                graph.add_edge(v, w, span, RULE_WITH)
                elif _kind(child) == "block":
                    body_blocks.append(child)
            for block in body_blocks:
                _walk_statements(graph, _children(block))
        elif kind == "if":
            if kids:
                _apply_call_rule(graph, kids[0])
            for child in kids[1:]:
                _walk_statements(graph, _children(child))
        elif kind == "return":
            if kids:
                for v in sorted(expr_vars(kids[0])):
                    graph.add_edge(v, RETURN_NODE, span, RULE_ASSIGNMENT)
                _apply_call_rule(graph, kids[0])
        elif kind == "expr-stmt":
            _apply_call_rule(graph, stmt)
        elif kind == "opaque":
            # no edges of its own, but nested statements and expressions
            # are still analyzed (visitor descends)
            for child in kids:
                if _kind(child) == "block":
                    _walk_statements(graph, _children(child))
                else:
                    _apply_call_rule(graph, child)
        elif kind == "block":
            _walk_statements(graph, kids)


def build_ddg(unit: FunctionUnit) -> DdgGraph:
    """Construct the intra-procedural data-dependency graph of one unit."""
    graph = DdgGraph()
    for param in unit.params:
        graph.nodes.add(param)
    _walk_statements(graph, unit.body)
    return graph


# ---------------------------------------------------------------------------
# reachability

def _bfs_distances(adj: dict[str, list[str]], start: str) -> dict[str, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in adj.get(cur, ()):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


def shortest_path(graph: DdgGraph, source: str, target: str
                  ) -> Optional[tuple[str, ...]]:
    """Lexicographically smallest shortest path source→target, or None."""
    if source == target:
        return (source,)
    adj = graph.adjacency()
    dist_to_target = _bfs_distances(graph.reverse_adjacency(), target)
    if source not in dist_to_target:
        return None
    path = [source]
    cur = source
    while cur != target:
        budget = dist_to_target[cur]
        step = None
        for nxt in adj.get(cur, ()):  # adjacency pre-sorted
            if dist_to_target.get(nxt, -1) == budget - 1:
                step = nxt
                break
        if step is None:
            return None
        path.append(step)
        cur = step
    return tuple(path)


def _match_sink(callee: str, pattern: str) -> bool:
    return callee == pattern


def find_candidates(unit: FunctionUnit, graph: DdgGraph,
                    sinks: list[SinkSpec]) -> list[GadgetCandidate]:
    """Emit a candidate per sink call whose critical args are all
    parameter-reachable (per-argument, parameters may differ)."""
    params = unit.flow_params
    if not params:
        return []
    candidates: list[GadgetCandidate] = []
    for site in graph.call_sites:
        for sink in sinks:
            if not _match_sink(site.callee, sink.callee_pattern):
                continue
            args_by_position = {a.position: a for a in site.args}
            witnesses: list[WitnessPath] = []
            satisfied = True
            for crit in sink.critical_args:
                arg = args_by_position.get(crit)
                if arg is None or not arg.roots:
                    satisfied = False
                    break
                best: Optional[tuple[str, ...]] = None
                for root in sorted(arg.roots):
                    for param in sorted(params):
                        path = shortest_path(graph, param, root)
                        if path is None:
                            continue
                        if best is None or (len(path), path) < (len(best), best):
                            best = path
                if best is None:
                    satisfied = False
                    break
                witnesses.append(WitnessPath(crit, best))
            if satisfied:
                candidates.append(GadgetCandidate(unit, sink, site, witnesses))
    candidates.sort(key=GadgetCandidate.sort_key)
    return candidates


def unit_has_sink_call(unit: FunctionUnit, graph: DdgGraph,
                       sinks: list[SinkSpec]) -> bool:
    return any(_match_sink(site.callee, sink.callee_pattern)
               for site in graph.call_sites for sink in sinks)


# ---------------------------------------------------------------------------
# interchange dump + sink-spec IO

def validate_unit(raw: dict) -> None:
    if not isinstance(raw.get("fqname"), str) or not raw["fqname"]:
        raise SchemaViolation("unit without fqname")
    params = raw.get("params")
    if not isinstance(params, list) or any(not isinstance(p, str) for p in params):
        raise SchemaViolation(f"{raw['fqname']}: bad params")
    if len(set(params)) != len(params):
        raise SchemaViolation(f"{raw['fqname']}: duplicate params")
    body = raw.get("body")
    if not isinstance(body, list):
        raise SchemaViolation(f"{raw['fqname']}: body is not a list")
    stack = list(body)
    while stack:
        node = stack.pop()
        if not isinstance(node, dict):
            raise SchemaViolation(f"{raw['fqname']}: non-object node")
        kind = _kind(node)
        if kind not in NODE_KINDS:
            raise SchemaViolation(f"{raw['fqname']}: unknown node kind {kind!r}")
        span = node.get("span")
        if span is not None:
            if (not isinstance(span, list) or len(span) != 2
                    or any(not isinstance(x, int) or x < 0 for x in span)
                    or span[0] > span[1]):
                raise SchemaViolation(f"{raw['fqname']}: bad span {span!r}")
        stack.extend(_children(node))


def unit_from_dict(raw: dict) -> FunctionUnit:
    validate_unit(raw)
    return FunctionUnit(
        fqname=raw["fqname"],
        params=list(raw["params"]),
        body=raw["body"],
        source_library=raw.get("source_library", ""),
        source_span=raw.get("source_span"),
        decorators=list(raw.get("decorators", [])),
    )


@dataclass
class DumpLoad:
    units: list[FunctionUnit]
    skipped: list[str]  # diagnostics per rejected unit
    source_library: str = ""


def load_dump(path: Union[str, Path]) -> DumpLoad:
    """Load an interchange AST dump; bad units are skipped with diagnostics."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        return DumpLoad([], [f"{path}: not valid JSON: {exc}"])
    if not isinstance(doc, dict) or doc.get("schema") != AST_SCHEMA:
        return DumpLoad([], [f"{path}: missing schema {AST_SCHEMA!r}"])
    library = str((doc.get("source") or {}).get("library", ""))
    units: list[FunctionUnit] = []
    skipped: list[str] = []
    for raw in doc.get("functions", []):
        try:
            unit = unit_from_dict(raw)
        except SchemaViolation as exc:
            skipped.append(str(exc))
            continue
        if not unit.source_library:
            unit.source_library = library
        units.append(unit)
    return DumpLoad(units, skipped, library)


def load_sinks(source: Union[str, Path], text: Optional[str] = None
               ) -> list[SinkSpec]:
    if text is None:
        text = Path(source).read_text(encoding="utf-8")
    records = _read_records(text, str(source), SINK_SCHEMA)
    sinks: list[SinkSpec] = []
    for fields in records:
        if len(fields) < 2:
            raise ConfigError(f"{source}: sink record needs pattern and args")
        raw_args = [a.strip() for a in fields[1].split(",") if a.strip()]
        if not raw_args:
            raise ConfigError(f"{source}: sink {fields[0]} has no critical args")
        args: list[object] = []
        for item in raw_args:
            args.append(int(item) if item.lstrip("-").isdigit() else item)
        category = RiskCategory.CODE_EXECUTION
        if len(fields) > 2 and fields[2]:
            category = RiskCategory(fields[2])
        sinks.append(SinkSpec(fields[0], tuple(args), category))
    return sinks


def default_sinks() -> list[SinkSpec]:
    from .risk_engine import _data_text

    return load_sinks("builtin:sinks.tsv", _data_text("sinks.tsv"))


# ---------------------------------------------------------------------------
# corpus runs

@dataclass
class CorpusReport:
    scanned: int = 0
    failed: int = 0
    with_sink_calls: int = 0
    candidate_count: int = 0
    reduction_rate: float = 0.0
    per_library: dict[str, dict[str, int]] = field(default_factory=dict)
    candidates: list[GadgetCandidate] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def run_corpus(units: Iterable[FunctionUnit], sinks: list[SinkSpec],
               skipped: Optional[list[str]] = None) -> CorpusReport:
    """Baseline (syntactic sink present) vs DDG-filtered candidate counts."""
    report = CorpusReport(skipped=list(skipped or []))
    report.failed = len(report.skipped)
    for unit in units:
        lib = unit.source_library or "<unknown>"
        stats = report.per_library.setdefault(
            lib, {"scanned": 0, "with_sink_calls": 0, "candidates": 0})
        report.scanned += 1
        stats["scanned"] += 1
        try:
            graph = build_ddg(unit)
        except SchemaViolation as exc:
            report.failed += 1
            report.skipped.append(f"{unit.fqname}: {exc}")
            continue
        if unit_has_sink_call(unit, graph, sinks):
            report.with_sink_calls += 1
            stats["with_sink_calls"] += 1
        unit_candidates = find_candidates(unit, graph, sinks)
        if unit_candidates:
            report.candidate_count += 1
            stats["candidates"] += 1
            report.candidates.extend(unit_candidates)
    report.candidates.sort(key=GadgetCandidate.sort_key)
    if report.with_sink_calls:
        report.reduction_rate = 1.0 - (
            report.candidate_count / report.with_sink_calls)
    return report


def render_candidate_report(report: CorpusReport) -> str:
    """Stable JSON candidate report for CI diffing."""
    doc = {
        "schema": CANDIDATE_SCHEMA,
        "summary": {
            "scanned": report.scanned,
            "failed": report.failed,
            "with_sink_calls": report.with_sink_calls,
            "candidates": report.candidate_count,
            "reduction_rate": round(report.reduction_rate, 4),
        },
        "per_library": report.per_library,
        "candidates": [
            {
                "fqname": c.unit.fqname,
                "sink": c.sink.callee_pattern,
                "call_site_span": list(c.call_site.span),
                "witness_paths": {
                    str(w.critical_arg): {
                        "nodes": list(w.nodes),
                        "text": w.text,
                    }
                    for w in c.witness_paths
                },
            }
            for c in report.candidates
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
