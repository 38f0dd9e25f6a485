"""Deterministic scan reports: structured JSON, human text, summary TSV,
optional matplotlib figures, and the exit-code contract."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import __version__
from .container_walker import ContainerNode, LoadingPathLabel
from .pickle_vm import AnomalyKind, ImportRef, StreamAnomaly
from .risk_engine import Finding, RiskCategory, Severity, Verdict

REPORT_SCHEMA = "pickleguard-report/1"

EXIT_CLEAN = 0
EXIT_SUSPICIOUS = 1
EXIT_MALICIOUS = 2
EXIT_UNSCANNABLE = 3
EXIT_CONFIG_ERROR = 64


def exit_code(verdict: Verdict) -> int:
    return {
        Verdict.CLEAN: EXIT_CLEAN,
        Verdict.SUSPICIOUS: EXIT_SUSPICIOUS,
        Verdict.MALICIOUS: EXIT_MALICIOUS,
        Verdict.UNSCANNABLE_SUSPICIOUS: EXIT_UNSCANNABLE,
    }[verdict]


@dataclass
class ScanReport:
    input_path: str
    verdict: Verdict
    findings: list[Finding]
    anomalies: list[StreamAnomaly]
    container_tree: Optional[dict]
    loading_paths: list[LoadingPathLabel]
    stats: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)


def summarize_tree(node: ContainerNode) -> dict:
    return {
        "format": node.format.value,
        "member_name": node.member_name,
        "byte_len": node.byte_len,
        "torch_legacy": node.torch_legacy,
        "has_pickle": node.pickle_result is not None,
        "anomaly_count": len(node.anomalies),
        "children": [summarize_tree(child) for child in node.children],
    }


def _finding_dict(f: Finding) -> dict:
    return {
        "module": f.import_ref.module,
        "name": f.import_ref.name,
        "fqname": f.import_ref.fqname,
        "resolved_by": f.import_ref.resolved_by,
        "category": f.category.value,
        "severity": f.severity.value,
        "loading_path": f.loading_path.text if f.loading_path else "",
        "table1_row": f.loading_path.table1_row if f.loading_path else "",
        "member_path": f.member_path,
        "offset": f.offset,
        "evidence": f.evidence,
    }


def _anomaly_dict(a: StreamAnomaly) -> dict:
    return {
        "kind": a.kind.value,
        "offset": a.offset,
        "detail": a.detail,
    }


def to_structured(report: ScanReport) -> str:
    doc = {
        "schema": REPORT_SCHEMA,
        "input_path": report.input_path,
        "verdict": report.verdict.value,
        "findings": [_finding_dict(f) for f in report.findings],
        "anomalies": [_anomaly_dict(a)
                      for a in sorted(report.anomalies, key=StreamAnomaly.key)],
        "container_tree": report.container_tree,
        "loading_paths": [
            {"chain": label.text, "table1_row": label.table1_row}
            for label in report.loading_paths
        ],
        "stats": report.stats,
        "versions": report.versions,
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def from_structured(text: str) -> ScanReport:
    doc = json.loads(text)
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"not a {REPORT_SCHEMA} document")
    findings = []
    for f in doc.get("findings", []):
        label = None
        if f.get("loading_path"):
            label = LoadingPathLabel(tuple(f["loading_path"].split("→")),
                                     f.get("table1_row", "unlisted"))
        findings.append(Finding(
            import_ref=ImportRef(f["module"], f["name"], f["resolved_by"]),
            category=RiskCategory(f["category"]),
            severity=Severity(f["severity"]),
            loading_path=label,
            member_path=f.get("member_path", ""),
            offset=f.get("offset", 0),
            evidence=f.get("evidence", ""),
        ))
    anomalies = [
        StreamAnomaly(AnomalyKind(a["kind"]), a.get("offset"),
                      a.get("detail", ""))
        for a in doc.get("anomalies", [])
    ]
    paths = [
        LoadingPathLabel(tuple(p["chain"].split("→")), p["table1_row"])
        for p in doc.get("loading_paths", [])
    ]
    return ScanReport(
        input_path=doc["input_path"],
        verdict=Verdict(doc["verdict"]),
        findings=findings,
        anomalies=anomalies,
        container_tree=doc.get("container_tree"),
        loading_paths=paths,
        stats=doc.get("stats", {}),
        versions=doc.get("versions", {}),
    )


_TIMING_RE = re.compile(r'"elapsed_seconds": [0-9.eE+-]+')


def mask_timing(structured_text: str) -> str:
    return _TIMING_RE.sub('"elapsed_seconds": 0', structured_text)


_BANNER = {
    Verdict.CLEAN: "CLEAN",
    Verdict.SUSPICIOUS: "SUSPICIOUS",
    Verdict.MALICIOUS: "MALICIOUS",
    Verdict.UNSCANNABLE_SUSPICIOUS: "UNSCANNABLE-SUSPICIOUS",
}


def to_human(report: ScanReport) -> str:
    lines = []
    lines.append("=" * 64)
    lines.append(f"{_BANNER[report.verdict]:^64}")
    lines.append("=" * 64)
    lines.append(f"input: {report.input_path}")
    if report.loading_paths:
        rows = ", ".join(sorted({
            f"{p.text} [{p.table1_row}]" for p in report.loading_paths}))
        lines.append(f"loading paths: {rows}")
    if report.findings:
        lines.append("")
        lines.append(f"{'severity':<10} {'category':<18} {'import':<40} offset")
        lines.append("-" * 80)
        for f in report.findings:
            lines.append(
                f"{f.severity.value:<10} {f.category.value:<18} "
                f"{f.import_ref.fqname:<40} {f.offset}")
            if f.member_path:
                lines.append(f"{'':10} member: {f.member_path}")
            if f.evidence:
                lines.append(f"{'':10} args: {f.evidence}")
    if report.anomalies:
        lines.append("")
        lines.append(f"anomalies ({len(report.anomalies)}):")
        for a in sorted(report.anomalies, key=StreamAnomaly.key):
            where = "" if a.offset is None else f" @{a.offset}"
            detail = f": {a.detail}" if a.detail else ""
            lines.append(f"  - {a.kind.value}{where}{detail}")
    lines.append("")
    return "\n".join(lines)


def render(report: ScanReport, format: str = "human") -> str:
    if format == "structured":
        return to_structured(report)
    if format == "human":
        return to_human(report)
    raise ValueError(f"unknown format {format!r}")


SUMMARY_COLUMNS = ("input_path", "verdict", "findings", "max_severity",
                   "anomalies", "loading_paths")


def summary_tsv(reports: Iterable[ScanReport]) -> str:
    """Delimited one-line-per-input summary (input order preserved)."""
    lines = ["\t".join(SUMMARY_COLUMNS)]
    for r in reports:
        max_sev = max((f.severity for f in r.findings),
                      key=lambda s: s.rank, default=None)
        paths = ",".join(sorted({p.table1_row for p in r.loading_paths}))
        lines.append("\t".join([
            r.input_path,
            r.verdict.value,
            str(len(r.findings)),
            max_sev.value if max_sev else "",
            str(len(r.anomalies)),
            paths,
        ]))
    return "\n".join(lines) + "\n"


def render_figures(reports: list[ScanReport], out_dir: Path) -> list[Path]:
    """Verdict and finding-category histograms as PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    verdict_counts = {v.value: 0 for v in Verdict}
    for r in reports:
        verdict_counts[r.verdict.value] += 1
    fig, ax = plt.subplots(figsize=(7, 4))
    names = list(verdict_counts)
    values = [verdict_counts[n] for n in names]
    colors = ["#2a9d2a", "#e0a800", "#e07b00", "#c01010"]
    ax.bar(names, values, color=colors[:len(names)])
    ax.set_ylabel("files")
    ax.set_title("scan verdicts")
    ax.tick_params(axis="x", labelrotation=15)
    fig.tight_layout()
    path = out_dir / "verdicts.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    category_counts: dict[str, int] = {}
    for r in reports:
        for f in r.findings:
            category_counts[f.category.value] = \
                category_counts.get(f.category.value, 0) + 1
    if category_counts:
        fig, ax = plt.subplots(figsize=(7, 4))
        names = sorted(category_counts)
        ax.bar(names, [category_counts[n] for n in names], color="#4063a8")
        ax.set_ylabel("findings")
        ax.set_title("finding categories")
        ax.tick_params(axis="x", labelrotation=25)
        fig.tight_layout()
        path = out_dir / "finding_categories.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_ddg_figure(per_library: dict[str, dict[str, int]],
                      out_dir: Path) -> Path:
    """Baseline vs DDG-filtered candidates per library."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    libs = sorted(per_library)
    baseline = [per_library[lib]["with_sink_calls"] for lib in libs]
    filtered = [per_library[lib]["candidates"] for lib in libs]
    x = range(len(libs))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar([i - 0.2 for i in x], baseline, width=0.4, label="sink-containing",
           color="#9aa7b8")
    ax.bar([i + 0.2 for i in x], filtered, width=0.4, label="candidates",
           color="#4063a8")
    ax.set_xticks(list(x))
    ax.set_xticklabels(libs, rotation=15)
    ax.set_ylabel("function units")
    ax.set_title("search-space reduction")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "search_space_reduction.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
