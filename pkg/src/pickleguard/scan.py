"""Scan orchestration: bytes → container walk → classification → report."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .container_walker import (
    ContainerNode,
    WalkConfig,
    label_path,
    unwrap,
)
from .pickle_vm import AnomalyKind, StreamAnomaly
from .report import ScanReport, summarize_tree
from .risk_engine import (
    ClassifyConfig,
    Finding,
    GadgetDatabase,
    Verdict,
    aggregate,
    builtin_gadget_db,
    classify,
    findings_from_anomalies,
)


@dataclass
class ScanConfig:
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    walk: WalkConfig = field(default_factory=WalkConfig)
    db: Optional[GadgetDatabase] = None
    db_label: str = "builtin"

    def __post_init__(self):
        if self.db is None:
            self.db = builtin_gadget_db()


def _member_path(trail) -> str:
    names = [node.member_name for node in trail if node.member_name]
    return "/".join(names)


def scan_bytes(data: bytes, input_path: str = "<bytes>",
               config: Optional[ScanConfig] = None,
               extension: str = "") -> ScanReport:
    """Scan one in-memory blob. Never raises on any input."""
    config = config or ScanConfig()
    started = time.monotonic()
    tree = unwrap(data, 0, config.walk, extension=extension)
    findings: list[Finding] = []
    loading_paths = []
    leaves = 0
    for trail in tree.iter_pickle_leaves():
        leaf = trail[-1]
        leaves += 1
        label = label_path(trail)
        loading_paths.append(label)
        member = _member_path(trail)
        result = leaf.pickle_result
        findings.extend(classify(
            result.sightings, result.calls, config.db, config.classify,
            loading_path=label, member_path=member))
        findings.extend(findings_from_anomalies(
            result.anomalies, loading_path=label, member_path=member))
    anomalies = list(tree.iter_anomalies())
    findings.sort(key=Finding.sort_key)
    verdict = aggregate(findings, anomalies)
    elapsed = time.monotonic() - started
    return ScanReport(
        input_path=input_path,
        verdict=verdict,
        findings=findings,
        anomalies=anomalies,
        container_tree=summarize_tree(tree),
        loading_paths=loading_paths,
        stats={
            "input_bytes": len(data),
            "pickle_leaves": leaves,
            "elapsed_seconds": round(elapsed, 6),
            "budget": {
                "max_depth": config.walk.max_depth,
                "node_budget_bytes": config.walk.node_budget_bytes,
                "scan_budget_bytes": config.walk.scan_budget_bytes,
            },
        },
        versions={
            "tool": __version__,
            "gadget_db": config.db_label,
            "policy": config.classify.policy.value,
        },
    )


def scan_file(path: Path, config: Optional[ScanConfig] = None,
              display_path: Optional[str] = None) -> ScanReport:
    """Scan one file; unreadable input degrades to UNSCANNABLE-SUSPICIOUS."""
    config = config or ScanConfig()
    shown = display_path if display_path is not None else str(path)
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        return ScanReport(
            input_path=shown,
            verdict=Verdict.UNSCANNABLE_SUSPICIOUS,
            findings=[],
            anomalies=[StreamAnomaly(AnomalyKind.UNREADABLE_INPUT, None,
                                     str(exc))],
            container_tree=None,
            loading_paths=[],
            stats={"input_bytes": 0, "pickle_leaves": 0,
                   "elapsed_seconds": 0.0,
                   "budget": {
                       "max_depth": config.walk.max_depth,
                       "node_budget_bytes": config.walk.node_budget_bytes,
                       "scan_budget_bytes": config.walk.scan_budget_bytes,
                   }},
            versions={"tool": __version__, "gadget_db": config.db_label,
                      "policy": config.classify.policy.value},
        )
    ext = path.suffix.lstrip(".").lower() if isinstance(path, Path) else ""
    return scan_bytes(data, shown, config, extension=ext)
