"""Import/call classification and verdict aggregation.

The hybrid policy mirrors the operating point of hub scanners: denylist and
gadget-database hits are flagged outright, everything else off the default
allowlist surfaces as a deduplicated unknown-import finding. Anomalies can
only raise a verdict, never lower it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Union

from .container_walker import LoadingPathLabel
from .pickle_vm import CallEvent, ImportRef, ImportSighting, StreamAnomaly

LIST_SCHEMA = "pickleguard-list/1"
GADGET_SCHEMA = "pickleguard-gadget-db/1"

_EVIDENCE_LIMIT = 256


class ConfigError(ValueError):
    """Bad configuration input (gadget DB, list files). Fails fast."""


class RiskCategory(str, enum.Enum):
    CODE_EXECUTION = "code_execution"
    FILE_MANIPULATION = "file_manipulation"
    NETWORK_ACCESS = "network_access"
    AUXILIARY = "auxiliary"
    HELPER_GADGET = "helper_gadget"
    ATTACK_GADGET = "attack_gadget"
    UNKNOWN_IMPORT = "unknown_import"


class Severity(str, enum.Enum):
    INFO = "info"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"

    @property
    def rank(self) -> int:
        return _SEVERITY_RANK[self]


_SEVERITY_RANK = {
    Severity.INFO: 0,
    Severity.MEDIUM: 1,
    Severity.HIGH: 2,
    Severity.CRITICAL: 3,
}


class Verdict(str, enum.Enum):
    CLEAN = "CLEAN"
    UNSCANNABLE_SUSPICIOUS = "UNSCANNABLE-SUSPICIOUS"
    SUSPICIOUS = "SUSPICIOUS"
    MALICIOUS = "MALICIOUS"

    @property
    def rank(self) -> int:
        return _VERDICT_RANK[self]


_VERDICT_RANK = {
    Verdict.CLEAN: 0,
    Verdict.UNSCANNABLE_SUSPICIOUS: 1,
    Verdict.SUSPICIOUS: 2,
    Verdict.MALICIOUS: 3,
}


class Policy(str, enum.Enum):
    DENYLIST_ONLY = "denylist-only"
    HYBRID = "hybrid"
    STRICT_ALLOWLIST = "strict-allowlist"


@dataclass(frozen=True)
class GadgetEntry:
    fqname: str
    kind: str  # attack | helper
    category: RiskCategory
    source_library: str = ""
    needs_attr_access: bool = False
    notes: str = ""


@dataclass
class GadgetDatabase:
    entries: dict[str, GadgetEntry] = field(default_factory=dict)
    version: str = GADGET_SCHEMA

    def lookup(self, fqname: str) -> Optional[GadgetEntry]:
        return self.entries.get(fqname)

    def __len__(self) -> int:
        return len(self.entries)

    def histogram(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for entry in self.entries.values():
            counts[entry.category.value] = counts.get(entry.category.value, 0) + 1
        return dict(sorted(counts.items()))


@dataclass(frozen=True)
class Finding:
    import_ref: ImportRef
    category: RiskCategory
    severity: Severity
    loading_path: Optional[LoadingPathLabel]
    member_path: str
    offset: int
    evidence: str

    def sort_key(self) -> tuple:
        return (-self.severity.rank, self.member_path, self.offset,
                self.import_ref.fqname)


class NameMatcher:
    """Exact fqname matching plus trailing prefix wildcards (os.*)."""

    def __init__(self, entries: Iterable[tuple[str, Optional[RiskCategory]]]):
        self.exact: dict[str, Optional[RiskCategory]] = {}
        self.prefixes: dict[str, Optional[RiskCategory]] = {}
        for name, category in entries:
            if name.endswith(".*"):
                self.prefixes[name[:-2]] = category
            else:
                self.exact[name] = category

    def match(self, fqname: str) -> tuple[bool, Optional[RiskCategory]]:
        if fqname in self.exact:
            return True, self.exact[fqname]
        parts = fqname.split(".")
        for i in range(len(parts) - 1, 0, -1):
            prefix = ".".join(parts[:i])
            if prefix in self.prefixes:
                return True, self.prefixes[prefix]
        return False, None

    def __contains__(self, fqname: str) -> bool:
        return self.match(fqname)[0]


def _read_records(text: str, source: str, expected_schema: str
                  ) -> list[list[str]]:
    lines = text.splitlines()
    records: list[list[str]] = []
    schema_seen = False
    for idx, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if not schema_seen:
            if not line.startswith("schema:"):
                raise ConfigError(
                    f"{source}:{idx}: missing schema header, "
                    f"expected 'schema: {expected_schema}'")
            stated = line.split(":", 1)[1].strip()
            if stated != expected_schema:
                raise ConfigError(
                    f"{source}:{idx}: schema {stated!r} is not "
                    f"{expected_schema!r}")
            schema_seen = True
            continue
        records.append([f.strip() for f in line.split("\t")])
    if not schema_seen and records:
        raise ConfigError(f"{source}: missing schema header")
    return records


def load_gadget_db(source: Union[str, Path], text: Optional[str] = None
                   ) -> GadgetDatabase:
    """Parse a gadget database document; duplicate fqnames are fatal."""
    if text is None:
        text = Path(source).read_text(encoding="utf-8")
    records = _read_records(text, str(source), GADGET_SCHEMA)
    db = GadgetDatabase()
    duplicates: list[str] = []
    for fields in records:
        if len(fields) < 3:
            raise ConfigError(
                f"{source}: record needs at least fqname/kind/category, "
                f"got {fields!r}")
        fqname, kind, category = fields[0], fields[1], fields[2]
        if kind not in ("attack", "helper"):
            raise ConfigError(f"{source}: bad kind {kind!r} for {fqname}")
        try:
            cat = RiskCategory(category)
        except ValueError as exc:
            raise ConfigError(
                f"{source}: bad category {category!r} for {fqname}") from exc
        if kind == "helper" and cat is not RiskCategory.HELPER_GADGET:
            raise ConfigError(
                f"{source}: helper entry {fqname} must use helper_gadget")
        if fqname in db.entries:
            duplicates.append(fqname)
            continue
        db.entries[fqname] = GadgetEntry(
            fqname=fqname,
            kind=kind,
            category=cat,
            source_library=fields[3] if len(fields) > 3 else "",
            needs_attr_access=(fields[4].lower() in ("yes", "true", "1"))
            if len(fields) > 4 else False,
            notes=fields[5] if len(fields) > 5 else "",
        )
    if duplicates:
        raise ConfigError(
            f"{source}: duplicate fqnames: {', '.join(sorted(set(duplicates)))}")
    return db


def load_name_list(source: Union[str, Path], text: Optional[str] = None
                   ) -> NameMatcher:
    """Parse an allow/deny list: fqname [<TAB> category]."""
    if text is None:
        text = Path(source).read_text(encoding="utf-8")
    records = _read_records(text, str(source), LIST_SCHEMA)
    entries = []
    for fields in records:
        category = None
        if len(fields) > 1 and fields[1]:
            try:
                category = RiskCategory(fields[1])
            except ValueError as exc:
                raise ConfigError(
                    f"{source}: bad category {fields[1]!r} for {fields[0]}"
                ) from exc
        entries.append((fields[0], category))
    return NameMatcher(entries)


def _data_text(name: str) -> str:
    return resources.files("pickleguard.data").joinpath(name).read_text("utf-8")


def builtin_denylist() -> NameMatcher:
    return load_name_list("builtin:denylist.tsv", _data_text("denylist.tsv"))


def builtin_allowlist() -> NameMatcher:
    return load_name_list("builtin:allowlist.tsv", _data_text("allowlist.tsv"))


def builtin_gadget_db() -> GadgetDatabase:
    return load_gadget_db("builtin:gadget_db.tsv", _data_text("gadget_db.tsv"))


_BARE_SEVERITY = {
    RiskCategory.CODE_EXECUTION: Severity.HIGH,
    RiskCategory.ATTACK_GADGET: Severity.HIGH,
    RiskCategory.FILE_MANIPULATION: Severity.MEDIUM,
    RiskCategory.NETWORK_ACCESS: Severity.MEDIUM,
    RiskCategory.AUXILIARY: Severity.MEDIUM,
    RiskCategory.HELPER_GADGET: Severity.MEDIUM,
    RiskCategory.UNKNOWN_IMPORT: Severity.INFO,
}

_CALLED_SEVERITY = {
    RiskCategory.CODE_EXECUTION: Severity.CRITICAL,
    RiskCategory.ATTACK_GADGET: Severity.CRITICAL,
    RiskCategory.FILE_MANIPULATION: Severity.HIGH,
    RiskCategory.NETWORK_ACCESS: Severity.HIGH,
    RiskCategory.AUXILIARY: Severity.HIGH,
    RiskCategory.HELPER_GADGET: Severity.HIGH,
    RiskCategory.UNKNOWN_IMPORT: Severity.MEDIUM,
}


@dataclass
class ClassifyConfig:
    policy: Policy = Policy.HYBRID
    denylist: Optional[NameMatcher] = None
    allowlist: Optional[NameMatcher] = None
    extra_denylist: Optional[NameMatcher] = None
    user_allowlist: Optional[NameMatcher] = None

    def __post_init__(self):
        if self.denylist is None:
            self.denylist = builtin_denylist()
        if self.allowlist is None:
            self.allowlist = builtin_allowlist()


def classify(
    sightings: Iterable[ImportSighting],
    calls: Iterable[CallEvent],
    db: GadgetDatabase,
    config: ClassifyConfig,
    loading_path: Optional[LoadingPathLabel] = None,
    member_path: str = "",
) -> list[Finding]:
    """Classify resolved imports into findings under the selected policy."""
    calls_by_ref: dict[ImportRef, list[CallEvent]] = {}
    for call in calls:
        calls_by_ref.setdefault(call.callee, []).append(call)

    first_sighting: dict[ImportRef, int] = {}
    for s in sightings:
        first_sighting.setdefault(s.ref, s.offset)

    findings: list[Finding] = []
    for ref, import_offset in first_sighting.items():
        ref_calls = calls_by_ref.get(ref, [])
        called = bool(ref_calls)

        category: Optional[RiskCategory] = None
        hit, denied_cat = config.denylist.match(ref.fqname)
        if not hit and config.extra_denylist is not None:
            hit, denied_cat = config.extra_denylist.match(ref.fqname)
        if hit:
            category = denied_cat or RiskCategory.CODE_EXECUTION
        else:
            entry = db.lookup(ref.fqname)
            if entry is not None:
                category = (RiskCategory.ATTACK_GADGET if entry.kind == "attack"
                            else RiskCategory.HELPER_GADGET)
            elif config.policy is Policy.DENYLIST_ONLY:
                continue
            elif config.policy is Policy.HYBRID:
                allowed = ref.fqname in config.allowlist or (
                    config.user_allowlist is not None
                    and ref.fqname in config.user_allowlist)
                if allowed:
                    continue
                category = RiskCategory.UNKNOWN_IMPORT
            else:  # strict allowlist: only the user-supplied list counts
                if (config.user_allowlist is not None
                        and ref.fqname in config.user_allowlist):
                    continue
                category = RiskCategory.UNKNOWN_IMPORT

        severity = (_CALLED_SEVERITY if called else _BARE_SEVERITY)[category]
        # findings anchor at the opcode that resolved the import; call
        # arguments surface as evidence
        offset = import_offset
        evidence = ""
        if ref_calls:
            first_call = min(ref_calls, key=lambda c: c.offset)
            evidence = ", ".join(first_call.arg_summary)[:_EVIDENCE_LIMIT]
        findings.append(Finding(
            import_ref=ref,
            category=category,
            severity=severity,
            loading_path=loading_path,
            member_path=member_path,
            offset=offset,
            evidence=evidence,
        ))
    findings.sort(key=Finding.sort_key)
    return findings


def findings_from_anomalies(
    anomalies: Iterable[StreamAnomaly],
    loading_path: Optional[LoadingPathLabel] = None,
    member_path: str = "",
) -> list[Finding]:
    """Conservative findings for unresolvable imports (anti-bypass)."""
    from .pickle_vm import AnomalyKind

    findings = []
    for anomaly in anomalies:
        if anomaly.kind is AnomalyKind.UNRESOLVED_IMPORT:
            findings.append(Finding(
                import_ref=ImportRef("<unresolved>", "<unresolved>",
                                     "STACK_GLOBAL"),
                category=RiskCategory.UNKNOWN_IMPORT,
                severity=Severity.MEDIUM,
                loading_path=loading_path,
                member_path=member_path,
                offset=anomaly.offset or 0,
                evidence=anomaly.detail[:_EVIDENCE_LIMIT],
            ))
    return findings


def aggregate(findings: Iterable[Finding],
              anomalies: Iterable[StreamAnomaly]) -> Verdict:
    """Fold findings and anomalies into the verdict lattice.

    Anomalies only ever raise the verdict (UNSCANNABLE-SUSPICIOUS floor);
    they never mask or lower a finding-driven verdict.
    """
    findings = list(findings)
    anomalies = list(anomalies)
    if any(f.severity.rank >= Severity.HIGH.rank for f in findings):
        return Verdict.MALICIOUS
    if findings:
        return Verdict.SUSPICIOUS
    if anomalies:
        return Verdict.UNSCANNABLE_SUSPICIOUS
    return Verdict.CLEAN
