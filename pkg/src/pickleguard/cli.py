"""Command-line interface: scan, ddg, forge, db subcommands."""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .container_walker import WalkConfig
from .ddg import (
    default_sinks,
    load_dump,
    load_sinks,
    render_candidate_report,
    run_corpus,
)
from .report import (
    EXIT_CONFIG_ERROR,
    ScanReport,
    exit_code,
    from_structured,
    render,
    render_ddg_figure,
    render_figures,
    summary_tsv,
    to_structured,
)
from .risk_engine import (
    ClassifyConfig,
    ConfigError,
    Policy,
    Verdict,
    builtin_gadget_db,
    load_gadget_db,
    load_name_list,
)
from .scan import ScanConfig, scan_file


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pickleguard",
        description="Static scanner for pickle-based ML model files.")
    parser.add_argument("--version", action="version",
                        version=f"pickleguard {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    scan_p = sub.add_parser("scan", help="scan model files")
    scan_p.add_argument("inputs", nargs="+", type=Path)
    scan_p.add_argument("--policy", choices=[p.value for p in Policy],
                        default=Policy.HYBRID.value)
    scan_p.add_argument("--gadget-db", type=Path, default=None,
                        help="gadget database (default: built-in seed DB; "
                             "env PICKLEGUARD_DB overrides)")
    scan_p.add_argument("--allowlist", type=Path, default=None,
                        help="user allowlist file")
    scan_p.add_argument("--denylist", type=Path, default=None,
                        help="extra denylist override file")
    scan_p.add_argument("--max-depth", type=int, default=8)
    scan_p.add_argument("--node-budget", type=int, default=1 << 30,
                        help="decoded bytes allowed per container node")
    scan_p.add_argument("--scan-budget", type=int, default=4 << 30,
                        help="decoded bytes allowed per scan")
    scan_p.add_argument("--format", choices=["human", "structured"],
                        default="human")
    scan_p.add_argument("--output", type=Path, default=None,
                        help="write per-file reports here instead of stdout")
    scan_p.add_argument("--summary-tsv", type=Path, default=None,
                        help="write a delimited one-line-per-input summary")
    scan_p.add_argument("--figures", type=Path, default=None,
                        help="directory for summary figures (PNG)")
    scan_p.add_argument("--jobs", type=int, default=1)
    scan_p.add_argument("--no-recurse", action="store_true",
                        help="do not descend into subdirectories")

    ddg_p = sub.add_parser("ddg", help="data-dependency gadget discovery")
    ddg_p.add_argument("dumps", nargs="+", type=Path,
                       help="interchange AST dump files")
    ddg_p.add_argument("--sinks", type=Path, default=None,
                       help="sink-spec file (default: built-in sink set)")
    ddg_p.add_argument("--output", type=Path, default=None)
    ddg_p.add_argument("--figures", type=Path, default=None)

    forge_p = sub.add_parser("forge", help="generate the fixture corpus")
    forge_p.add_argument("--out-dir", type=Path, required=True)
    forge_p.add_argument("--family", default=None,
                         help="emit only fixtures of this family")
    forge_p.add_argument("--seed", type=int, default=0)

    db_p = sub.add_parser("db", help="gadget database diagnostics")
    db_p.add_argument("action", choices=["verify", "list"])
    db_p.add_argument("--gadget-db", type=Path, default=None)
    return parser


def _resolve_db_path(flag: Optional[Path]) -> Optional[Path]:
    if flag is not None:
        return flag
    env = os.environ.get("PICKLEGUARD_DB")
    return Path(env) if env else None


def _collect_inputs(inputs: list[Path], recurse: bool) -> list[Path]:
    files: list[Path] = []
    for item in inputs:
        if item.is_symlink():
            continue
        if item.is_dir():
            pattern = "**/*" if recurse else "*"
            for child in sorted(item.glob(pattern)):
                if child.is_file() and not child.is_symlink():
                    files.append(child)
        else:
            files.append(item)
    return files


_WORKER_CONFIG: Optional[ScanConfig] = None


def _worker_init(config: ScanConfig) -> None:
    global _WORKER_CONFIG
    _WORKER_CONFIG = config


def _worker_scan(path_str: str) -> str:
    from .pickle_vm import AnomalyKind, StreamAnomaly

    try:
        report = scan_file(Path(path_str), _WORKER_CONFIG)
    except BaseException as exc:  # worker panic → UNSCANNABLE for this file
        report = ScanReport(
            input_path=path_str,
            verdict=Verdict.UNSCANNABLE_SUSPICIOUS,
            findings=[],
            anomalies=[StreamAnomaly(AnomalyKind.WORKER_FAILURE, None,
                                     f"{type(exc).__name__}: {exc}")],
            container_tree=None,
            loading_paths=[],
            stats={"input_bytes": 0, "pickle_leaves": 0,
                   "elapsed_seconds": 0.0, "budget": {}},
            versions={"tool": __version__},
        )
    return to_structured(report)


def _cmd_scan(args: argparse.Namespace) -> int:
    try:
        db_path = _resolve_db_path(args.gadget_db)
        db = load_gadget_db(db_path) if db_path else builtin_gadget_db()
        classify_config = ClassifyConfig(
            policy=Policy(args.policy),
            extra_denylist=load_name_list(args.denylist)
            if args.denylist else None,
            user_allowlist=load_name_list(args.allowlist)
            if args.allowlist else None,
        )
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    config = ScanConfig(
        classify=classify_config,
        walk=WalkConfig(args.max_depth, args.node_budget, args.scan_budget),
        db=db,
        db_label=str(db_path) if db_path else "builtin",
    )
    files = _collect_inputs(args.inputs, not args.no_recurse)
    texts: list[str] = []
    if args.jobs > 1 and len(files) > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=args.jobs, initializer=_worker_init,
                initargs=(config,)) as pool:
            texts = list(pool.map(_worker_scan, [str(f) for f in files]))
    else:
        _worker_init(config)
        texts = [_worker_scan(str(f)) for f in files]
    reports = [from_structured(t) for t in texts]

    out_lines = []
    for text, rep in zip(texts, reports):
        out_lines.append(text if args.format == "structured"
                         else render(rep, "human"))
    body = "".join(out_lines) if args.format == "structured" \
        else "\n".join(out_lines)
    if args.output:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    if args.summary_tsv:
        args.summary_tsv.parent.mkdir(parents=True, exist_ok=True)
        args.summary_tsv.write_text(summary_tsv(reports), encoding="utf-8")
    if args.figures:
        render_figures(reports, args.figures)
    if args.format == "human" and len(reports) > 1:
        counts: dict[str, int] = {}
        for rep in reports:
            counts[rep.verdict.value] = counts.get(rep.verdict.value, 0) + 1
        summary = ", ".join(f"{k}: {v}" for k, v in sorted(counts.items()))
        sys.stdout.write(f"\nscanned {len(reports)} files — {summary}\n")
    return max((exit_code(r.verdict) for r in reports), default=0)


def _cmd_ddg(args: argparse.Namespace) -> int:
    try:
        sinks = load_sinks(args.sinks) if args.sinks else default_sinks()
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    units = []
    skipped: list[str] = []
    for dump_path in args.dumps:
        loaded = load_dump(dump_path)
        units.extend(loaded.units)
        skipped.extend(loaded.skipped)
    corpus = run_corpus(units, sinks, skipped)
    text = render_candidate_report(corpus)
    if args.output:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.figures:
        render_ddg_figure(corpus.per_library, args.figures)
    return 0


def _cmd_forge(args: argparse.Namespace) -> int:
    from .fixture_forge import PATH_FAMILIES, EOP_IDS, build_corpus

    if args.family is not None:
        known = set(PATH_FAMILIES) | set(EOP_IDS)
        if args.family not in known:
            print(f"configuration error: unknown family {args.family!r}",
                  file=sys.stderr)
            return EXIT_CONFIG_ERROR
    entries = build_corpus(args.out_dir, args.seed)
    if args.family is not None:
        entries = [e for e in entries if e.family == args.family]
    print(f"wrote {len(entries)} fixtures under {args.out_dir}")
    return 0


def _cmd_db(args: argparse.Namespace) -> int:
    db_path = _resolve_db_path(args.gadget_db)
    try:
        db = load_gadget_db(db_path) if db_path else builtin_gadget_db()
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.action == "verify":
        print(f"OK: {len(db)} entries")
        for category, count in db.histogram().items():
            print(f"  {category:<20} {count}")
        return 0
    for fqname in sorted(db.entries):
        entry = db.entries[fqname]
        print(f"{fqname}\t{entry.kind}\t{entry.category.value}"
              f"\t{entry.source_library}")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; remap to the config-error contract
        if exc.code not in (0, None):
            return EXIT_CONFIG_ERROR
        return 0
    handlers = {
        "scan": _cmd_scan,
        "ddg": _cmd_ddg,
        "forge": _cmd_forge,
        "db": _cmd_db,
    }
    return handlers[args.subcommand](args)


if __name__ == "__main__":
    sys.exit(main())
