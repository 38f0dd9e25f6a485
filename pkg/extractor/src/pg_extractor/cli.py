"""pg-extract command line interface."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .extract import extract, extract_stdlib, schema_check


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pg-extract",
        description="Emit function-level interchange AST dumps.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    ex = sub.add_parser("extract", help="extract a source tree or stdlib module")
    ex.add_argument("--root", type=Path, default=None,
                    help="source tree to walk")
    ex.add_argument("--out", type=Path, required=True)
    ex.add_argument("--stdlib", nargs="*", default=[],
                    help="importable stdlib module names (package roots)")
    ex.add_argument("--library", default=None,
                    help="library name recorded in the dump")
    ex.add_argument("--lib-version", default="",
                    help="library version recorded in the dump")

    ck = sub.add_parser("check", help="validate a dump against the schema")
    ck.add_argument("dump", type=Path)

    args = parser.parse_args(argv)
    if args.subcommand == "check":
        violations = schema_check(args.dump)
        if violations:
            for v in violations:
                print(f"violation: {v}")
            return 1
        print("ok")
        return 0

    if args.stdlib:
        if len(args.stdlib) > 1 and args.out.suffix:
            parser.error("multiple --stdlib modules need --out DIRECTORY")
        rc = 0
        for module in args.stdlib:
            out = (args.out if len(args.stdlib) == 1
                   else args.out / f"{module}.json")
            try:
                manifest = extract_stdlib(module, out)
            except FileNotFoundError as exc:
                print(f"error: {exc}", file=sys.stderr)
                rc = 1
                continue
            print(f"{module}: {manifest.functions_emitted} functions "
                  f"from {manifest.files_scanned} files -> {out}")
        return rc
    if args.root is None:
        parser.error("need --root or --stdlib")
    manifest = extract(args.root, args.out, library=args.library,
                       version=args.lib_version)
    print(f"{manifest.library}: {manifest.functions_emitted} functions "
          f"from {manifest.files_scanned} files -> {args.out}")
    if manifest.files_skipped:
        print(f"  skipped files: {len(manifest.files_skipped)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
