"""End-to-end command-line behavior."""

import json
import pickle

import pytest

from pickleguard.cli import main
from pickleguard.report import EXIT_CONFIG_ERROR, mask_timing

DB_HEADER = "schema: pickleguard-gadget-db/1\n"


def run_cli(*argv):
    return main(list(argv))


class TestScanCommand:
    def test_corpus_scan_counts(self, corpus_dir, capsys):
        rc = run_cli(
            "scan", str(corpus_dir / "paths"),
            "--denylist", str(corpus_dir / "canary_denylist.tsv"),
            "--format", "human")
        out = capsys.readouterr().out
        assert rc == 2  # MALICIOUS fixtures dominate
        assert "MALICIOUS: 24" in out  # 22 families, two twin fixtures

    def test_structured_output_and_summary(self, corpus_dir, tmp_path,
                                           capsys):
        out_file = tmp_path / "reports.json"
        tsv_file = tmp_path / "summary.tsv"
        rc = run_cli(
            "scan", str(corpus_dir / "eop"),
            "--denylist", str(corpus_dir / "canary_denylist.tsv"),
            "--format", "structured", "--output", str(out_file),
            "--summary-tsv", str(tsv_file))
        assert rc == 2
        text = out_file.read_text()
        assert text.count('"schema": "pickleguard-report/1"') == 9
        lines = tsv_file.read_text().strip().splitlines()
        assert len(lines) == 10  # header + 9 EOP fixtures

    def test_empty_directory(self, tmp_path, capsys):
        empty = tmp_path / "nothing"
        empty.mkdir()
        rc = run_cli("scan", str(empty))
        assert rc == 0

    def test_strict_allowlist_flags_benign_pickle(self, tmp_path):
        import collections

        target = tmp_path / "od.pkl"
        target.write_bytes(pickle.dumps(collections.OrderedDict(a=1), 2))
        rc = run_cli("scan", str(target), "--policy", "strict-allowlist")
        assert rc == 1  # SUSPICIOUS

    def test_hybrid_passes_benign_pickle(self, tmp_path):
        import collections

        target = tmp_path / "od.pkl"
        target.write_bytes(pickle.dumps(collections.OrderedDict(a=1), 2))
        assert run_cli("scan", str(target)) == 0

    def test_unreadable_file_is_unscannable(self, tmp_path):
        rc = run_cli("scan", str(tmp_path / "missing.pkl"))
        assert rc == 3

    def test_bad_flag_maps_to_config_error(self):
        assert run_cli("scan", "--bogus-flag") == EXIT_CONFIG_ERROR

    def test_bad_denylist_file_is_config_error(self, tmp_path):
        bad = tmp_path / "deny.tsv"
        bad.write_text("no schema header here\tcode_execution\n")
        target = tmp_path / "f.pkl"
        target.write_bytes(pickle.dumps([1], 2))
        rc = run_cli("scan", str(target), "--denylist", str(bad))
        assert rc == EXIT_CONFIG_ERROR

    def test_figures_emitted(self, corpus_dir, tmp_path):
        figs = tmp_path / "figs"
        rc = run_cli(
            "scan", str(corpus_dir / "gadgets"),
            "--figures", str(figs), "--format", "structured",
            "--output", str(tmp_path / "out.json"))
        assert rc == 2
        assert (figs / "verdicts.png").exists()
        assert (figs / "finding_categories.png").exists()

    def test_no_recurse_skips_subdirs(self, corpus_dir, tmp_path, capsys):
        rc = run_cli("scan", str(corpus_dir), "--no-recurse",
                     "--format", "human")
        # only manifest.json + canary_denylist.tsv live at top level
        out = capsys.readouterr().out
        assert "MALICIOUS" not in out or rc in (0, 1, 3)


class TestDdgCommand:
    def _dump_path(self, tmp_path):
        from importlib import resources

        data = resources.files("pickleguard.data").joinpath(
            "corpus_dump.json").read_text("utf-8")
        p = tmp_path / "dump.json"
        p.write_text(data)
        return p

    def test_candidate_report_matches_golden(self, tmp_path, capsys):
        from pathlib import Path

        rc = run_cli("ddg", str(self._dump_path(tmp_path)))
        out = capsys.readouterr().out
        golden = (Path(__file__).parent / "golden" /
                  "corpus_candidates.json").read_text()
        assert rc == 0
        assert out == golden

    def test_empty_input_zero_report(self, tmp_path, capsys):
        empty = tmp_path / "empty.json"
        empty.write_text(json.dumps(
            {"schema": "pickleguard-ast/1", "functions": []}))
        rc = run_cli("ddg", str(empty))
        doc = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert doc["summary"]["scanned"] == 0

    def test_malformed_dump_counted_not_fatal(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json at all")
        rc = run_cli("ddg", str(bad))
        doc = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert doc["summary"]["failed"] == 1

    def test_figure_written(self, tmp_path):
        figs = tmp_path / "figs"
        run_cli("ddg", str(self._dump_path(tmp_path)),
                "--output", str(tmp_path / "cand.json"),
                "--figures", str(figs))
        assert (figs / "search_space_reduction.png").exists()


class TestDbCommand:
    def test_seed_db_verify(self, capsys):
        rc = run_cli("db", "verify")
        out = capsys.readouterr().out
        assert rc == 0
        assert out.startswith("OK:")
        # histogram covers at least 4 primitive categories
        assert len([ln for ln in out.splitlines()[1:] if ln.strip()]) >= 3

    def test_duplicate_fqname_exits_64_naming_it(self, tmp_path, capsys):
        db = tmp_path / "db.tsv"
        db.write_text(DB_HEADER + "dup.fn\tattack\tcode_execution\n" * 2)
        rc = run_cli("db", "verify", "--gadget-db", str(db))
        err = capsys.readouterr().err
        assert rc == EXIT_CONFIG_ERROR
        assert "dup.fn" in err

    def test_list_grows_with_entries(self, tmp_path, capsys):
        run_cli("db", "list")
        base = len(capsys.readouterr().out.strip().splitlines())
        extra = "".join(f"pkg.mod.fn{i}\tattack\tcode_execution\tlib\n"
                        for i in range(10))
        from pickleguard.risk_engine import builtin_gadget_db, GADGET_SCHEMA

        db = tmp_path / "db.tsv"
        seed_lines = [
            f"{e.fqname}\t{e.kind}\t{e.category.value}\t{e.source_library}"
            for e in builtin_gadget_db().entries.values()]
        db.write_text(f"schema: {GADGET_SCHEMA}\n"
                      + "\n".join(seed_lines) + "\n" + extra)
        rc = run_cli("db", "list", "--gadget-db", str(db))
        grown = len(capsys.readouterr().out.strip().splitlines())
        assert rc == 0
        assert grown == base + 10

    def test_env_var_fallback(self, tmp_path, monkeypatch, capsys):
        db = tmp_path / "env_db.tsv"
        db.write_text(DB_HEADER + "env.fn\tattack\tcode_execution\n")
        monkeypatch.setenv("PICKLEGUARD_DB", str(db))
        rc = run_cli("db", "list")
        out = capsys.readouterr().out
        assert rc == 0
        assert "env.fn" in out


class TestForgeCommand:
    def test_forge_writes_corpus(self, tmp_path, capsys):
        rc = run_cli("forge", "--out-dir", str(tmp_path / "c"), "--seed", "1")
        assert rc == 0
        assert (tmp_path / "c" / "manifest.json").exists()

    def test_unknown_family_rejected(self, tmp_path):
        rc = run_cli("forge", "--out-dir", str(tmp_path / "c"),
                     "--family", "no-such-family")
        assert rc == EXIT_CONFIG_ERROR


class TestParallelDeterminism:
    def test_jobs_1_vs_8_byte_identical(self, corpus_dir, tmp_path):
        outputs = {}
        for jobs in (1, 8):
            out = tmp_path / f"out_{jobs}.json"
            rc = run_cli(
                "scan", str(corpus_dir),
                "--denylist", str(corpus_dir / "canary_denylist.tsv"),
                "--jobs", str(jobs), "--format", "structured",
                "--output", str(out))
            assert rc in (2, 3)
            outputs[jobs] = mask_timing(out.read_text())
        assert outputs[1] == outputs[8]
