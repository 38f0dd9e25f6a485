"""Fixture generation: determinism, benignity, coverage, loadability."""

import contextlib
import io
import pickle
import pickletools

import pytest

from pickleguard.container_walker import unwrap
from pickleguard.fixture_forge import (
    BENIGN_CALLEES,
    CANARY_ESCAPE,
    CANARY_PRINT,
    EOP_IDS,
    PATH_FAMILIES,
    SENTINEL,
    ForgeError,
    assemble_pickle,
    build_corpus,
    gen_fuzz_inputs,
    listing2_canary_pickle,
    malform,
    wrap,
)
from pickleguard.pickle_vm import ImportRef
from pickleguard.risk_engine import builtin_gadget_db


class RestrictedUnpickler(pickle.Unpickler):
    """Sandbox: only the benign canary callables may be resolved."""

    ALLOWED = {("builtins", "print"): print, ("re", "escape"): None}

    def find_class(self, module, name):
        if (module, name) == ("builtins", "print"):
            return print
        if (module, name) == ("re", "escape"):
            import re

            return re.escape
        raise pickle.UnpicklingError(f"blocked: {module}.{name}")


def restricted_loads(data: bytes):
    return RestrictedUnpickler(io.BytesIO(data)).load()


class TestAssemblePickle:
    def test_global_op_variant_loads_and_prints(self):
        stream = assemble_pickle(CANARY_PRINT, (SENTINEL,), "global-op")
        captured = io.StringIO()
        with contextlib.redirect_stdout(captured):
            restricted_loads(stream)
        assert SENTINEL in captured.getvalue()

    def test_arg_at_zero_variant_loads(self):
        stream = assemble_pickle(CANARY_ESCAPE, (SENTINEL,),
                                 "stack-global-arg-at-0")
        ops = list(pickletools.genops(io.BytesIO(stream)))
        assert ops[0][2] == 0  # first argument literal sits at offset 0
        assert restricted_loads(stream)

    def test_empty_args_uses_empty_tuple(self):
        stream = assemble_pickle(ImportRef("builtins", "dict", "GLOBAL"), ())
        names = [op[0].name for op in pickletools.genops(io.BytesIO(stream))]
        assert "EMPTY_TUPLE" in names and "REDUCE" in names
        assert pickle.loads(stream) == {}

    def test_non_benign_canary_rejected(self):
        with pytest.raises(ForgeError):
            assemble_pickle(ImportRef("os", "system", "GLOBAL"), ("ls",))

    def test_listing2_offsets_match_published_layout(self):
        stream = listing2_canary_pickle()
        positions = {op[0].name: op[2]
                     for op in pickletools.genops(io.BytesIO(stream))}
        assert positions["STACK_GLOBAL"] == 16


class TestWrap:
    def test_identity_layout(self):
        assert wrap(b"payload", []) == b"payload"

    def test_unknown_layer_rejected(self):
        with pytest.raises(ForgeError):
            wrap(b"x", [("rot13", None)])

    def test_npz_case(self):
        data = wrap(b"\x80\x02.", [("npy", None), ("zip", "x.npy")])
        assert data.startswith(b"PK\x03\x04")

    def test_legacy_torch_triple(self):
        data = wrap(b"\x80\x02.", [("tar-torch-legacy", None)])
        tree = unwrap(data)
        assert tree.torch_legacy


class TestMalform:
    def test_directive_format_mismatch(self):
        with pytest.raises(ForgeError):
            malform(b"\x80\x02.", "EOP-4")  # zip directive on a pickle
        with pytest.raises(ForgeError):
            malform(b"PK\x03\x04" + b"\x00" * 40, "EOP-1")

    def test_unknown_directive(self):
        with pytest.raises(ForgeError):
            malform(b"\x80\x02.", "EOP-99")

    def test_eop3_loadability_exempt(self):
        bad = malform(assemble_pickle(CANARY_PRINT, (SENTINEL,),
                                      "stack-global"), "EOP-3")
        with pytest.raises(Exception):
            restricted_loads(bad)  # the real deserializer rejects it too


class TestCorpusBuild:
    def test_deterministic_bytes(self, tmp_path):
        import json

        a, b = tmp_path / "a", tmp_path / "b"
        build_corpus(a, seed=7)
        build_corpus(b, seed=7)
        sha_a = json.loads((a / "manifest.json").read_text())["fixtures"]
        sha_b = json.loads((b / "manifest.json").read_text())["fixtures"]
        assert [f["sha256"] for f in sha_a] == [f["sha256"] for f in sha_b]

    def test_coverage_of_families(self, corpus_manifest):
        families = {f["family"] for f in corpus_manifest["fixtures"]}
        assert len(PATH_FAMILIES) == 22
        assert set(PATH_FAMILIES) <= families
        assert set(EOP_IDS) <= families
        assert len(set(EOP_IDS)) == 9

    def test_benignity_lint_all_fixtures(self, corpus_dir, corpus_manifest):
        allowed = set(BENIGN_CALLEES) | set(builtin_gadget_db().entries)
        for fx in corpus_manifest["fixtures"]:
            data = (corpus_dir / fx["file"]).read_bytes()
            tree = unwrap(data)
            for trail in tree.iter_pickle_leaves():
                for ref in trail[-1].pickle_result.imports:
                    assert ref.fqname in allowed, (fx["file"], ref.fqname)

    def test_gadget_fixture_per_seed_entry(self, corpus_manifest):
        gadget_families = {f["family"] for f in corpus_manifest["fixtures"]
                           if f["kind"] == "gadget"}
        assert gadget_families == set(builtin_gadget_db().entries)

    def test_manifest_hashes_match_files(self, corpus_dir, corpus_manifest):
        import hashlib

        for fx in corpus_manifest["fixtures"]:
            digest = hashlib.sha256(
                (corpus_dir / fx["file"]).read_bytes()).hexdigest()
            assert digest == fx["sha256"]


class TestFuzzInputs:
    def test_deterministic_under_seed(self):
        assert gen_fuzz_inputs(3, 50) == gen_fuzz_inputs(3, 50)
        assert gen_fuzz_inputs(3, 50) != gen_fuzz_inputs(4, 50)

    def test_requested_count(self):
        assert len(gen_fuzz_inputs(0, 123)) == 123
