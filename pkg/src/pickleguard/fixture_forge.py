"""Benign-canary fixture corpus: one family per disclosed loading path,
one per scanner-crash (EOP) case, and direct-call pickles for every seeded
gadget entry.

Every fixture's payload invokes only callables from the fixed benign set
with harmless literal arguments. Scans that should treat the canary as
malicious (the benignized stand-in for os.system) run with the emitted
canary denylist override, which the corpus manifest records.
"""

from __future__ import annotations

import hashlib
import io
import json
import random
import struct
import tarfile
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import lz4codec
from .pickle_vm import ImportRef

SENTINEL = "pg-canary-3f1b"
CANARY_PRINT = ImportRef("builtins", "print", "GLOBAL")
CANARY_ESCAPE = ImportRef("re", "escape", "STACK_GLOBAL")

# Callables a fixture payload may reference. Gadget fixtures additionally
# reference their gadget fqname; those are never loaded, only scanned.
BENIGN_CALLEES = frozenset({
    "builtins.print", "re.escape", "builtins.dict", "collections.OrderedDict",
})

MANIFEST_SCHEMA = "pickleguard-corpus/1"

EOP_IDS = tuple(f"EOP-{i}" for i in range(1, 10))

# Families whose malformation keeps the file loadable by the real stack
# (EOP-3's unknown opcode is rejected by the deserializer too).
EOP_LOADABLE = tuple(e for e in EOP_IDS if e != "EOP-3")


class ForgeError(ValueError):
    """Fixture request violates the benign-canary contract."""


def _require_benign(canary: ImportRef) -> None:
    if canary.fqname not in BENIGN_CALLEES:
        raise ForgeError(f"canary {canary.fqname} not in the benign set")


def _binunicode(text: str) -> bytes:
    raw = text.encode("utf-8")
    return b"X" + struct.pack("<I", len(raw)) + raw


def _proto0_string(text: str) -> bytes:
    return b"S'" + text.encode("latin-1") + b"'\n"


def _args_block(args: tuple[str, ...]) -> bytes:
    if not args:
        return b")"  # EMPTY_TUPLE
    if len(args) == 1:
        return _binunicode(args[0]) + b"\x85"
    if len(args) == 2:
        return _binunicode(args[0]) + _binunicode(args[1]) + b"\x86"
    body = b"".join(_binunicode(a) for a in args)
    return b"(" + body + b"t"


def assemble_pickle(canary: ImportRef, args: tuple[str, ...] = (SENTINEL,),
                    variant: str = "global-op") -> bytes:
    """Hand-assembled canary stream the host deserializer accepts."""
    _require_benign(canary)
    if variant == "global-op":
        return (b"\x80\x02"
                + b"c" + canary.module.encode() + b"\n"
                + canary.name.encode() + b"\n"
                + _args_block(args) + b"R.")
    if variant == "stack-global":
        mod = canary.module.encode()
        name = canary.name.encode()
        return (b"\x80\x02"
                + b"\x8c" + bytes([len(mod)]) + mod
                + b"\x8c" + bytes([len(name)]) + name
                + b"\x93" + _args_block(args) + b"R.")
    if variant == "stack-global-arg-at-0":
        # Listing-2 shape: first STACK_GLOBAL argument at stream offset 0,
        # no PROTO opcode.
        stream = _proto0_string(canary.module) + _proto0_string(canary.name)
        stream += b"\x93"
        for a in args:
            stream += _proto0_string(a)
        stream += {0: b")", 1: b"\x85", 2: b"\x86"}.get(
            len(args), b"t") + b"R."
        return stream
    if variant == "memoized":
        return (_proto0_string(canary.module) + b"p1\n0"
                + _proto0_string(canary.name) + b"p2\n0"
                + b"g1\ng2\n\x93"
                + _proto0_string(args[0] if args else SENTINEL)
                + b"\x85R.")
    raise ForgeError(f"unknown variant {variant!r}")


def listing2_canary_pickle() -> bytes:
    """The benignized Listing-2 stream: STACK_GLOBAL at offset 16."""
    return assemble_pickle(CANARY_ESCAPE, (SENTINEL,),
                           "stack-global-arg-at-0")


# ---------------------------------------------------------------------------
# wrapping layers (applied inner-first)

def _zip_members(members: list[tuple[str, bytes]],
                 extra: bytes = b"") -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for member_name, payload in members:
            info = zipfile.ZipInfo(member_name,
                                   date_time=(1980, 1, 1, 0, 0, 0))
            info.create_system = 3
            info.external_attr = 0o600 << 16
            if extra:
                info.extra = extra
            zf.writestr(info, payload)
    return buf.getvalue()


def _wrap_zip(payload: bytes, member_name: str) -> bytes:
    return _zip_members([(member_name, payload)])


def _wrap_zip_torch(payload: bytes, prefix: str = "archive") -> bytes:
    """Zip layout torch's reader accepts: data.pkl plus a version record."""
    return _zip_members([
        (f"{prefix}/data.pkl", payload),
        (f"{prefix}/version", b"3\n"),
    ])


def _tar_add(tf: tarfile.TarFile, name: str, payload: bytes) -> None:
    info = tarfile.TarInfo(name)
    info.size = len(payload)
    info.mtime = 0
    info.uid = info.gid = 0
    info.uname = info.gname = ""
    tf.addfile(info, io.BytesIO(payload))


def _wrap_tar(payload: bytes, member_name: str) -> bytes:
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w",
                      format=tarfile.USTAR_FORMAT) as tf:
        _tar_add(tf, member_name, payload)
    return buf.getvalue()


def _wrap_tar_torch_legacy(payload: bytes) -> bytes:
    """Deprecated torch tar layout: the storages/tensors/pickle triple."""
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w",
                      format=tarfile.USTAR_FORMAT) as tf:
        for name in ("storages", "tensors", "pickle"):
            _tar_add(tf, name, payload)
    return buf.getvalue()


def _npy_object_header(payload: bytes) -> bytes:
    header = "{'descr': '|O', 'fortran_order': False, 'shape': (), }"
    base = len(b"\x93NUMPY") + 2 + 2
    pad = 64 - ((base + len(header) + 1) % 64)
    header_bytes = (header + " " * pad + "\n").encode("latin-1")
    return (b"\x93NUMPY" + bytes([1, 0])
            + struct.pack("<H", len(header_bytes)) + header_bytes + payload)


def wrap(payload: bytes, layout: list[tuple[str, Optional[str]]]) -> bytes:
    """Apply container/compression layers, innermost first."""
    import bz2 as _bz2
    import gzip as _gzip
    import lzma as _lzma
    import zlib as _zlib

    data = payload
    for kind, param in layout:
        if kind == "zip":
            data = _wrap_zip(data, param or "data.pkl")
        elif kind == "zip-torch":
            data = _wrap_zip_torch(data, param or "archive")
        elif kind == "tar":
            data = _wrap_tar(data, param or "member")
        elif kind == "tar-torch-legacy":
            data = _wrap_tar_torch_legacy(data)
        elif kind == "gz":
            data = _gzip.compress(data, compresslevel=9, mtime=0)
        elif kind == "zlib":
            data = _zlib.compress(data, 9)
        elif kind == "bz2":
            data = _bz2.compress(data, 4)  # Appendix-B.1 compression level
        elif kind == "lzma":
            data = _lzma.compress(data, format=_lzma.FORMAT_ALONE)
        elif kind == "xz":
            data = _lzma.compress(data, format=_lzma.FORMAT_XZ)
        elif kind == "lz4":
            data = lz4codec.compress(data)
        elif kind == "npy":
            data = _npy_object_header(data)
        else:
            raise ForgeError(f"unknown layer {kind!r}")
    return data


# ---------------------------------------------------------------------------
# malformations (Table-2 EOP cases)

_EOCD_SIG = b"PK\x05\x06"
_CENTRAL_SIG = b"PK\x01\x02"


def _central_entry_offset(archive: bytes, index: int = 0) -> int:
    pos = archive.find(_CENTRAL_SIG)
    for _ in range(index):
        pos = archive.find(_CENTRAL_SIG, pos + 1)
    if pos < 0:
        raise ForgeError("archive has no central directory")
    return pos


def malform(archive: bytes, directive: str) -> bytes:
    """Minimal byte edit realizing one EOP trigger condition."""
    if directive == "EOP-1":
        from .container_walker import sniff, FormatTag

        if sniff(archive) is not FormatTag.PKL:
            raise ForgeError("EOP-1 applies to pickle payloads")
        return listing2_canary_pickle()
    if directive == "EOP-2":
        from .container_walker import sniff, FormatTag

        if sniff(archive) is not FormatTag.PKL:
            raise ForgeError("EOP-2 applies to pickle payloads")
        # scanners that evaluate the legacy magic number choke on this
        # leading segment; the canary payload follows unharmed
        magic_segment = b"\x80\x02X\x05\x00\x00\x009**99q\x00."
        return magic_segment + archive
    if directive == "EOP-3":
        from .container_walker import sniff, FormatTag

        if sniff(archive) is not FormatTag.PKL:
            raise ForgeError("EOP-3 applies to pickle payloads")
        if not archive.endswith(b"."):
            raise ForgeError("payload does not end with STOP")
        return archive[:-1] + b"\xff."
    if not archive.startswith(b"PK\x03\x04"):
        raise ForgeError(f"{directive} applies to zip archives")
    eocd_pos = archive.rfind(_EOCD_SIG)
    if eocd_pos < 0:
        raise ForgeError("no end-of-central-directory record")
    if directive == "EOP-4":
        # second (zeroed) end record before the real one: tolerant readers
        # still find the real record, offset-adjusting parsers desync
        return (archive[:eocd_pos] + _EOCD_SIG + b"\x00" * 18
                + archive[eocd_pos:])
    if directive == "EOP-5":
        pos = _central_entry_offset(archive)
        comp, uncomp = struct.unpack("<II", archive[pos + 20:pos + 28])
        return (archive[:pos + 20] + struct.pack("<II", comp + 10, uncomp + 10)
                + archive[pos + 28:])
    if directive == "EOP-6":
        cd_size = struct.unpack("<I", archive[eocd_pos + 12:eocd_pos + 16])[0]
        return (archive[:eocd_pos + 12] + struct.pack("<I", cd_size + 8)
                + archive[eocd_pos + 16:])
    if directive == "EOP-7":
        # zip64 locator declaring a second disk; plain readers that honor
        # it refuse the archive, the actual end record is untouched
        locator = b"PK\x06\x07" + struct.pack("<IQI", 0, 0, 2)
        return archive[:eocd_pos] + locator + archive[eocd_pos:]
    if directive == "EOP-8":
        from .container_walker import tolerant_zip_read

        members, _ = tolerant_zip_read(archive)
        return _zip_members([(m.name, m.data) for m in members],
                            extra=b"xxxx")  # undecodable type-length record
    if directive == "EOP-9":
        pos = _central_entry_offset(archive)
        return archive[:pos + 6] + struct.pack("<H", 64) + archive[pos + 8:]
    raise ForgeError(f"unknown directive {directive!r}")


# ---------------------------------------------------------------------------
# corpus

@dataclass(frozen=True)
class FixturesEntry:
    file: str
    family: str
    kind: str  # path | eop | gadget
    table1_row: str
    expected_verdict: str
    canary: str
    framework_loadable: bool


def _canary_payload() -> bytes:
    return assemble_pickle(CANARY_PRINT, (SENTINEL,), "global-op")


_L = list  # layout alias for table readability

# family → list of (filename, layout) fixtures, layers innermost-first
PATH_FAMILIES: dict[str, list[tuple[str, list]]] = {
    "pkl": [("model.pkl", _L([]))],
    "zip→pkl": [
        ("model.pt", _L([("zip-torch", "archive")])),
        ("weights.npz", _L([("npy", None), ("zip", "x.npy")])),
    ],
    "tar→pkl": [("model_legacy.pt", _L([("tar-torch-legacy", None)]))],
    "gz→pkl": [("model_gz.joblib", _L([("gz", None)]))],
    "zlib→pkl": [("model_zlib.joblib", _L([("zlib", None)]))],
    "bz2→pkl": [("model_bz2.joblib", _L([("bz2", None)]))],
    "lzma→pkl": [("model_lzma.joblib", _L([("lzma", None)]))],
    "xz→pkl": [("model_xz.joblib", _L([("xz", None)]))],
    "lz4→pkl": [("model_lz4.joblib", _L([("lz4", None)]))],
    "gz→tar→pkl": [("model.tgz", _L([("tar", "model.pt"), ("gz", None)]))],
    "tar→gz→pkl": [("model_gz.nemo",
                    _L([("gz", None), ("tar", "model.joblib")]))],
    "tar→zlib→pkl": [("model_zlib.nemo",
                      _L([("zlib", None), ("tar", "model.joblib")]))],
    "tar→bz2→pkl": [("model_bz2.nemo",
                     _L([("bz2", None), ("tar", "model.joblib")]))],
    "tar→lzma→pkl": [("model_lzma.nemo",
                      _L([("lzma", None), ("tar", "model.joblib")]))],
    "tar→xz→pkl": [("model_xz.nemo",
                    _L([("xz", None), ("tar", "model.joblib")]))],
    "tar→lz4→pkl": [("model_lz4.nemo",
                     _L([("lz4", None), ("tar", "model.joblib")]))],
    "zip→zip→pkl": [
        ("model.keras", _L([("npy", None), ("zip", "x.npy"),
                            ("zip", "model.weights.npz")])),
        ("model.mar", _L([("zip-torch", "archive"),
                          ("zip", "model.pt")])),
    ],
    "zip→tar→pkl": [("handler.mar", _L([("tar-torch-legacy", None),
                                        ("zip", "model.pt")]))],
    "tar→zip→pkl": [("model_zip.nemo", _L([("zip-torch", "archive"),
                                           ("tar", "model.pt")]))],
    "tar→tar→pkl": [("model_tar.nemo", _L([("tar-torch-legacy", None),
                                           ("tar", "model.pt")]))],
    "gz→tar→zip→pkl": [("model_zip.tgz",
                        _L([("zip-torch", "archive"),
                            ("tar", "model.pt"), ("gz", None)]))],
    "gz→tar→tar→pkl": [("model_tar.tgz",
                        _L([("tar-torch-legacy", None),
                            ("tar", "model.pt"), ("gz", None)]))],
}

assert len(PATH_FAMILIES) == 22


def build_eop_fixture(eop_id: str) -> bytes:
    if eop_id == "EOP-1":
        return listing2_canary_pickle()
    if eop_id == "EOP-2":
        return malform(_canary_payload(), "EOP-2")
    if eop_id == "EOP-3":
        return malform(assemble_pickle(CANARY_PRINT, (SENTINEL,),
                                       "stack-global"), "EOP-3")
    base = wrap(_canary_payload(), [("zip-torch", "archive")])
    return malform(base, eop_id)


def gadget_fixture(fqname: str, needs_attr_access: bool) -> bytes:
    """Direct-call pickle of a gadget, Pickora-style, with inert args."""
    parts = fqname.rsplit(".", 2 if needs_attr_access else 1)
    module, name = parts[0], ".".join(parts[1:])
    return (b"\x80\x02"
            + b"c" + module.encode() + b"\n" + name.encode() + b"\n"
            + _args_block((SENTINEL, SENTINEL)) + b"R.")


def build_corpus(out_dir: Path, seed: int = 0) -> list[FixturesEntry]:
    """Write the full fixture corpus + manifest + canary denylist."""
    from .risk_engine import builtin_gadget_db

    out_dir = Path(out_dir)
    entries: list[FixturesEntry] = []
    payload = _canary_payload()

    paths_dir = out_dir / "paths"
    paths_dir.mkdir(parents=True, exist_ok=True)
    for family, fixtures in PATH_FAMILIES.items():
        for filename, layout in fixtures:
            data = wrap(payload, layout)
            (paths_dir / filename).write_bytes(data)
            entries.append(FixturesEntry(
                file=f"paths/{filename}", family=family, kind="path",
                table1_row=family, expected_verdict="MALICIOUS",
                canary=CANARY_PRINT.fqname, framework_loadable=True))

    eop_dir = out_dir / "eop"
    eop_dir.mkdir(parents=True, exist_ok=True)
    for eop_id in EOP_IDS:
        data = build_eop_fixture(eop_id)
        filename = f"{eop_id.lower()}.bin"
        (eop_dir / filename).write_bytes(data)
        canary = (CANARY_ESCAPE if eop_id == "EOP-1"
                  else CANARY_PRINT).fqname
        entries.append(FixturesEntry(
            file=f"eop/{filename}", family=eop_id, kind="eop",
            table1_row="", expected_verdict="MALICIOUS", canary=canary,
            framework_loadable=eop_id in EOP_LOADABLE))

    gadget_dir = out_dir / "gadgets"
    gadget_dir.mkdir(parents=True, exist_ok=True)
    for fqname, entry in builtin_gadget_db().entries.items():
        data = gadget_fixture(fqname, entry.needs_attr_access)
        filename = fqname.replace(".", "_") + ".pkl"
        (gadget_dir / filename).write_bytes(data)
        entries.append(FixturesEntry(
            file=f"gadgets/{filename}", family=fqname, kind="gadget",
            table1_row="pkl", expected_verdict="MALICIOUS", canary=fqname,
            framework_loadable=False))

    write_canary_denylist(out_dir / "canary_denylist.tsv")
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "seed": seed,
        "sentinel": SENTINEL,
        "scan_requires_denylist": "canary_denylist.tsv",
        "fixtures": [
            {
                "file": e.file,
                "family": e.family,
                "kind": e.kind,
                "table1_row": e.table1_row,
                "expected_verdict": e.expected_verdict,
                "canary": e.canary,
                "framework_loadable": e.framework_loadable,
                "sha256": hashlib.sha256(
                    (out_dir / e.file).read_bytes()).hexdigest(),
            }
            for e in entries
        ],
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False)
        + "\n", encoding="utf-8")
    return entries


def write_canary_denylist(path: Path) -> None:
    """Denylist override marking the benign canaries as flaggable."""
    lines = ["schema: pickleguard-list/1",
             "# test-corpus override: canaries stand in for os.system"]
    for fqname in sorted(BENIGN_CALLEES):
        lines.append(f"{fqname}\tcode_execution")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def gen_fuzz_inputs(seed: int, count: int,
                    mutate_pool: Optional[list[bytes]] = None) -> list[bytes]:
    """Deterministic fuzz corpus: random blobs + byte-mutated fixtures."""
    rng = random.Random(seed)
    pool = mutate_pool or [
        _canary_payload(),
        listing2_canary_pickle(),
        wrap(_canary_payload(), [("zip", "archive/data.pkl")]),
        wrap(_canary_payload(), [("gz", None)]),
        wrap(_canary_payload(), [("tar-torch-legacy", None)]),
        wrap(_canary_payload(), [("npy", None)]),
    ]
    inputs: list[bytes] = []
    for i in range(count):
        if i % 2 == 0:
            size = rng.randrange(0, 512)
            inputs.append(rng.randbytes(size))
        else:
            base = bytearray(rng.choice(pool))
            for _ in range(rng.randrange(1, 6)):
                if not base:
                    break
                base[rng.randrange(len(base))] = rng.randrange(256)
            inputs.append(bytes(base))
    return inputs
