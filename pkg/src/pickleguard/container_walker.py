"""Recursive polyglot container unwrapping.

Formats are sniffed from magic bytes only; the file extension is recorded
as metadata but never drives dispatch. Zip archives are read by scanning
local file headers first (the strategy tolerant model loaders effectively
use), with the central directory consulted only as a cross-check, so the
malformations that crash strict-central-directory parsers degrade into
recorded anomalies here. Every parse failure becomes a node anomaly; the
walk never raises.
"""

from __future__ import annotations

import ast
import bz2
import enum
import lzma
import struct
import zlib
from dataclasses import dataclass, field
from typing import Optional

from . import lz4codec
from .pickle_vm import (
    AnomalyKind,
    EmulationResult,
    StreamAnomaly,
    detect_legacy_magic,
    scan_stream,
)


class FormatTag(str, enum.Enum):
    PKL = "pkl"
    ZIP = "zip"
    TAR = "tar"
    GZIP = "gzip"
    ZLIB = "zlib"
    BZ2 = "bz2"
    LZMA = "lzma"
    XZ = "xz"
    LZ4 = "lz4"
    NPY = "npy"
    UNKNOWN = "unknown"


# Table-1 chain tokens; npy is an intermediate extraction step, not a layer.
_CHAIN_TOKEN = {
    FormatTag.ZIP: "zip",
    FormatTag.TAR: "tar",
    FormatTag.GZIP: "gz",
    FormatTag.ZLIB: "zlib",
    FormatTag.BZ2: "bz2",
    FormatTag.LZMA: "lzma",
    FormatTag.XZ: "xz",
    FormatTag.LZ4: "lz4",
}

KNOWN_LOADING_PATHS = (
    "pkl",
    "zip→pkl", "tar→pkl",
    "gz→pkl", "zlib→pkl", "bz2→pkl", "lzma→pkl", "xz→pkl", "lz4→pkl",
    "gz→tar→pkl",
    "tar→gz→pkl", "tar→zlib→pkl", "tar→bz2→pkl", "tar→lzma→pkl",
    "tar→xz→pkl", "tar→lz4→pkl",
    "zip→zip→pkl", "zip→tar→pkl", "tar→zip→pkl", "tar→tar→pkl",
    "gz→tar→zip→pkl", "gz→tar→tar→pkl",
)


@dataclass
class WalkConfig:
    max_depth: int = 8
    node_budget_bytes: int = 1 << 30
    scan_budget_bytes: int = 4 << 30


@dataclass
class LoadingPathLabel:
    chain: tuple[str, ...]
    table1_row: str

    @property
    def text(self) -> str:
        return "→".join(self.chain)


@dataclass
class ContainerNode:
    format: FormatTag
    member_name: str = ""
    byte_len: int = 0
    children: list["ContainerNode"] = field(default_factory=list)
    pickle_result: Optional[EmulationResult] = None
    anomalies: list[StreamAnomaly] = field(default_factory=list)
    torch_legacy: bool = False
    extension: str = ""  # metadata only, never used for dispatch

    def iter_pickle_leaves(self, trail: tuple["ContainerNode", ...] = ()):
        here = trail + (self,)
        if self.pickle_result is not None:
            yield here
        for child in self.children:
            yield from child.iter_pickle_leaves(here)

    def iter_anomalies(self):
        yield from self.anomalies
        if self.pickle_result is not None:
            yield from self.pickle_result.anomalies
        for child in self.children:
            yield from child.iter_anomalies()


class _Budget:
    def __init__(self, config: WalkConfig):
        self.config = config
        self.remaining = config.scan_budget_bytes

    def node_cap(self) -> int:
        return min(self.config.node_budget_bytes, max(self.remaining, 0))

    def consume(self, n: int) -> None:
        self.remaining -= n


# ---------------------------------------------------------------------------
# sniffing

_ZIP_MAGICS = (b"PK\x03\x04", b"PK\x05\x06", b"PK\x07\x08")


def _plausible_pickle(data: bytes) -> bool:
    if not data:
        return False
    if data[0] == 0x80 and len(data) > 1 and data[1] <= 5:
        return True
    events, _ = scan_prefix(data)
    stop_seen = any(ev.opcode == "STOP" for ev in events)
    return (stop_seen and len(events) >= 2) or len(events) >= 4


def scan_prefix(data: bytes, limit: int = 65536):
    """Disassemble a prefix for sniffing without touching budgets."""
    from .pickle_vm import disassemble

    return disassemble(data[:limit], max_bytes=limit)


def _tar_checksum_ok(header: bytes) -> bool:
    if len(header) < 512:
        return False
    try:
        stated = int(header[148:156].split(b"\x00")[0].strip() or b"0", 8)
    except ValueError:
        return False
    summed = sum(header[:148]) + sum(b" " * 8) + sum(header[156:512])
    return stated == summed and stated != 0


def sniff(data: bytes) -> FormatTag:
    """Magic-byte format detection with fixed precedence."""
    if data.startswith(_ZIP_MAGICS[0]) or data.startswith(_ZIP_MAGICS[1]) \
            or data.startswith(_ZIP_MAGICS[2]):
        return FormatTag.ZIP
    if data.startswith(b"\x1f\x8b"):
        return FormatTag.GZIP
    if data.startswith(b"\xfd7zXZ\x00"):
        return FormatTag.XZ
    if data.startswith(b"BZh") and len(data) > 3 and 0x31 <= data[3] <= 0x39:
        return FormatTag.BZ2
    if data.startswith(lz4codec.FRAME_MAGIC):
        return FormatTag.LZ4
    if data.startswith(b"\x5d\x00"):
        return FormatTag.LZMA
    if len(data) >= 2 and (data[0] & 0x0F) == 8 and ((data[0] << 8) | data[1]) % 31 == 0:
        # weak 2-byte preamble; confirm by trial inflate of a short prefix
        try:
            zlib.decompressobj().decompress(data[:256])
            return FormatTag.ZLIB
        except zlib.error:
            pass
    if len(data) >= 512 and (
            data[257:262] == b"ustar" or _tar_checksum_ok(data[:512])):
        return FormatTag.TAR
    if data.startswith(b"\x93NUMPY"):
        return FormatTag.NPY
    if _plausible_pickle(data):
        return FormatTag.PKL
    return FormatTag.UNKNOWN


# ---------------------------------------------------------------------------
# tolerant zip

_LOCAL_SIG = b"PK\x03\x04"
_CENTRAL_SIG = b"PK\x01\x02"
_EOCD_SIG = b"PK\x05\x06"
_EOCD64_LOCATOR_SIG = b"PK\x06\x07"
_MAX_EXTRACT_VERSION = 63  # 6.3; strict parsers reject anything above


@dataclass
class ZipMember:
    name: str
    data: bytes
    compressed: bool


def _check_extra_field(extra: bytes, where: str,
                       anomalies: list[StreamAnomaly]) -> None:
    rest = extra
    while len(rest) >= 4:
        _, ln = struct.unpack("<HH", rest[:4])
        if ln + 4 > len(rest):
            anomalies.append(StreamAnomaly(
                AnomalyKind.EXTRA_FIELD, None,
                f"{where}: undecodable extra field {extra[:16]!r}"))
            return
        rest = rest[4 + ln:]
    if rest:
        anomalies.append(StreamAnomaly(
            AnomalyKind.EXTRA_FIELD, None,
            f"{where}: trailing extra bytes {rest!r}"))


def _inflate(data: bytes, cap: int) -> tuple[bytes, Optional[str]]:
    d = zlib.decompressobj(-15)
    try:
        out = d.decompress(data, cap)
        if d.unconsumed_tail:
            return out, "budget"
        return out, None
    except zlib.error as exc:
        return b"", str(exc)


@dataclass
class _CentralEntry:
    name: str
    method: int
    comp_size: int
    uncomp_size: int
    extract_version: int
    extra: bytes
    local_offset: int


def _central_span(data: bytes, offset: int) -> int:
    """Byte length of the contiguous central directory at offset."""
    pos = offset
    while pos + 46 <= len(data) and data[pos:pos + 4] == _CENTRAL_SIG:
        fnlen, extralen, commentlen = struct.unpack(
            "<HHH", data[pos + 28:pos + 34])
        pos += 46 + fnlen + extralen + commentlen
    return pos - offset


def _parse_central(data: bytes, offset: int, count_hint: int,
                   anomalies: list[StreamAnomaly]) -> list[_CentralEntry]:
    entries = []
    pos = offset
    while pos + 4 <= len(data) and data[pos:pos + 4] == _CENTRAL_SIG:
        if pos + 46 > len(data):
            anomalies.append(StreamAnomaly(
                AnomalyKind.CENTDIR_UNREADABLE, pos, "truncated central entry"))
            break
        (_, _, version_needed, _, method, _, _, _, comp_size, uncomp_size,
         fnlen, extralen, commentlen, _, _, _, local_off) = \
            struct.unpack("<4sHHHHHHIIIHHHHHII", data[pos:pos + 46])
        name = data[pos + 46:pos + 46 + fnlen].decode("utf-8", "replace")
        extra = data[pos + 46 + fnlen:pos + 46 + fnlen + extralen]
        entries.append(_CentralEntry(
            name, method, comp_size, uncomp_size, version_needed, extra,
            local_off))
        pos += 46 + fnlen + extralen + commentlen
    if count_hint >= 0 and len(entries) != count_hint:
        anomalies.append(StreamAnomaly(
            AnomalyKind.CENTDIR_COUNT, offset,
            f"end record declares {count_hint} entries, parsed {len(entries)}"))
    return entries


def tolerant_zip_read(
    data: bytes, node_cap: int = 1 << 30
) -> tuple[list[ZipMember], list[StreamAnomaly]]:
    """Extract members by walking local headers; cross-check central dir.

    Declared/actual length conflicts trust the actual stream framing.
    All malformations degrade into anomalies; extraction continues.
    """
    anomalies: list[StreamAnomaly] = []
    members: list[ZipMember] = []
    local_sizes: dict[str, int] = {}

    pos = 0
    while pos + 4 <= len(data):
        sig = data[pos:pos + 4]
        if sig == _CENTRAL_SIG or sig == _EOCD_SIG:
            break
        if sig != _LOCAL_SIG:
            nxt = data.find(_LOCAL_SIG, pos + 1)
            stop = data.find(_CENTRAL_SIG, pos + 1)
            if nxt < 0 or (0 <= stop < nxt):
                break
            anomalies.append(StreamAnomaly(
                AnomalyKind.PARSE_FAILURE, pos,
                f"gap before next local header at {nxt}"))
            pos = nxt
            continue
        if pos + 30 > len(data):
            anomalies.append(StreamAnomaly(
                AnomalyKind.TRUNCATED_MEMBER, pos, "truncated local header"))
            break
        (_, _, flags, method, _, _, _, comp_size, uncomp_size, fnlen,
         extralen) = struct.unpack("<4sHHHHHIIIHH", data[pos:pos + 30])
        name_start = pos + 30
        name = data[name_start:name_start + fnlen].decode("utf-8", "replace")
        extra = data[name_start + fnlen:name_start + fnlen + extralen]
        _check_extra_field(extra, f"local:{name}", anomalies)
        body_start = name_start + fnlen + extralen
        if flags & 0x1:
            anomalies.append(StreamAnomaly(
                AnomalyKind.ENCRYPTED_MEMBER, pos, name))
            members.append(ZipMember(name, b"", method != 0))
            pos = body_start + comp_size
            continue
        if flags & 0x8 and comp_size == 0:
            # streamed entry: sizes live in a trailing descriptor; recover
            # framing by scanning for the next signature
            nxt = len(data)
            for sig2 in (b"PK\x07\x08", _LOCAL_SIG, _CENTRAL_SIG, _EOCD_SIG):
                found = data.find(sig2, body_start)
                if 0 <= found < nxt:
                    nxt = found
            raw = data[body_start:nxt]
            anomalies.append(StreamAnomaly(
                AnomalyKind.LENGTH_MISMATCH, pos,
                f"{name}: streamed entry, framing recovered"))
            pos = nxt
        else:
            end = min(body_start + comp_size, len(data))
            raw = data[body_start:end]
            if len(raw) < comp_size:
                anomalies.append(StreamAnomaly(
                    AnomalyKind.TRUNCATED_MEMBER, pos,
                    f"{name}: {len(raw)}/{comp_size} bytes"))
            pos = body_start + comp_size
        if method == 0:
            payload = raw[:node_cap]
            if len(raw) > node_cap:
                anomalies.append(StreamAnomaly(
                    AnomalyKind.BUDGET_EXCEEDED, None, name))
        elif method == 8:
            payload, err = _inflate(raw, node_cap)
            if err == "budget":
                anomalies.append(StreamAnomaly(
                    AnomalyKind.BUDGET_EXCEEDED, None, name))
            elif err is not None:
                anomalies.append(StreamAnomaly(
                    AnomalyKind.PARSE_FAILURE, None, f"{name}: inflate: {err}"))
        else:
            anomalies.append(StreamAnomaly(
                AnomalyKind.UNSUPPORTED_COMPRESSION, None,
                f"{name}: method {method}"))
            payload = b""
        if not name.endswith("/"):
            members.append(ZipMember(name, payload, method != 0))
            local_sizes[name] = uncomp_size

    # end-of-central-directory cross-checks
    eocd_positions = []
    search = 0
    while True:
        found = data.find(_EOCD_SIG, search)
        if found < 0:
            break
        eocd_positions.append(found)
        search = found + 1
    if len(eocd_positions) > 1:
        anomalies.append(StreamAnomaly(
            AnomalyKind.DOUBLE_EOCD, eocd_positions[-1],
            f"{len(eocd_positions)} end-of-central-directory records"))
    central_entries: list[_CentralEntry] = []
    for eocd_pos in eocd_positions:
        if eocd_pos + 22 > len(data):
            continue
        (_, diskno, cd_disk, _, total_entries, cd_size, cd_offset, _) = \
            struct.unpack("<4sHHHHIIH", data[eocd_pos:eocd_pos + 22])
        if diskno != 0 or cd_disk != 0:
            anomalies.append(StreamAnomaly(
                AnomalyKind.DISK_NUMBER, eocd_pos,
                f"disk number {diskno}/{cd_disk}"))
        if cd_offset + 4 <= len(data) and data[cd_offset:cd_offset + 4] == _CENTRAL_SIG:
            central_entries = _parse_central(
                data, cd_offset, total_entries, anomalies)
            parsed_span = _central_span(data, cd_offset)
            if cd_size != parsed_span:
                anomalies.append(StreamAnomaly(
                    AnomalyKind.CENTDIR_COUNT, eocd_pos,
                    f"end record declares central directory of {cd_size} "
                    f"bytes, actual {parsed_span}"))
            break
        anomalies.append(StreamAnomaly(
            AnomalyKind.CENTDIR_UNREADABLE, eocd_pos,
            f"central directory offset {cd_offset} invalid"))
    # a zip64 locator claiming multiple disks crashes strict parsers
    loc_pos = data.rfind(_EOCD64_LOCATOR_SIG)
    if loc_pos >= 0 and loc_pos + 20 <= len(data):
        total_disks = struct.unpack("<I", data[loc_pos + 16:loc_pos + 20])[0]
        if total_disks > 1:
            anomalies.append(StreamAnomaly(
                AnomalyKind.DISK_NUMBER, loc_pos,
                f"zip64 locator declares {total_disks} disks"))
    for entry in central_entries:
        _check_extra_field(entry.extra, f"central:{entry.name}", anomalies)
        if entry.extract_version > _MAX_EXTRACT_VERSION:
            anomalies.append(StreamAnomaly(
                AnomalyKind.EXTRACT_VERSION, None,
                f"{entry.name}: needs {entry.extract_version / 10:.1f}"))
        declared = local_sizes.get(entry.name)
        if declared is not None and declared != entry.uncomp_size:
            anomalies.append(StreamAnomaly(
                AnomalyKind.LENGTH_MISMATCH, None,
                f"{entry.name}: local {declared} vs central {entry.uncomp_size}"))
    if not members and central_entries:
        anomalies.append(StreamAnomaly(
            AnomalyKind.PARSE_FAILURE, 0,
            "no local headers; falling back to central directory"))
        for entry in central_entries:
            off = entry.local_offset
            if off + 30 > len(data) or data[off:off + 4] != _LOCAL_SIG:
                continue
            fnlen, extralen = struct.unpack("<HH", data[off + 26:off + 30])
            start = off + 30 + fnlen + extralen
            raw = data[start:start + entry.comp_size]
            if entry.method == 8:
                payload, err = _inflate(raw, node_cap)
                if err is not None:
                    anomalies.append(StreamAnomaly(
                        AnomalyKind.PARSE_FAILURE, None,
                        f"{entry.name}: inflate: {err}"))
            else:
                payload = raw[:node_cap]
            members.append(ZipMember(entry.name, payload, entry.method != 0))
    return members, anomalies


# ---------------------------------------------------------------------------
# tolerant tar

_TAR_META_TYPES = frozenset(b"xgLK")


@dataclass
class TarMember:
    name: str
    data: bytes


def tolerant_tar_read(
    data: bytes, node_cap: int = 1 << 30
) -> tuple[list[TarMember], list[StreamAnomaly]]:
    """Walk 512-byte tar headers; checksum failures downgrade to anomalies."""
    members: list[TarMember] = []
    anomalies: list[StreamAnomaly] = []
    pos = 0
    pending_longname: Optional[str] = None
    while pos + 512 <= len(data):
        header = data[pos:pos + 512]
        if header == b"\x00" * 512:
            break
        name = header[0:100].split(b"\x00")[0].decode("utf-8", "replace")
        try:
            size = int(header[124:136].split(b"\x00")[0].strip() or b"0", 8)
        except ValueError:
            anomalies.append(StreamAnomaly(
                AnomalyKind.PARSE_FAILURE, pos, "unreadable tar size field"))
            break
        typeflag = header[156:157]
        if not _tar_checksum_ok(header):
            anomalies.append(StreamAnomaly(
                AnomalyKind.TAR_CHECKSUM, pos, name or "<unnamed>"))
        prefix = header[345:500].split(b"\x00")[0].decode("utf-8", "replace") \
            if header[257:262] == b"ustar" else ""
        body = data[pos + 512:pos + 512 + size]
        if len(body) < size:
            anomalies.append(StreamAnomaly(
                AnomalyKind.TRUNCATED_MEMBER, pos,
                f"{name}: {len(body)}/{size} bytes"))
        if typeflag in (b"0", b"\x00", b"7"):
            full = f"{prefix}/{name}" if prefix else name
            if pending_longname is not None:
                full = pending_longname
                pending_longname = None
            members.append(TarMember(full, body[:node_cap]))
        elif typeflag == b"L":
            pending_longname = body.split(b"\x00")[0].decode("utf-8", "replace")
        elif typeflag in (b"x", b"g", b"K"):
            pass  # pax/gnu metadata
        # directories, links, devices: no payload to scan
        pos += 512 + ((size + 511) // 512) * 512
    return members, anomalies


# ---------------------------------------------------------------------------
# codec layers

def _stream_decompress(tag: FormatTag, data: bytes, cap: int
                       ) -> tuple[bytes, Optional[str]]:
    try:
        if tag is FormatTag.GZIP:
            d = zlib.decompressobj(wbits=31)
            out = d.decompress(data, cap)
            return out, "budget" if d.unconsumed_tail else None
        if tag is FormatTag.ZLIB:
            d = zlib.decompressobj(wbits=15)
            out = d.decompress(data, cap)
            return out, "budget" if d.unconsumed_tail else None
        if tag is FormatTag.BZ2:
            d = bz2.BZ2Decompressor()
            out = d.decompress(data, cap)
            return out, "budget" if d.needs_input is False and not d.eof else None
        if tag in (FormatTag.LZMA, FormatTag.XZ):
            d = lzma.LZMADecompressor(format=lzma.FORMAT_AUTO)
            out = d.decompress(data, cap)
            return out, "budget" if not d.eof and d.needs_input is False else None
        if tag is FormatTag.LZ4:
            return lz4codec.decompress(data, cap)
    except Exception as exc:  # codec internals raise many exception types
        return b"", f"{type(exc).__name__}: {exc}"
    return b"", f"no decoder for {tag.value}"


# ---------------------------------------------------------------------------
# npy

def parse_npy_header(data: bytes) -> tuple[Optional[dict], int, Optional[str]]:
    """Parse the npy preamble. Returns (header-dict, payload-offset, error)."""
    if not data.startswith(b"\x93NUMPY") or len(data) < 10:
        return None, 0, "missing npy magic"
    major = data[6]
    if major >= 2:
        if len(data) < 12:
            return None, 0, "truncated npy length"
        hlen = struct.unpack("<I", data[8:12])[0]
        start = 12
    else:
        hlen = struct.unpack("<H", data[8:10])[0]
        start = 10
    end = start + hlen
    if end > len(data):
        return None, 0, "npy header runs past end of data"
    text = data[start:end].decode("latin-1")
    try:
        header = ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        return None, end, f"unparseable npy header: {exc}"
    if not isinstance(header, dict):
        return None, end, "npy header is not a dict"
    return header, end, None


def _npy_is_object(header: dict) -> bool:
    descr = str(header.get("descr", ""))
    return "O" in descr


# ---------------------------------------------------------------------------
# unwrap

_TORCH_LEGACY_TRIPLE = {"storages", "tensors", "pickle"}


def unwrap(data: bytes, depth: int = 0, config: Optional[WalkConfig] = None,
           member_name: str = "", extension: str = "",
           _budget: Optional[_Budget] = None) -> ContainerNode:
    """Recursively expand one blob into its container tree."""
    config = config or WalkConfig()
    budget = _budget or _Budget(config)
    node = ContainerNode(FormatTag.UNKNOWN, member_name, len(data),
                         extension=extension)
    if not data:
        node.anomalies.append(StreamAnomaly(AnomalyKind.EMPTY_INPUT, 0))
        return node
    node.format = sniff(data)
    if depth > config.max_depth:
        node.anomalies.append(StreamAnomaly(
            AnomalyKind.DEPTH_EXCEEDED, None,
            f"depth {depth} exceeds max {config.max_depth}"))
        return node
    budget.consume(len(data))
    if budget.remaining < 0:
        node.anomalies.append(StreamAnomaly(
            AnomalyKind.BUDGET_EXCEEDED, None, "scan byte budget exhausted"))
        return node
    cap = budget.node_cap()

    if node.format is FormatTag.ZIP:
        members, anomalies = tolerant_zip_read(data, cap)
        node.anomalies.extend(anomalies)
        if not members:
            node.anomalies.append(StreamAnomaly(
                AnomalyKind.PARSE_FAILURE, None, "zip yielded no members"))
        for member in members:
            node.children.append(unwrap(
                member.data, depth + 1, config, member.name,
                _ext(member.name), budget))
    elif node.format is FormatTag.TAR:
        members, anomalies = tolerant_tar_read(data, cap)
        node.anomalies.extend(anomalies)
        names = {m.name.rsplit("/", 1)[-1] for m in members}
        if _TORCH_LEGACY_TRIPLE <= names:
            node.torch_legacy = True
        for member in members:
            node.children.append(unwrap(
                member.data, depth + 1, config, member.name,
                _ext(member.name), budget))
    elif node.format in (FormatTag.GZIP, FormatTag.ZLIB, FormatTag.BZ2,
                         FormatTag.LZMA, FormatTag.XZ, FormatTag.LZ4):
        payload, err = _stream_decompress(node.format, data, cap)
        if err == "budget":
            node.anomalies.append(StreamAnomaly(
                AnomalyKind.BUDGET_EXCEEDED, None,
                f"{node.format.value} output truncated at {cap} bytes"))
        elif err is not None:
            node.anomalies.append(StreamAnomaly(
                AnomalyKind.PARSE_FAILURE, None,
                f"{node.format.value}: {err}"))
        if payload:
            node.children.append(unwrap(
                payload, depth + 1, config, "", "", budget))
    elif node.format is FormatTag.NPY:
        header, offset, err = parse_npy_header(data)
        if err is not None:
            node.anomalies.append(StreamAnomaly(
                AnomalyKind.NPY_HEADER, None, err))
            payload = data[offset:] if offset else b""
            if payload and sniff(payload) is FormatTag.PKL:
                node.children.append(unwrap(
                    payload, depth + 1, config, "", "", budget))
        elif _npy_is_object(header):
            node.children.append(unwrap(
                data[offset:], depth + 1, config, "", "", budget))
        # plain numeric arrays carry no pickle payload
    elif node.format is FormatTag.PKL:
        result, _ = scan_stream(data, max_bytes=cap)
        node.pickle_result = result
        node.torch_legacy = detect_legacy_magic(data).is_torch_legacy
    elif depth == 0:
        # unrecognized root input is itself a signal; nested non-pickle
        # blobs (tensor storages, metadata records) are normal members
        node.anomalies.append(StreamAnomaly(
            AnomalyKind.PARSE_FAILURE, None, "unrecognized format"))
    return node


def _ext(name: str) -> str:
    base = name.rsplit("/", 1)[-1]
    return base.rsplit(".", 1)[-1].lower() if "." in base else ""


def label_path(trail: tuple[ContainerNode, ...]) -> LoadingPathLabel:
    """Label a root-to-leaf trail with its Table-1 loading-path row."""
    chain: list[str] = []
    for node in trail[:-1]:
        token = _CHAIN_TOKEN.get(node.format)
        if token is not None:
            chain.append(token)
    chain.append("pkl")
    text = "→".join(chain)
    row = text if text in KNOWN_LOADING_PATHS else "unlisted"
    return LoadingPathLabel(tuple(chain), row)
