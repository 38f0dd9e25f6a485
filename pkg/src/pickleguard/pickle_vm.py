"""Safe pickle-stream analysis: disassembly and symbolic emulation.

Nothing here ever materializes objects or invokes callables. The emulator
keeps a symbolic stack and memo so STACK_GLOBAL targets resolve no matter
where their string arguments sit in the stream (including offset 0) or
whether they round-trip through the memo. Every malformation becomes an
anomaly value; no input can raise out of this module.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .opcodes import (
    ArgError,
    BYTES_PUSH_OPS,
    INT_PUSH_OPS,
    OPCODE_TABLE,
    STRING_PUSH_OPS,
    TruncationError,
)

DEFAULT_STREAM_BUDGET = 1 << 30  # 1 GiB
MAX_STACK = 100_000
MAX_MEMO = 1_000_000

TORCH_LEGACY_MAGIC = 0x1950A86A20F9469CFC6C
TORCH_LEGACY_PROTOCOL = 1001
_MAGIC_MAX_DIGITS = 32


class AnomalyKind(str, enum.Enum):
    UNKNOWN_OPCODE = "unknown-opcode"
    TRUNCATED_ARGUMENT = "truncated-argument"
    MALFORMED_ARGUMENT = "malformed-argument"
    STREAM_BUDGET = "stream-budget-exceeded"
    STACK_UNDERFLOW = "stack-underflow"
    STACK_OVERFLOW = "stack-cap-exceeded"
    MEMO_MISS = "memo-miss"
    MEMO_OVERFLOW = "memo-cap-exceeded"
    UNRESOLVED_IMPORT = "unresolvable-import"
    ARG_AT_STREAM_START = "argument-at-stream-start"
    MISSING_STOP = "missing-stop"
    SUSPICIOUS_MAGIC = "suspicious-legacy-magic"
    # container-level kinds live here too so reports carry one anomaly type
    EMPTY_INPUT = "empty-input"
    DEPTH_EXCEEDED = "depth-exceeded"
    BUDGET_EXCEEDED = "decode-budget-exceeded"
    PARSE_FAILURE = "parse-failure"
    TRUNCATED_MEMBER = "truncated-member"
    DOUBLE_EOCD = "double-eocd"
    LENGTH_MISMATCH = "length-mismatch"
    CENTDIR_COUNT = "central-directory-count"
    CENTDIR_UNREADABLE = "central-directory-unreadable"
    DISK_NUMBER = "disk-number"
    EXTRA_FIELD = "corrupt-extra-field"
    EXTRACT_VERSION = "extract-version"
    ENCRYPTED_MEMBER = "encrypted-member"
    UNSUPPORTED_COMPRESSION = "unsupported-compression"
    TAR_CHECKSUM = "tar-checksum"
    NPY_HEADER = "npy-header"
    UNREADABLE_INPUT = "unreadable-input"
    WORKER_FAILURE = "worker-failure"


@dataclass(frozen=True)
class StreamAnomaly:
    kind: AnomalyKind
    offset: Optional[int] = None
    detail: str = ""

    def key(self) -> tuple:
        return (self.kind.value, -1 if self.offset is None else self.offset, self.detail)


@dataclass(frozen=True)
class OpcodeEvent:
    offset: int
    opcode: str
    arg: object
    proto: int
    end: int  # offset one past the opcode's last byte


@dataclass(frozen=True)
class ImportRef:
    module: str
    name: str
    resolved_by: str  # GLOBAL | STACK_GLOBAL | INST | OBJ-class

    @property
    def fqname(self) -> str:
        return f"{self.module}.{self.name}"


class ValueKind(str, enum.Enum):
    STRING_LITERAL = "string-literal"
    IMPORT_REF = "import-ref"
    CALL_RESULT = "call-result"
    OPAQUE = "opaque"
    MARK = "mark"


@dataclass(frozen=True)
class SymbolicValue:
    kind: ValueKind
    payload: Union[str, ImportRef, None] = None
    children: tuple["SymbolicValue", ...] = ()
    origin: Optional[int] = None  # offset of the pushing opcode, literals only

    def iter_imports(self) -> Iterable[ImportRef]:
        if isinstance(self.payload, ImportRef):
            yield self.payload
        for child in self.children:
            yield from child.iter_imports()

    def summary(self) -> str:
        if self.kind is ValueKind.STRING_LITERAL:
            return repr(self.payload)
        if self.kind is ValueKind.IMPORT_REF:
            return f"<{self.payload.fqname}>"
        if self.kind is ValueKind.CALL_RESULT:
            callee = self.payload.fqname if isinstance(self.payload, ImportRef) else "?"
            return f"<result of {callee}>"
        if self.kind is ValueKind.MARK:
            return "<mark>"
        if self.payload is not None:
            return str(self.payload)
        if self.children:
            return "(" + ", ".join(c.summary() for c in self.children) + ")"
        return "<opaque>"


_OPAQUE = SymbolicValue(ValueKind.OPAQUE)
_MARKOBJ = SymbolicValue(ValueKind.MARK)


def _strlit(text: str, origin: Optional[int] = None) -> SymbolicValue:
    return SymbolicValue(ValueKind.STRING_LITERAL, text, origin=origin)


def _opaque_lit(text: str) -> SymbolicValue:
    return SymbolicValue(ValueKind.OPAQUE, text)


def _container(children: Iterable[SymbolicValue]) -> SymbolicValue:
    return SymbolicValue(ValueKind.OPAQUE, None, tuple(children))


@dataclass(frozen=True)
class CallEvent:
    callee: ImportRef
    arg_summary: tuple[str, ...]
    offset: int
    via: str = "REDUCE"  # REDUCE | NEWOBJ | NEWOBJ_EX | OBJ | INST | BUILD


@dataclass(frozen=True)
class ImportSighting:
    ref: ImportRef
    offset: int


@dataclass
class EmulationResult:
    sightings: list[ImportSighting] = field(default_factory=list)
    calls: list[CallEvent] = field(default_factory=list)
    anomalies: list[StreamAnomaly] = field(default_factory=list)

    @property
    def imports(self) -> set[ImportRef]:
        return {s.ref for s in self.sightings}


def disassemble(
    stream: bytes, max_bytes: int = DEFAULT_STREAM_BUDGET
) -> tuple[list[OpcodeEvent], list[StreamAnomaly]]:
    """Decode opcodes from offset 0 until the stream ends or desyncs.

    Decoding continues past STOP so concatenated pickles are covered. An
    unknown opcode or undecodable argument terminates decoding with an
    anomaly; it never raises.
    """
    events: list[OpcodeEvent] = []
    anomalies: list[StreamAnomaly] = []
    buf = bytes(stream)
    if len(buf) > max_bytes:
        anomalies.append(StreamAnomaly(
            AnomalyKind.STREAM_BUDGET, max_bytes,
            f"stream of {len(buf)} bytes exceeds budget {max_bytes}"))
        buf = buf[:max_bytes]
    pos = 0
    proto = 0
    saw_non_stop = False
    while pos < len(buf):
        code = buf[pos]
        info = OPCODE_TABLE.get(code)
        if info is None:
            anomalies.append(StreamAnomaly(
                AnomalyKind.UNKNOWN_OPCODE, pos, f"byte 0x{code:02x}"))
            break
        arg = None
        used = 0
        if info.reader is not None:
            try:
                arg, used = info.reader(buf, pos + 1)
            except TruncationError as exc:
                anomalies.append(StreamAnomaly(
                    AnomalyKind.TRUNCATED_ARGUMENT, pos, f"{info.name}: {exc}"))
                break
            except ArgError as exc:
                anomalies.append(StreamAnomaly(
                    AnomalyKind.MALFORMED_ARGUMENT, pos, f"{info.name}: {exc}"))
                break
        if info.name == "PROTO":
            proto = int(arg) if isinstance(arg, int) else proto
        end = pos + 1 + used
        events.append(OpcodeEvent(pos, info.name, arg, proto, end))
        if info.name != "STOP":
            saw_non_stop = True
        pos = end
    if saw_non_stop and (not events or events[-1].opcode != "STOP") and not anomalies:
        anomalies.append(StreamAnomaly(
            AnomalyKind.MISSING_STOP, pos, "stream ended without STOP"))
    return events, anomalies


def split_segments(events: list[OpcodeEvent]) -> list[list[OpcodeEvent]]:
    """Split an event sequence into per-pickle segments at STOP opcodes."""
    segments: list[list[OpcodeEvent]] = []
    current: list[OpcodeEvent] = []
    for ev in events:
        current.append(ev)
        if ev.opcode == "STOP":
            segments.append(current)
            current = []
    if current:
        segments.append(current)
    return segments


class _Machine:
    """Symbolic pickle machine for one segment."""

    def __init__(self, result: EmulationResult):
        self.stack: list[SymbolicValue] = []
        self.memo: dict[int, SymbolicValue] = {}
        self.result = result
        self._overflowed = False

    def push(self, value: SymbolicValue, offset: int) -> None:
        if len(self.stack) >= MAX_STACK:
            if not self._overflowed:
                self._overflowed = True
                self.result.anomalies.append(StreamAnomaly(
                    AnomalyKind.STACK_OVERFLOW, offset,
                    f"symbolic stack cap {MAX_STACK} reached"))
            return
        self.stack.append(value)

    def pop(self, offset: int) -> SymbolicValue:
        if not self.stack:
            self.result.anomalies.append(StreamAnomaly(
                AnomalyKind.STACK_UNDERFLOW, offset, "pop from empty stack"))
            return _OPAQUE
        return self.stack.pop()

    def pop_mark(self, offset: int) -> list[SymbolicValue]:
        items: list[SymbolicValue] = []
        while self.stack:
            top = self.stack.pop()
            if top.kind is ValueKind.MARK:
                items.reverse()
                return items
        self.result.anomalies.append(StreamAnomaly(
            AnomalyKind.STACK_UNDERFLOW, offset, "missing MARK"))
        items.reverse()
        return items

    def memo_put(self, index: int, offset: int) -> None:
        if len(self.memo) >= MAX_MEMO and index not in self.memo:
            self.result.anomalies.append(StreamAnomaly(
                AnomalyKind.MEMO_OVERFLOW, offset,
                f"memo cap {MAX_MEMO} reached"))
            return
        if self.stack:
            self.memo[index] = self.stack[-1]
        else:
            self.result.anomalies.append(StreamAnomaly(
                AnomalyKind.STACK_UNDERFLOW, offset, "memo store from empty stack"))

    def memo_get(self, index: int, offset: int) -> SymbolicValue:
        value = self.memo.get(index)
        if value is None:
            self.result.anomalies.append(StreamAnomaly(
                AnomalyKind.MEMO_MISS, offset, f"memo index {index}"))
            return _OPAQUE
        return value


def _record_import(result: EmulationResult, ref: ImportRef, offset: int) -> None:
    result.sightings.append(ImportSighting(ref, offset))


def _arg_tuple_summaries(args: SymbolicValue) -> tuple[str, ...]:
    if args.children:
        return tuple(child.summary() for child in args.children)
    if args.kind is ValueKind.OPAQUE and args.payload is None:
        return ()
    return (args.summary(),)


def _record_call(result: EmulationResult, m: _Machine, callee: SymbolicValue,
                 args: SymbolicValue, offset: int, via: str) -> SymbolicValue:
    if callee.kind is ValueKind.IMPORT_REF:
        ref = callee.payload
        result.calls.append(CallEvent(ref, _arg_tuple_summaries(args), offset, via))
        return SymbolicValue(ValueKind.CALL_RESULT, ref)
    return _OPAQUE


def emulate(events: list[OpcodeEvent]) -> EmulationResult:
    """Run the symbolic machine over disassembled events.

    Stack and memo reset at each STOP (segment boundary), matching one
    deserializer invocation per segment.
    """
    result = EmulationResult()
    m = _Machine(result)
    for ev in events:
        op, arg, off = ev.opcode, ev.arg, ev.offset
        if op in STRING_PUSH_OPS:
            m.push(_strlit(arg if isinstance(arg, str) else str(arg), off),
                   off)
        elif op in BYTES_PUSH_OPS:
            try:
                text = arg.decode("latin-1") if isinstance(arg, bytes) else str(arg)
            except Exception:
                text = ""
            m.push(_strlit(text, off), off)
        elif op in INT_PUSH_OPS or op in ("FLOAT", "BINFLOAT"):
            m.push(_opaque_lit(str(arg)), off)
        elif op == "NONE":
            m.push(_opaque_lit("None"), off)
        elif op == "NEWTRUE":
            m.push(_opaque_lit("True"), off)
        elif op == "NEWFALSE":
            m.push(_opaque_lit("False"), off)
        elif op == "MARK":
            m.push(_MARKOBJ, off)
        elif op in ("EMPTY_LIST", "EMPTY_DICT", "EMPTY_TUPLE", "EMPTY_SET"):
            m.push(_container(()), off)
        elif op == "TUPLE":
            m.push(_container(m.pop_mark(off)), off)
        elif op == "TUPLE1":
            m.push(_container([m.pop(off)]), off)
        elif op == "TUPLE2":
            b, a = m.pop(off), m.pop(off)
            m.push(_container([a, b]), off)
        elif op == "TUPLE3":
            c, b, a = m.pop(off), m.pop(off), m.pop(off)
            m.push(_container([a, b, c]), off)
        elif op in ("LIST", "DICT", "FROZENSET"):
            m.push(_container(m.pop_mark(off)), off)
        elif op in ("APPENDS", "SETITEMS", "ADDITEMS"):
            items = m.pop_mark(off)
            target = m.pop(off)
            m.push(_container(list(target.children) + items), off)
        elif op == "APPEND":
            value = m.pop(off)
            target = m.pop(off)
            m.push(_container(list(target.children) + [value]), off)
        elif op == "SETITEM":
            value = m.pop(off)
            key = m.pop(off)
            target = m.pop(off)
            m.push(_container(list(target.children) + [key, value]), off)
        elif op == "POP":
            m.pop(off)
        elif op == "POP_MARK":
            m.pop_mark(off)
        elif op == "DUP":
            top = m.pop(off)
            m.push(top, off)
            m.push(top, off)
        elif op == "GLOBAL" or op == "INST":
            module, name = arg if isinstance(arg, tuple) else ("", "")
            ref = ImportRef(module, name, "GLOBAL" if op == "GLOBAL" else "INST")
            _record_import(result, ref, off)
            if op == "GLOBAL":
                m.push(SymbolicValue(ValueKind.IMPORT_REF, ref), off)
            else:
                args = _container(m.pop_mark(off))
                m.push(_record_call(
                    result, m, SymbolicValue(ValueKind.IMPORT_REF, ref),
                    args, off, "INST"), off)
        elif op == "STACK_GLOBAL":
            name_v = m.pop(off)
            module_v = m.pop(off)
            if (name_v.kind is ValueKind.STRING_LITERAL
                    and module_v.kind is ValueKind.STRING_LITERAL):
                if module_v.origin == 0 or name_v.origin == 0:
                    # Listing-2 shape: an argument placed at stream offset 0
                    # (no PROTO) is a scanner-bypass fingerprint, never
                    # pickler output
                    result.anomalies.append(StreamAnomaly(
                        AnomalyKind.ARG_AT_STREAM_START, off,
                        "STACK_GLOBAL argument pushed at stream offset 0"))
                ref = ImportRef(str(module_v.payload), str(name_v.payload),
                                "STACK_GLOBAL")
                _record_import(result, ref, off)
                m.push(SymbolicValue(ValueKind.IMPORT_REF, ref), off)
            else:
                result.anomalies.append(StreamAnomaly(
                    AnomalyKind.UNRESOLVED_IMPORT, off,
                    f"STACK_GLOBAL over {module_v.kind.value}/{name_v.kind.value}"))
                m.push(_OPAQUE, off)
        elif op == "REDUCE":
            args = m.pop(off)
            callee = m.pop(off)
            m.push(_record_call(result, m, callee, args, off, "REDUCE"), off)
        elif op == "NEWOBJ":
            args = m.pop(off)
            cls = m.pop(off)
            m.push(_record_call(result, m, cls, args, off, "NEWOBJ"), off)
        elif op == "NEWOBJ_EX":
            kwargs = m.pop(off)
            args = m.pop(off)
            cls = m.pop(off)
            merged = _container(list(args.children) + list(kwargs.children))
            m.push(_record_call(result, m, cls, merged, off, "NEWOBJ_EX"), off)
        elif op == "OBJ":
            items = m.pop_mark(off)
            if items:
                cls, args = items[0], _container(items[1:])
            else:
                cls, args = _OPAQUE, _container(())
            m.push(_record_call(result, m, cls, args, off, "OBJ"), off)
        elif op == "BUILD":
            state = m.pop(off)
            obj = m.pop(off)
            ref = obj.payload if isinstance(obj.payload, ImportRef) else None
            if ref is not None:
                result.calls.append(CallEvent(
                    ref, _arg_tuple_summaries(state), off, "BUILD"))
            m.push(obj, off)
        elif op in ("PUT", "BINPUT", "LONG_BINPUT"):
            m.memo_put(int(arg), off)
        elif op == "MEMOIZE":
            m.memo_put(len(m.memo), off)
        elif op in ("GET", "BINGET", "LONG_BINGET"):
            m.push(m.memo_get(int(arg), off), off)
        elif op in ("PERSID", "BINPERSID"):
            if op == "BINPERSID":
                m.pop(off)
            m.push(_OPAQUE, off)
        elif op in ("EXT1", "EXT2", "EXT4"):
            m.push(_OPAQUE, off)
        elif op in ("NEXT_BUFFER",):
            m.push(_OPAQUE, off)
        elif op in ("READONLY_BUFFER",):
            top = m.pop(off)
            m.push(top, off)
        elif op == "STOP":
            m.pop(off)
            m = _Machine(result)
        # PROTO / FRAME carry no stack effect
    return result


@dataclass(frozen=True)
class LegacyMagicReport:
    is_torch_legacy: bool
    magic_literal: bytes
    anomalies: tuple[StreamAnomaly, ...] = ()


def detect_legacy_magic(stream: bytes) -> LegacyMagicReport:
    """Recognize the pre-zip torch layout: a magic-number pickle first.

    The decoded literal is compared structurally against the known constant;
    the text is never evaluated. A non-numeric or oversized literal yields
    an anomaly and is_torch_legacy=False.
    """
    events, _ = disassemble(bytes(stream[:64]), max_bytes=64)
    literal = None
    offset = 0
    for ev in events:
        if ev.opcode in ("LONG", "LONG1", "LONG4", "INT", "BININT"):
            literal, offset = ev.arg, ev.offset
            break
        if ev.opcode in STRING_PUSH_OPS:
            literal, offset = ev.arg, ev.offset
            break
        if ev.opcode in ("PROTO", "FRAME"):
            continue
        break
    if literal is None:
        return LegacyMagicReport(False, b"")
    raw = str(literal).encode("utf-8", "replace")
    if isinstance(literal, bool) or not isinstance(literal, int):
        text = str(literal)
        if text.isdigit() and len(text) <= _MAGIC_MAX_DIGITS:
            literal = int(text)
        else:
            return LegacyMagicReport(False, raw, (StreamAnomaly(
                AnomalyKind.SUSPICIOUS_MAGIC, offset,
                f"non-numeric magic literal {text[:48]!r}"),))
    if len(str(literal)) > _MAGIC_MAX_DIGITS:
        return LegacyMagicReport(False, raw, (StreamAnomaly(
            AnomalyKind.SUSPICIOUS_MAGIC, offset,
            f"oversized magic literal ({len(str(literal))} digits)"),))
    return LegacyMagicReport(literal == TORCH_LEGACY_MAGIC, raw)


def scan_stream(
    stream: bytes, max_bytes: int = DEFAULT_STREAM_BUDGET
) -> tuple[EmulationResult, list[OpcodeEvent]]:
    """Disassemble + emulate + legacy-magic probe over one byte stream."""
    events, dis_anomalies = disassemble(stream, max_bytes)
    result = emulate(events)
    result.anomalies = dis_anomalies + result.anomalies
    if len(split_segments(events)) > 1:
        legacy = detect_legacy_magic(stream)
        result.anomalies.extend(legacy.anomalies)
    return result, events
