"""Pickle opcode table for protocols 0-5.

Each opcode maps to a name and an argument reader. Readers decode from a
buffer at an offset and return (value, bytes_consumed) or raise ArgError;
they never read past the buffer end silently.
"""

from __future__ import annotations

import codecs
import struct
from dataclasses import dataclass
from typing import Callable, Optional


class ArgError(ValueError):
    """Argument bytes are malformed."""


class TruncationError(ArgError):
    """Argument bytes run past the end of the stream."""


def _take(buf: bytes, pos: int, n: int) -> bytes:
    if pos + n > len(buf):
        raise TruncationError(
            f"need {n} bytes at offset {pos}, have {len(buf) - pos}")
    return buf[pos:pos + n]


def read_uint1(buf, pos):
    return _take(buf, pos, 1)[0], 1


def read_uint2(buf, pos):
    return struct.unpack("<H", _take(buf, pos, 2))[0], 2


def read_int4(buf, pos):
    return struct.unpack("<i", _take(buf, pos, 4))[0], 4


def read_uint4(buf, pos):
    return struct.unpack("<I", _take(buf, pos, 4))[0], 4


def read_uint8(buf, pos):
    return struct.unpack("<Q", _take(buf, pos, 8))[0], 8


def read_float8(buf, pos):
    return struct.unpack(">d", _take(buf, pos, 8))[0], 8


def _readline(buf: bytes, pos: int) -> tuple[bytes, int]:
    end = buf.find(b"\n", pos)
    if end < 0:
        raise TruncationError(f"unterminated line argument at offset {pos}")
    return buf[pos:end], end - pos + 1


def read_stringnl(buf, pos):
    """Repr-quoted newline-terminated string (STRING)."""
    line, used = _readline(buf, pos)
    if len(line) >= 2 and line[:1] in (b"'", b'"') and line[:1] == line[-1:]:
        line = line[1:-1]
    else:
        raise ArgError(f"no string quotes around {line[:32]!r}")
    try:
        return codecs.escape_decode(line)[0].decode("latin-1"), used
    except Exception as exc:
        raise ArgError(f"bad string escape: {exc}") from exc


def read_stringnl_noescape(buf, pos):
    line, used = _readline(buf, pos)
    try:
        return line.decode("ascii"), used
    except UnicodeDecodeError as exc:
        raise ArgError(f"non-ascii line argument: {exc}") from exc


def read_stringnl_noescape_pair(buf, pos):
    """Two newline-terminated lines (GLOBAL, INST): 'module name'."""
    first, used1 = read_stringnl_noescape(buf, pos)
    second, used2 = read_stringnl_noescape(buf, pos + used1)
    return (first, second), used1 + used2


def read_unicodestringnl(buf, pos):
    line, used = _readline(buf, pos)
    try:
        return line.decode("raw-unicode-escape"), used
    except UnicodeDecodeError as exc:
        raise ArgError(f"bad raw-unicode-escape: {exc}") from exc


def read_decimalnl_short(buf, pos):
    line, used = _readline(buf, pos)
    if line == b"00":
        return False, used
    if line == b"01":
        return True, used
    try:
        return int(line), used
    except ValueError as exc:
        raise ArgError(f"bad decimal literal {line[:32]!r}") from exc


def read_decimalnl_long(buf, pos):
    line, used = _readline(buf, pos)
    if line.endswith(b"L"):
        line = line[:-1]
    try:
        return int(line) if line else 0, used
    except ValueError as exc:
        raise ArgError(f"bad long literal {line[:32]!r}") from exc


def read_floatnl(buf, pos):
    line, used = _readline(buf, pos)
    try:
        return float(line), used
    except ValueError as exc:
        raise ArgError(f"bad float literal {line[:32]!r}") from exc


def _read_counted(buf, pos, lenreader, decode: Optional[str]):
    n, lenused = lenreader(buf, pos)
    if n < 0:
        raise ArgError(f"negative length {n}")
    data = _take(buf, pos + lenused, n)
    if decode is not None:
        try:
            data = data.decode(decode)
        except UnicodeDecodeError as exc:
            raise ArgError(f"bad {decode} payload: {exc}") from exc
    return data, lenused + n


def read_string1(buf, pos):
    return _read_counted(buf, pos, read_uint1, "latin-1")


def read_string4(buf, pos):
    return _read_counted(buf, pos, read_int4, "latin-1")


def read_bytes1(buf, pos):
    return _read_counted(buf, pos, read_uint1, None)


def read_bytes4(buf, pos):
    return _read_counted(buf, pos, read_uint4, None)


def read_bytes8(buf, pos):
    return _read_counted(buf, pos, read_uint8, None)


def read_bytearray8(buf, pos):
    return _read_counted(buf, pos, read_uint8, None)


def read_unicodestring1(buf, pos):
    return _read_counted(buf, pos, read_uint1, "utf-8")


def read_unicodestring4(buf, pos):
    return _read_counted(buf, pos, read_uint4, "utf-8")


def read_unicodestring8(buf, pos):
    return _read_counted(buf, pos, read_uint8, "utf-8")


def _long_from_le(data: bytes) -> int:
    return int.from_bytes(data, "little", signed=True) if data else 0


def read_long1(buf, pos):
    data, used = _read_counted(buf, pos, read_uint1, None)
    return _long_from_le(data), used


def read_long4(buf, pos):
    data, used = _read_counted(buf, pos, read_int4, None)
    return _long_from_le(data), used


Reader = Callable[[bytes, int], tuple[object, int]]


@dataclass(frozen=True)
class OpcodeInfo:
    name: str
    code: int
    reader: Optional[Reader]
    proto: int  # protocol that introduced the opcode


_OPCODES = [
    # protocol 0
    ("MARK", b"(", None, 0),
    ("STOP", b".", None, 0),
    ("POP", b"0", None, 0),
    ("POP_MARK", b"1", None, 0),
    ("DUP", b"2", None, 0),
    ("FLOAT", b"F", read_floatnl, 0),
    ("INT", b"I", read_decimalnl_short, 0),
    ("BININT", b"J", read_int4, 1),
    ("BININT1", b"K", read_uint1, 1),
    ("LONG", b"L", read_decimalnl_long, 0),
    ("BININT2", b"M", read_uint2, 1),
    ("NONE", b"N", None, 0),
    ("PERSID", b"P", read_stringnl_noescape, 0),
    ("BINPERSID", b"Q", None, 1),
    ("REDUCE", b"R", None, 0),
    ("STRING", b"S", read_stringnl, 0),
    ("BINSTRING", b"T", read_string4, 1),
    ("SHORT_BINSTRING", b"U", read_string1, 1),
    ("UNICODE", b"V", read_unicodestringnl, 0),
    ("BINUNICODE", b"X", read_unicodestring4, 1),
    ("APPEND", b"a", None, 0),
    ("BUILD", b"b", None, 0),
    ("GLOBAL", b"c", read_stringnl_noescape_pair, 0),
    ("DICT", b"d", None, 0),
    ("EMPTY_DICT", b"}", None, 1),
    ("APPENDS", b"e", None, 1),
    ("GET", b"g", read_decimalnl_short, 0),
    ("BINGET", b"h", read_uint1, 1),
    ("INST", b"i", read_stringnl_noescape_pair, 0),
    ("LONG_BINGET", b"j", read_uint4, 1),
    ("LIST", b"l", None, 0),
    ("EMPTY_LIST", b"]", None, 1),
    ("OBJ", b"o", None, 1),
    ("PUT", b"p", read_decimalnl_short, 0),
    ("BINPUT", b"q", read_uint1, 1),
    ("LONG_BINPUT", b"r", read_uint4, 1),
    ("SETITEM", b"s", None, 0),
    ("TUPLE", b"t", None, 0),
    ("EMPTY_TUPLE", b")", None, 1),
    ("SETITEMS", b"u", None, 1),
    ("BINFLOAT", b"G", read_float8, 1),
    # protocol 2
    ("PROTO", b"\x80", read_uint1, 2),
    ("NEWOBJ", b"\x81", None, 2),
    ("EXT1", b"\x82", read_uint1, 2),
    ("EXT2", b"\x83", read_uint2, 2),
    ("EXT4", b"\x84", read_int4, 2),
    ("TUPLE1", b"\x85", None, 2),
    ("TUPLE2", b"\x86", None, 2),
    ("TUPLE3", b"\x87", None, 2),
    ("NEWTRUE", b"\x88", None, 2),
    ("NEWFALSE", b"\x89", None, 2),
    ("LONG1", b"\x8a", read_long1, 2),
    ("LONG4", b"\x8b", read_long4, 2),
    # protocol 3
    ("BINBYTES", b"B", read_bytes4, 3),
    ("SHORT_BINBYTES", b"C", read_bytes1, 3),
    # protocol 4
    ("SHORT_BINUNICODE", b"\x8c", read_unicodestring1, 4),
    ("BINUNICODE8", b"\x8d", read_unicodestring8, 4),
    ("BINBYTES8", b"\x8e", read_bytes8, 4),
    ("EMPTY_SET", b"\x8f", None, 4),
    ("ADDITEMS", b"\x90", None, 4),
    ("FROZENSET", b"\x91", None, 4),
    ("NEWOBJ_EX", b"\x92", None, 4),
    ("STACK_GLOBAL", b"\x93", None, 4),
    ("MEMOIZE", b"\x94", None, 4),
    ("FRAME", b"\x95", read_uint8, 4),
    # protocol 5
    ("BYTEARRAY8", b"\x96", read_bytearray8, 5),
    ("NEXT_BUFFER", b"\x97", None, 5),
    ("READONLY_BUFFER", b"\x98", None, 5),
]

OPCODE_TABLE: dict[int, OpcodeInfo] = {
    code[0]: OpcodeInfo(name, code[0], reader, proto)
    for name, code, reader, proto in _OPCODES
}

OPCODE_BY_NAME: dict[str, OpcodeInfo] = {
    info.name: info for info in OPCODE_TABLE.values()
}

# Opcodes pushing a text literal usable as a STACK_GLOBAL module/name. Counted
# byte strings are included: the host deserializer decodes them to str too.
STRING_PUSH_OPS = frozenset({
    "STRING", "BINSTRING", "SHORT_BINSTRING", "UNICODE", "BINUNICODE",
    "SHORT_BINUNICODE", "BINUNICODE8",
})

BYTES_PUSH_OPS = frozenset({
    "BINBYTES", "SHORT_BINBYTES", "BINBYTES8", "BYTEARRAY8",
})

INT_PUSH_OPS = frozenset({
    "INT", "BININT", "BININT1", "BININT2", "LONG", "LONG1", "LONG4",
})
