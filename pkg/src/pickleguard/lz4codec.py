"""Minimal LZ4 frame codec.

The decoder handles compressed and uncompressed blocks with a hard output
budget and reports problems as (bytes, error) instead of raising. The
encoder emits spec-correct frames with uncompressed blocks only - enough
for fixtures that real lz4 readers accept.
"""

from __future__ import annotations

import struct
from typing import Optional

FRAME_MAGIC = b"\x04\x22\x4d\x18"

_P1, _P2, _P3, _P4, _P5 = (
    2654435761, 2246822519, 3266489917, 668265263, 374761393)
_M32 = 0xFFFFFFFF


def _rotl(x: int, r: int) -> int:
    return ((x << r) | (x >> (32 - r))) & _M32


def xxh32(data: bytes, seed: int = 0) -> int:
    n = len(data)
    idx = 0
    if n >= 16:
        v1 = (seed + _P1 + _P2) & _M32
        v2 = (seed + _P2) & _M32
        v3 = seed & _M32
        v4 = (seed - _P1) & _M32
        while idx <= n - 16:
            for lane in range(4):
                word = struct.unpack_from("<I", data, idx + lane * 4)[0]
                if lane == 0:
                    v1 = _rotl((v1 + word * _P2) & _M32, 13) * _P1 & _M32
                elif lane == 1:
                    v2 = _rotl((v2 + word * _P2) & _M32, 13) * _P1 & _M32
                elif lane == 2:
                    v3 = _rotl((v3 + word * _P2) & _M32, 13) * _P1 & _M32
                else:
                    v4 = _rotl((v4 + word * _P2) & _M32, 13) * _P1 & _M32
            idx += 16
        acc = (_rotl(v1, 1) + _rotl(v2, 7) + _rotl(v3, 12) + _rotl(v4, 18)) & _M32
    else:
        acc = (seed + _P5) & _M32
    acc = (acc + n) & _M32
    while idx + 4 <= n:
        word = struct.unpack_from("<I", data, idx)[0]
        acc = _rotl((acc + word * _P3) & _M32, 17) * _P4 & _M32
        idx += 4
    while idx < n:
        acc = _rotl((acc + data[idx] * _P5) & _M32, 11) * _P1 & _M32
        idx += 1
    acc ^= acc >> 15
    acc = acc * _P2 & _M32
    acc ^= acc >> 13
    acc = acc * _P3 & _M32
    acc ^= acc >> 16
    return acc


def _decode_block(block: bytes, out: bytearray, budget: int) -> Optional[str]:
    """Decode one LZ4 block into out. Returns an error string or None."""
    i = 0
    n = len(block)
    while i < n:
        token = block[i]
        i += 1
        lit_len = token >> 4
        if lit_len == 15:
            while i < n:
                add = block[i]
                i += 1
                lit_len += add
                if add != 255:
                    break
            else:
                return "truncated literal length"
        if i + lit_len > n:
            return "literal run past block end"
        out += block[i:i + lit_len]
        if len(out) > budget:
            return "budget"
        i += lit_len
        if i >= n:
            return None  # last sequence carries no match
        if i + 2 > n:
            return "truncated match offset"
        offset = struct.unpack_from("<H", block, i)[0]
        i += 2
        if offset == 0 or offset > len(out):
            return f"bad match offset {offset}"
        match_len = (token & 0x0F) + 4
        if (token & 0x0F) == 15:
            while i < n:
                add = block[i]
                i += 1
                match_len += add
                if add != 255:
                    break
            else:
                return "truncated match length"
        src = len(out) - offset
        for _ in range(match_len):
            out.append(out[src])
            src += 1
        if len(out) > budget:
            return "budget"
    return None


def decompress(data: bytes, budget: int) -> tuple[bytes, Optional[str]]:
    """Decode an LZ4 frame. Returns (output, error-or-None).

    Partial output is returned alongside the error so callers can still
    scan whatever decoded.
    """
    out = bytearray()
    if not data.startswith(FRAME_MAGIC):
        return b"", "missing frame magic"
    pos = 4
    if pos + 2 > len(data):
        return b"", "truncated frame descriptor"
    flg, bd = data[pos], data[pos + 1]
    pos += 2
    if (flg >> 6) != 0b01:
        return b"", f"unsupported frame version {flg >> 6}"
    block_checksum = bool(flg & 0x10)
    has_content_size = bool(flg & 0x08)
    content_checksum = bool(flg & 0x04)
    has_dict_id = bool(flg & 0x01)
    del bd
    if has_content_size:
        pos += 8
    if has_dict_id:
        pos += 4
    pos += 1  # header checksum byte; tolerated unverified
    if pos > len(data):
        return b"", "truncated frame header"
    while True:
        if pos + 4 > len(data):
            return bytes(out), "truncated block header"
        block_size = struct.unpack_from("<I", data, pos)[0]
        pos += 4
        if block_size == 0:
            if content_checksum:
                pos += 4
            return bytes(out), None
        uncompressed = bool(block_size & 0x80000000)
        block_size &= 0x7FFFFFFF
        if pos + block_size > len(data):
            return bytes(out), "truncated block payload"
        block = data[pos:pos + block_size]
        pos += block_size
        if block_checksum:
            pos += 4
        if uncompressed:
            out += block
            if len(out) > budget:
                return bytes(out[:budget]), "budget"
        else:
            err = _decode_block(block, out, budget)
            if err == "budget":
                return bytes(out[:budget]), "budget"
            if err is not None:
                return bytes(out), err


def compress(data: bytes) -> bytes:
    """Encode data as an LZ4 frame of uncompressed blocks."""
    flg = 0b01100000  # version 01, block-independent, no checksums/size
    bd = 0x40  # 64 KiB max block size
    descriptor = bytes([flg, bd])
    hc = (xxh32(descriptor) >> 8) & 0xFF
    parts = [FRAME_MAGIC, descriptor, bytes([hc])]
    step = 64 * 1024
    for i in range(0, len(data), step):
        chunk = data[i:i + step]
        parts.append(struct.pack("<I", len(chunk) | 0x80000000))
        parts.append(chunk)
    parts.append(b"\x00\x00\x00\x00")
    return b"".join(parts)
