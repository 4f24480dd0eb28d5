"""Binary container for codeword streams.

Layout (little-endian multi-byte integers):

    magic "DVFH" | version u8 | variant u8 (0 standard, 1 shifted) | m u8 |
    n u32 | message bit length u64 | model digest (8 bytes) |
    shift-table digest (8 bytes, zero for standard) |
    symbols packed MSB-first at ceil(log2 m) bits each, zero-padded to a
    byte boundary.

The container carries digests only, never the model itself: decoding
requires the model (and shift table) files, and mismatched digests are
rejected.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

MAGIC = b"DVFH"
VERSION = 1
_HEADER = struct.Struct("<4sBBBIQ8s8s")


class ContainerError(ValueError):
    """Malformed container or digest mismatch."""


@dataclass(frozen=True, slots=True)
class ContainerHeader:
    variant: str  # "standard" | "shifted"
    alphabet_size: int
    block_length: int
    message_length: int
    model_digest: bytes  # 8 bytes
    shift_digest: bytes  # 8 bytes, zeros for standard


def bits_per_symbol(m: int) -> int:
    return (m - 1).bit_length()


def pack_container(
    codewords: Sequence[Sequence[int]],
    *,
    variant: str,
    alphabet_size: int,
    block_length: int,
    message_length: int,
    model_digest: bytes,
    shift_digest: Optional[bytes] = None,
) -> bytes:
    if variant not in ("standard", "shifted"):
        raise ContainerError(f"unknown variant {variant!r}")
    if not (2 <= alphabet_size <= 255):
        raise ContainerError(f"alphabet size {alphabet_size} out of range")
    shift8 = (shift_digest or b"")[:8].ljust(8, b"\x00")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        1 if variant == "shifted" else 0,
        alphabet_size,
        block_length,
        message_length,
        model_digest[:8],
        shift8,
    )
    bps = bits_per_symbol(alphabet_size)
    out = bytearray(header)
    acc = 0
    nbits = 0
    for block in codewords:
        if len(block) != block_length:
            raise ContainerError(f"block of {len(block)} symbols, expected {block_length}")
        for sym in block:
            if not (0 <= sym < alphabet_size):
                raise ContainerError(f"symbol {sym} out of range")
            acc = (acc << bps) | sym
            nbits += bps
            while nbits >= 8:
                nbits -= 8
                out.append((acc >> nbits) & 0xFF)
    if nbits:
        out.append((acc << (8 - nbits)) & 0xFF)
    return bytes(out)


def unpack_container(data: bytes) -> tuple[ContainerHeader, tuple[tuple[int, ...], ...]]:
    if len(data) < _HEADER.size:
        raise ContainerError("container shorter than its header")
    magic, version, variant_byte, m, n, msg_len, model8, shift8 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    if variant_byte not in (0, 1):
        raise ContainerError(f"unknown variant byte {variant_byte}")
    if m < 2 or n < 2:
        raise ContainerError(f"invalid dimensions m={m}, n={n}")
    header = ContainerHeader(
        variant="shifted" if variant_byte else "standard",
        alphabet_size=m,
        block_length=n,
        message_length=msg_len,
        model_digest=model8,
        shift_digest=shift8,
    )
    payload = data[_HEADER.size:]
    bps = bits_per_symbol(m)
    total_bits = 8 * len(payload)
    block_bits = bps * n
    blocks = total_bits // block_bits
    codewords = []
    acc = int.from_bytes(payload, "big") >> (total_bits - blocks * block_bits) if payload else 0
    # Note: when block_bits < 8 the byte padding can look like extra trailing
    # blocks of zero symbols; the message length in the header makes them
    # harmless (decoding truncates to it).
    mask = (1 << bps) - 1
    for b in range(blocks):
        shift = (blocks - 1 - b) * block_bits
        chunk = (acc >> shift) & ((1 << block_bits) - 1)
        block = tuple((chunk >> ((n - 1 - i) * bps)) & mask for i in range(n))
        for sym in block:
            if sym >= m:
                raise ContainerError(f"symbol {sym} out of range for m={m}")
        codewords.append(block)
    return header, tuple(codewords)
