"""Mask-driven decoder for the unmodified varint byte format.

Compression, point lookups and mutations are inherited unchanged, so the
payload is byte-for-byte the same as the plain varint codec's. Only bulk
decoding differs: instead of branching on every byte, it gathers the
continuation bits of a 16-byte window into a mask, looks the mask up in a
precomputed terminator table and slices whole values out, falling back to
the one-byte-at-a-time decoder for the unaligned tail.
"""

from __future__ import annotations

import numpy as np

from ..errors import CorruptionError
from .base import CodecId, CompressedBlock
from .masked_tables import gather_msb8, terminator_table
from .vbyte import U32_MAX, VByteCodec, decode_scalar

STRIP_MSB = bytes(i & 0x7F for i in range(256))


def decode_vector(payload: bytes, n: int, start: int) -> list:
    """Window-at-a-time decode; output identical to decode_scalar."""
    terms16 = terminator_table()
    stripped = payload.translate(STRIP_MSB)
    out = []
    acc = start
    pos = 0
    i = 0
    end = len(payload)
    while i < n and end - pos >= 16:
        lo = int.from_bytes(payload[pos:pos + 8], "little")
        hi = int.from_bytes(payload[pos + 8:pos + 16], "little")
        terms = terms16[gather_msb8(lo) | (gather_msb8(hi) << 8)]
        if not terms:
            raise CorruptionError("varint value exceeds 32 bits")
        run = pos
        for t in terms:
            stop = pos + t
            if stop - run >= 5:
                raise CorruptionError("varint value exceeds 32 bits")
            value = 0
            for j in range(stop, run - 1, -1):
                value = (value << 7) | stripped[j]
            if value > U32_MAX:
                raise CorruptionError("varint value exceeds 32 bits")
            acc = (acc + value) & U32_MAX
            out.append(acc)
            i += 1
            run = stop + 1
            if i == n:
                break
        pos = run
    if i < n or pos != end:
        # unaligned tail, or trailing-byte validation for an exact finish
        out.extend(decode_scalar(payload[pos:], n - i, acc))
    return out


class MaskedVByteCodec(VByteCodec):
    codec_id = CodecId.MASKEDVBYTE

    def decompress(self, block: CompressedBlock) -> np.ndarray:
        return np.array(
            decode_vector(block.payload, block.n, block.start), dtype=np.uint32
        )
