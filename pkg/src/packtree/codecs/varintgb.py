"""Group varint codec: one control byte steers four variable-length deltas.

Deltas are grouped four at a time. Each group is a control byte followed by
the four values, each stored little-endian in 1..4 bytes. The control byte
packs one 2-bit length descriptor (byte count minus one) per value, the
first value's descriptor in the two most significant bits. A trailing group
with fewer than four values keeps the control byte, leaves the unused
descriptor bits zero and stores no bytes for the missing slots.

Decoding is branch-light: the control byte indexes a 256-entry table of
per-group byte lengths, so the four values are sliced out without inspecting
data bytes. Inserting at slot i keeps every complete group before group
i//4 byte-identical and re-encodes from that group on.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ContractViolationError, CorruptionError
from ..kernels import compute_deltas
from .base import Codec, CodecId, CompressedBlock

U32_MAX = 0xFFFFFFFF

# LENGTHS[control] = (len0, len1, len2, len3); GROUP_BYTES[control] = their sum
LENGTHS = tuple(
    tuple(((c >> (6 - 2 * j)) & 3) + 1 for j in range(4)) for c in range(256)
)
GROUP_BYTES = tuple(sum(entry) for entry in LENGTHS)


def _byte_len(delta: int) -> int:
    if delta < 0x100:
        return 1
    if delta < 0x10000:
        return 2
    if delta < 0x1000000:
        return 3
    return 4


def encode_deltas(deltas) -> bytes:
    out = bytearray()
    for g in range(0, len(deltas), 4):
        group = deltas[g:g + 4]
        control = 0
        body = bytearray()
        for j, d in enumerate(group):
            d = int(d)
            length = _byte_len(d)
            control |= (length - 1) << (6 - 2 * j)
            body += d.to_bytes(length, "little")
        out.append(control)
        out += body
    return bytes(out)


class VarIntGBCodec(Codec):
    codec_id = CodecId.VARINTGB

    def compress(self, keys, start: int) -> CompressedBlock:
        keys = np.asarray(keys, dtype=np.uint32)
        if not 0 < keys.size <= self.max_keys:
            raise ContractViolationError(f"block size {keys.size} out of range")
        payload = encode_deltas(compute_deltas(keys, start))
        return CompressedBlock(payload, keys.size, len(payload), start, int(keys[-1]))

    def decompress(self, block: CompressedBlock) -> np.ndarray:
        payload = block.payload
        n = block.n
        out = np.empty(n, dtype=np.uint32)
        acc = block.start
        pos = 0
        i = 0
        while i < n:
            if pos >= len(payload):
                raise CorruptionError("group varint payload truncated")
            lens = LENGTHS[payload[pos]]
            pos += 1
            for j in range(min(4, n - i)):
                length = lens[j]
                if pos + length > len(payload):
                    raise CorruptionError("group varint payload truncated")
                acc = (acc + int.from_bytes(payload[pos:pos + length], "little")) & U32_MAX
                out[i] = acc
                pos += length
                i += 1
        if pos != len(payload):
            raise CorruptionError(
                f"{len(payload) - pos} trailing bytes after {n} group varint values"
            )
        return out

    def payload_bytes(self, n: int, meta: int) -> int:
        return meta

    def find_lower_bound(self, block: CompressedBlock, target: int):
        if block.n == 0 or target > block.last:
            return None
        payload = block.payload
        acc = block.start
        pos = 0
        i = 0
        n = block.n
        while i < n:
            lens = LENGTHS[payload[pos]]
            pos += 1
            for j in range(min(4, n - i)):
                length = lens[j]
                acc = (acc + int.from_bytes(payload[pos:pos + length], "little")) & U32_MAX
                pos += length
                if acc >= target:
                    return i, acc
                i += 1
        return None

    def _group_offset(self, block: CompressedBlock, group: int) -> int:
        """Byte offset where the given group's control byte starts."""
        payload = block.payload
        pos = 0
        remaining = block.n
        for _ in range(group):
            take = min(4, remaining)
            lens = LENGTHS[payload[pos]]
            pos += 1 + sum(lens[:take])
            remaining -= take
        return pos

    def insert(self, block: CompressedBlock, key: int):
        if block.n >= self.max_keys:
            raise ContractViolationError("block is full; split before inserting")
        if block.n == 0:
            return self.compress([key], block.start), 0
        if key > block.last:
            return self.append(block, key), block.n
        keys = self.decompress(block)
        i = int(np.searchsorted(keys, np.uint32(key)))
        if i < block.n and int(keys[i]) == key:
            return None
        group = i // 4
        offset = self._group_offset(block, group)
        prev = block.start if group == 0 else int(keys[4 * group - 1])
        tail = np.insert(keys[4 * group:], i - 4 * group, np.uint32(key))
        suffix = encode_deltas(compute_deltas(tail, prev))
        payload = block.payload[:offset] + suffix
        return CompressedBlock(payload, block.n + 1, len(payload), block.start, block.last), i

    def append(self, block: CompressedBlock, key: int) -> CompressedBlock:
        if block.n >= self.max_keys:
            raise ContractViolationError("block is full; split before appending")
        if block.n == 0:
            return self.compress([key], block.start)
        if key <= block.last:
            raise ContractViolationError(f"append key {key} not above last {block.last}")
        delta = key - block.last
        fill = block.n % 4
        if fill == 0:
            length = _byte_len(delta)
            control = (length - 1) << 6
            payload = block.payload + bytes([control]) + delta.to_bytes(length, "little")
        else:
            # patch the final group's control byte and extend its body
            group = block.n // 4
            offset = self._group_offset(block, group)
            payload = bytearray(block.payload)
            length = _byte_len(delta)
            payload[offset] |= (length - 1) << (6 - 2 * fill)
            payload += delta.to_bytes(length, "little")
            payload = bytes(payload)
        return CompressedBlock(payload, block.n + 1, len(payload), block.start, key)

    def delete(self, block: CompressedBlock, slot: int):
        if not 0 <= slot < block.n:
            raise ContractViolationError(f"delete slot {slot} out of range")
        old_len = len(block.payload)
        if block.n == 1:
            empty = CompressedBlock(b"", 0, 0, block.start, block.start)
            return empty, -old_len
        keys = self.decompress(block)
        group = slot // 4
        offset = self._group_offset(block, group)
        prev = block.start if group == 0 else int(keys[4 * group - 1])
        tail = np.delete(keys[4 * group:], slot - 4 * group)
        new_last = block.last if slot < block.n - 1 else int(keys[block.n - 2])
        if tail.size == 0:
            payload = block.payload[:offset]
        else:
            payload = block.payload[:offset] + encode_deltas(compute_deltas(tail, prev))
        new_block = CompressedBlock(payload, block.n - 1, len(payload), block.start, new_last)
        return new_block, len(payload) - old_len

    def estimate_insert_growth(self, block: Optional[CompressedBlock], key: int) -> int:
        if block is None or block.n == 0:
            start = 0 if block is None else block.start
            return 1 + _byte_len(key - start)
        if key > block.last:
            extra_control = 1 if block.n % 4 == 0 else 0
            return extra_control + _byte_len(key - block.last)
        # split delta -> two deltas no longer than it, plus at most one new group
        return 5

    def worst_case_growth(self) -> int:
        return 6  # five-byte fresh block beats any in-place patch
