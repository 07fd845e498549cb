"""Byte-aligned varint codec over differentially coded keys.

Each delta is written least-significant 7 bits first; the top bit of a byte
is 1 on every byte except the last one of a value. Values below 2^7 take one
byte, below 2^14 two bytes, and so on (at most five bytes for 32-bit input).

Inserting key a between x_i and x_{i+1} only replaces the bytes of the single
delta x_{i+1}-x_i with the encodings of a-x_i and x_{i+1}-a; everything before
is left untouched and everything after is moved as-is. Deleting merges the two
deltas adjacent to the removed key, so the payload never grows.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ContractViolationError, CorruptionError
from ..kernels import compute_deltas
from .base import Codec, CodecId, CompressedBlock

U32_MAX = 0xFFFFFFFF


def encoded_size(delta: int) -> int:
    """Bytes needed for one delta: 1 for [0,2^7), 2 for [2^7,2^14), ..."""
    if delta < 0x80:
        return 1
    size = 1
    while delta >= 0x80:
        delta >>= 7
        size += 1
    return size


def encode_value(delta: int) -> bytes:
    out = bytearray()
    while delta >= 0x80:
        out.append((delta & 0x7F) | 0x80)
        delta >>= 7
    out.append(delta)
    return bytes(out)


def encode_deltas(deltas) -> bytes:
    out = bytearray()
    for d in deltas:
        d = int(d)
        while d >= 0x80:
            out.append((d & 0x7F) | 0x80)
            d >>= 7
        out.append(d)
    return bytes(out)


def decode_scalar(payload: bytes, n: int, start: int) -> list:
    """Reference one-byte-at-a-time decoder, prefix sum integrated."""
    out = []
    acc = start
    pos = 0
    end = len(payload)
    for _ in range(n):
        value = 0
        shift = 0
        while True:
            if pos >= end:
                raise CorruptionError("varint payload truncated")
            byte = payload[pos]
            pos += 1
            value |= (byte & 0x7F) << shift
            if byte < 0x80:
                break
            shift += 7
            if shift > 34:
                raise CorruptionError("varint value exceeds 32 bits")
        if value > U32_MAX:
            raise CorruptionError("varint value exceeds 32 bits")
        acc = (acc + value) & U32_MAX
        out.append(acc)
    if pos != end:
        raise CorruptionError(f"{end - pos} trailing bytes after {n} varint values")
    return out


class VByteCodec(Codec):
    codec_id = CodecId.VBYTE

    def compress(self, keys, start: int) -> CompressedBlock:
        keys = np.asarray(keys, dtype=np.uint32)
        if not 0 < keys.size <= self.max_keys:
            raise ContractViolationError(f"block size {keys.size} out of range")
        payload = encode_deltas(compute_deltas(keys, start))
        return CompressedBlock(payload, keys.size, len(payload), start, int(keys[-1]))

    def decompress(self, block: CompressedBlock) -> np.ndarray:
        return np.array(decode_scalar(block.payload, block.n, block.start), dtype=np.uint32)

    def payload_bytes(self, n: int, meta: int) -> int:
        return meta

    def select(self, block: CompressedBlock, i: int) -> int:
        if not 0 <= i < block.n:
            raise ContractViolationError(f"select index {i} out of range")
        payload = block.payload
        acc = block.start
        pos = 0
        for _ in range(i + 1):
            value = 0
            shift = 0
            while True:
                byte = payload[pos]
                pos += 1
                value |= (byte & 0x7F) << shift
                if byte < 0x80:
                    break
                shift += 7
            acc = (acc + value) & U32_MAX
        return acc

    def find_lower_bound(self, block: CompressedBlock, target: int):
        if block.n == 0 or target > block.last:
            return None
        payload = block.payload
        acc = block.start
        pos = 0
        for i in range(block.n):
            value = 0
            shift = 0
            while True:
                byte = payload[pos]
                pos += 1
                value |= (byte & 0x7F) << shift
                if byte < 0x80:
                    break
                shift += 7
            acc = (acc + value) & U32_MAX
            if acc >= target:
                return i, acc
        return None

    def _locate_delta(self, block: CompressedBlock, key: int):
        """(index, byte offset, byte length, prev key, this key) of the first
        delta whose reconstructed key is >= key."""
        payload = block.payload
        acc = block.start
        pos = 0
        for i in range(block.n):
            prev = acc
            begin = pos
            value = 0
            shift = 0
            while True:
                byte = payload[pos]
                pos += 1
                value |= (byte & 0x7F) << shift
                if byte < 0x80:
                    break
                shift += 7
            acc = (acc + value) & U32_MAX
            if acc >= key:
                return i, begin, pos - begin, prev, acc
        raise AssertionError("caller guarantees key <= block.last")

    def insert(self, block: CompressedBlock, key: int):
        if block.n >= self.max_keys:
            raise ContractViolationError("block is full; split before inserting")
        if block.n == 0:
            return self.compress([key], block.start), 0
        if key > block.last:
            return self.append(block, key), block.n
        i, offset, length, prev, found = self._locate_delta(block, key)
        if found == key:
            return None
        # split delta prev->found into prev->key->found
        patch = encode_value(key - prev) + encode_value(found - key)
        payload = block.payload[:offset] + patch + block.payload[offset + length:]
        new_block = CompressedBlock(payload, block.n + 1, len(payload), block.start, block.last)
        return new_block, i

    def append(self, block: CompressedBlock, key: int) -> CompressedBlock:
        if block.n >= self.max_keys:
            raise ContractViolationError("block is full; split before appending")
        if block.n == 0:
            return self.compress([key], block.start)
        if key <= block.last:
            raise ContractViolationError(f"append key {key} not above last {block.last}")
        payload = block.payload + encode_value(key - block.last)
        return CompressedBlock(payload, block.n + 1, len(payload), block.start, key)

    def delete(self, block: CompressedBlock, slot: int):
        if not 0 <= slot < block.n:
            raise ContractViolationError(f"delete slot {slot} out of range")
        payload = block.payload
        old_len = len(payload)
        # walk to the slot'th delta
        acc = block.start
        pos = 0
        prev = acc
        begin = 0
        for i in range(slot + 1):
            prev = acc
            begin = pos
            value = 0
            shift = 0
            while True:
                byte = payload[pos]
                pos += 1
                value |= (byte & 0x7F) << shift
                if byte < 0x80:
                    break
                shift += 7
            acc = (acc + value) & U32_MAX
        if block.n == 1:
            empty = CompressedBlock(b"", 0, 0, block.start, block.start)
            return empty, -old_len
        if slot == block.n - 1:
            # drop the trailing delta; new last is the key before it
            new_payload = payload[:begin]
            new_block = CompressedBlock(new_payload, block.n - 1, len(new_payload),
                                        block.start, prev)
            return new_block, len(new_payload) - old_len
        # merge the removed key's delta with its successor
        nxt_begin = pos
        value = 0
        shift = 0
        while True:
            byte = payload[pos]
            pos += 1
            value |= (byte & 0x7F) << shift
            if byte < 0x80:
                break
            shift += 7
        merged = encode_value((acc - prev) + value)
        new_payload = payload[:begin] + merged + payload[pos:]
        new_block = CompressedBlock(new_payload, block.n - 1, len(new_payload),
                                    block.start, block.last)
        return new_block, len(new_payload) - old_len

    def estimate_insert_growth(self, block: Optional[CompressedBlock], key: int) -> int:
        if block is None or block.n == 0:
            return encoded_size(key)  # fresh block: one delta from start
        if key > block.last:
            return encoded_size(key - block.last)
        return 10  # two five-byte deltas replacing a one-byte one

    def worst_case_growth(self) -> int:
        return 10
