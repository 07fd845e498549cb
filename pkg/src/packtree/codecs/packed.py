"""Fixed-width bit-packed codecs: binary-packed deltas and frame-of-reference.

BP128 packs differentially coded deltas at a shared bit width b into a fixed
number of 32-bit-capable lanes (128 by default), zero-padding unused lanes,
so a block always occupies lanes*b bits regardless of fill. Decoding unpacks
all lanes and reconstructs keys with the four-lane prefix sum.

FOR stores each key as its offset from the block's first key, including the
leading zero for the first key itself, packed at b = ceil(log2(last-first+1))
bits with no padding lanes. Keys are recovered by adding the base back; no
prefix sum is needed, so any slot can be read in isolation. SIMDFOR shares
the byte format exactly and differs only in the decode kernel it favors.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ContractViolationError, CorruptionError
from ..kernels import (
    compute_deltas,
    max_bits,
    pack_bits,
    prefix_sum,
    prefix_sum_vector4,
    unpack_bits,
)
from .base import Codec, CodecId, CompressedBlock


def read_lane(payload: bytes, i: int, b: int) -> int:
    """Value of lane i in a b-bit packed stream, without unpacking the rest."""
    if b == 0:
        return 0
    bit = i * b
    lo = bit >> 3
    hi = (bit + b - 1) >> 3
    word = int.from_bytes(payload[lo:hi + 1], "little")
    return (word >> (bit & 7)) & ((1 << b) - 1)


def write_lane(buf: bytearray, i: int, b: int, value: int) -> None:
    """Overwrite lane i in place; buf must already cover the lane's bytes."""
    if b == 0:
        return
    bit = i * b
    lo = bit >> 3
    hi = (bit + b - 1) >> 3
    shift = bit & 7
    mask = ((1 << b) - 1) << shift
    word = int.from_bytes(buf[lo:hi + 1], "little")
    word = (word & ~mask) | (value << shift)
    buf[lo:hi + 1] = word.to_bytes(hi - lo + 1, "little")


class BP128Codec(Codec):
    """Binary packing of deltas over a fixed lane count; meta is the width."""

    codec_id = CodecId.BP128
    default_max_keys = 128

    def compress(self, keys, start: int) -> CompressedBlock:
        keys = np.asarray(keys, dtype=np.uint32)
        if not 0 < keys.size <= self.max_keys:
            raise ContractViolationError(f"block size {keys.size} out of range")
        deltas = compute_deltas(keys, start)
        b = max_bits(deltas)
        lanes = np.zeros(self.max_keys, dtype=np.uint32)
        lanes[:deltas.size] = deltas
        payload = pack_bits(lanes, b)
        return CompressedBlock(payload, keys.size, b, start, int(keys[-1]))

    def decompress(self, block: CompressedBlock) -> np.ndarray:
        b = block.meta
        expected = self.payload_bytes(block.n, b)
        if len(block.payload) != expected:
            raise CorruptionError(
                f"packed payload is {len(block.payload)} bytes, expected {expected}"
            )
        deltas = unpack_bits(block.payload, self.max_keys, b)
        if self.max_keys % 4 == 0:
            keys = prefix_sum_vector4(deltas, block.start)
        else:
            keys = prefix_sum(deltas, block.start)
        return keys[:block.n]

    def payload_bytes(self, n: int, meta: int) -> int:
        return (self.max_keys * meta + 7) // 8

    def append(self, block: CompressedBlock, key: int) -> CompressedBlock:
        if block.n >= self.max_keys:
            raise ContractViolationError("block is full; split before appending")
        if block.n == 0:
            return self.compress([key], block.start)
        if key <= block.last:
            raise ContractViolationError(f"append key {key} not above last {block.last}")
        delta = key - block.last
        b = block.meta
        if delta.bit_length() <= b:
            # the reserved lane is already zero; patch it without re-encoding
            buf = bytearray(block.payload)
            write_lane(buf, block.n, b, delta)
            return CompressedBlock(bytes(buf), block.n + 1, b, block.start, key)
        keys = np.append(self.decompress(block), np.uint32(key))
        return self.compress(keys, block.start)

    def estimate_insert_growth(self, block: Optional[CompressedBlock], key: int) -> int:
        if block is None:
            return self.payload_bytes(1, key.bit_length())
        if block.n == 0:
            return self.payload_bytes(1, (key - block.start).bit_length())
        if key > block.last:
            b_new = max(block.meta, (key - block.last).bit_length())
            return self.payload_bytes(0, b_new) - len(block.payload)
        return 0  # splitting a delta in two cannot raise the maximum delta

    def worst_case_growth(self) -> int:
        return self.payload_bytes(0, 32)  # lanes repacked at full width


class ForCodec(Codec):
    """Frame of reference: offsets from the first key, tightly packed.

    meta is the offset bit width; start holds the first key itself rather
    than a preceding bound, so re-basing happens when slot 0 changes.
    """

    codec_id = CodecId.FOR
    differential = False
    base_is_first_key = True

    def compress(self, keys, start: int) -> CompressedBlock:
        arr = np.asarray(keys, dtype=np.uint32)
        if not 0 < arr.size <= self.max_keys:
            raise ContractViolationError(f"block size {arr.size} out of range")
        if arr.size > 1 and not np.all(arr[1:] > arr[:-1]):
            raise ContractViolationError("keys are not strictly increasing")
        base = int(arr[0])
        b = (int(arr[-1]) - base).bit_length()
        payload = pack_bits(arr - np.uint32(base), b)
        return CompressedBlock(payload, arr.size, b, base, int(arr[-1]))

    def decompress(self, block: CompressedBlock) -> np.ndarray:
        b = block.meta
        expected = self.payload_bytes(block.n, b)
        if len(block.payload) != expected:
            raise CorruptionError(
                f"packed payload is {len(block.payload)} bytes, expected {expected}"
            )
        offsets = unpack_bits(block.payload, block.n, b)
        return offsets + np.uint32(block.start)

    def payload_bytes(self, n: int, meta: int) -> int:
        return (n * meta + 7) // 8

    def select(self, block: CompressedBlock, i: int) -> int:
        if not 0 <= i < block.n:
            raise ContractViolationError(f"select index {i} out of range")
        return block.start + read_lane(block.payload, i, block.meta)

    def find_lower_bound(self, block: CompressedBlock, target: int):
        # binary search on the packed offsets, no bulk decode
        if block.n == 0 or target > block.last:
            return None
        goal = target - block.start
        payload, b = block.payload, block.meta
        lo, hi = 0, block.n - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if read_lane(payload, mid, b) < goal:
                lo = mid + 1
            else:
                hi = mid
        return lo, block.start + read_lane(payload, lo, b)

    def append(self, block: CompressedBlock, key: int) -> CompressedBlock:
        if block.n >= self.max_keys:
            raise ContractViolationError("block is full; split before appending")
        if block.n == 0:
            return self.compress([key], block.start)
        if key <= block.last:
            raise ContractViolationError(f"append key {key} not above last {block.last}")
        offset = key - block.start
        b = block.meta
        if offset.bit_length() <= b:
            buf = bytearray(block.payload)
            buf += b"\x00" * (self.payload_bytes(block.n + 1, b) - len(buf))
            write_lane(buf, block.n, b, offset)
            return CompressedBlock(bytes(buf), block.n + 1, b, block.start, key)
        keys = np.append(self.decompress(block), np.uint32(key))
        return self.compress(keys, block.start)

    def estimate_insert_growth(self, block: Optional[CompressedBlock], key: int) -> int:
        if block is None:
            return 0  # a single key packs at width 0
        if block.n == 0:
            return 0
        if key > block.last:
            b_new = max(block.meta, (key - block.start).bit_length())
        elif key < block.start:
            b_new = (block.last - key).bit_length()
        else:
            b_new = block.meta
        return self.payload_bytes(block.n + 1, b_new) - len(block.payload)

    def worst_case_growth(self) -> int:
        return self.payload_bytes(self.max_keys, 32)


class SimdForCodec(ForCodec):
    """Byte-identical to FOR; exists so vector-decode paths can be selected."""

    codec_id = CodecId.SIMDFOR
