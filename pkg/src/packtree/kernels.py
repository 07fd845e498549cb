"""Shared integer primitives: delta transforms, prefix sums and bit packing.

All functions are pure and operate on 32-bit unsigned values with wraparound
semantics (callers guarantee valid key ranges, so no reconstruction overflows
in practice). Packed payloads are flat LSB-first bitstreams, which is the same
layout as little-endian 32-bit words filled from the least significant bit up.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .errors import ContractViolationError, CorruptionError

U32_MASK = 0xFFFFFFFF

IntArray = Union[Sequence[int], np.ndarray]


def _as_u32_array(values: IntArray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.uint32)
    if arr.ndim != 1:
        raise ContractViolationError("expected a flat sequence of integers")
    return arr


def compute_deltas(keys: IntArray, start: int) -> np.ndarray:
    """Successive differences of a strictly increasing key sequence.

    ``start`` is the value preceding the block (0 for a block that opens a
    node, in which case the first key is stored as its own delta). The first
    key may equal ``start``: deletions can lower the preceding block's bounds
    below a start recorded earlier, letting that key be reinserted here.
    """
    arr = _as_u32_array(keys)
    if arr.size == 0:
        return arr
    if arr[0] < start:
        raise ContractViolationError(
            f"first key {int(arr[0])} below block start {start}"
        )
    if arr.size > 1 and not np.all(arr[1:] > arr[:-1]):
        raise ContractViolationError("keys are not strictly increasing")
    out = np.empty(arr.size, dtype=np.uint32)
    out[0] = arr[0] - np.uint32(start)
    np.subtract(arr[1:], arr[:-1], out=out[1:])
    return out


def prefix_sum(deltas: IntArray, start: int = 0) -> np.ndarray:
    """Scalar running sum, the reference inverse of compute_deltas."""
    acc = start & U32_MASK
    out = []
    for d in deltas:
        acc = (acc + int(d)) & U32_MASK
        out.append(acc)
    return np.array(out, dtype=np.uint32)


def prefix_sum_vector4(deltas: IntArray, start: int = 0) -> np.ndarray:
    """Four-lane prefix sum: shift-by-two/add, shift-by-one/add per group.

    Bit-identical to prefix_sum. Input length must be divisible by 4; the
    caller pads. The last lane of each group carries into the next group.
    """
    arr = _as_u32_array(deltas)
    if arr.size % 4 != 0:
        raise ContractViolationError("vector prefix sum needs a multiple of 4 lanes")
    if arr.size == 0:
        return arr.copy()
    v = arr.reshape(-1, 4).copy()
    v[:, 2:] = v[:, 2:] + v[:, :2]
    v[:, 1:] = v[:, 1:] + v[:, :3]
    carries = np.cumsum(v[:, 3], dtype=np.uint32)
    bases = np.empty_like(carries)
    bases[0] = np.uint32(start & U32_MASK)
    bases[1:] = carries[:-1] + np.uint32(start & U32_MASK)
    v += bases[:, None]
    return v.reshape(-1)


def max_bits(values: IntArray) -> int:
    """Minimal width b such that every value fits in b bits (0 for empty)."""
    arr = np.asarray(values)
    if arr.size == 0:
        return 0
    return int(arr.max()).bit_length()


def pack_bits(values: IntArray, b: int) -> bytes:
    """Pack values at a fixed width of b bits each into ceil(n*b/8) bytes.

    The final partial byte is padded with zero bits.
    """
    if not 0 <= b <= 32:
        raise ContractViolationError(f"bit width {b} out of [0, 32]")
    arr = _as_u32_array(values)
    if b < 32 and arr.size and int(arr.max()) >> b:
        raise ContractViolationError(f"value {int(arr.max())} does not fit in {b} bits")
    if b == 0 or arr.size == 0:
        return b""
    lanes = np.unpackbits(
        arr.astype("<u4").view(np.uint8).reshape(-1, 4), axis=1, bitorder="little"
    )[:, :b]
    return np.packbits(lanes.reshape(-1), bitorder="little").tobytes()


def unpack_bits(payload: bytes, n: int, b: int) -> np.ndarray:
    """Exact inverse of pack_bits for n values at width b."""
    if not 0 <= b <= 32:
        raise ContractViolationError(f"bit width {b} out of [0, 32]")
    if b == 0 or n == 0:
        return np.zeros(n, dtype=np.uint32)
    needed = (n * b + 7) // 8
    if len(payload) < needed:
        raise CorruptionError(f"payload holds {len(payload)} bytes, need {needed}")
    raw = np.frombuffer(payload, dtype=np.uint8, count=needed)
    bits = np.unpackbits(raw, bitorder="little", count=n * b).reshape(n, b)
    lanes = np.zeros((n, 32), dtype=np.uint8)
    lanes[:, :b] = bits
    return np.packbits(lanes, axis=1, bitorder="little").view("<u4").reshape(n).astype(np.uint32)
