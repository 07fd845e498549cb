"""Uniform block-codec contract shared by all key compressors.

A block holds up to max_keys strictly increasing 32-bit keys. Every codec
supports compress, decompress, select, find_lower_bound, insert, append and
delete over the compressed payload, plus a worst-case growth estimate so
callers can reserve node space before mutating.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import ContractViolationError

IntArray = Union[Sequence[int], np.ndarray]


class CodecId(IntEnum):
    UNCOMPRESSED = 0
    VBYTE = 1
    VARINTGB = 2
    MASKEDVBYTE = 3
    BP128 = 4
    FOR = 5
    SIMDFOR = 6


@dataclass(slots=True)
class CompressedBlock:
    """One compressed run of keys plus the metadata needed to decode it.

    meta is the payload byte size for byte-oriented codecs and the bit width
    for the bit-packed family. start is the value preceding the block for
    differential codecs and the block's first key for the offset-packed
    family. last caches the highest key so appends never decode.
    """

    payload: bytes
    n: int
    meta: int
    start: int
    last: int


class Codec:
    codec_id: CodecId
    differential = True          # payload stores successive differences
    base_is_first_key = False    # offset family: start holds the first key
    default_max_keys = 256

    def __init__(self, max_keys: Optional[int] = None):
        self.max_keys = max_keys if max_keys is not None else self.default_max_keys

    # -- required per codec ------------------------------------------------

    def compress(self, keys: IntArray, start: int) -> CompressedBlock:
        raise NotImplementedError

    def decompress(self, block: CompressedBlock) -> np.ndarray:
        raise NotImplementedError

    def payload_bytes(self, n: int, meta: int) -> int:
        """True payload length implied by a descriptor."""
        raise NotImplementedError

    def estimate_insert_growth(self, block: Optional[CompressedBlock], key: int) -> int:
        """Upper bound on payload growth for inserting key; never exceeded."""
        raise NotImplementedError

    def worst_case_growth(self) -> int:
        """Block-independent bound on payload growth for any single insert."""
        raise NotImplementedError

    # -- generic fallbacks (decode-modify-recompress) ----------------------

    def select(self, block: CompressedBlock, i: int) -> int:
        if not 0 <= i < block.n:
            raise ContractViolationError(f"select index {i} out of range")
        return int(self.decompress(block)[i])

    def find_lower_bound(self, block: CompressedBlock, target: int):
        """Smallest (index, key) with key >= target, or None."""
        if block.n == 0 or target > block.last:
            return None
        keys = self.decompress(block)
        i = int(np.searchsorted(keys, np.uint32(target)))
        return i, int(keys[i])

    def insert(self, block: CompressedBlock, key: int):
        """New block plus the slot of key, or None when key already exists."""
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
        new_keys = np.insert(keys, i, np.uint32(key))
        return self._recompress(new_keys, block.start), i

    def append(self, block: CompressedBlock, key: int) -> CompressedBlock:
        if block.n >= self.max_keys:
            raise ContractViolationError("block is full; split before appending")
        if block.n == 0:
            return self.compress([key], block.start)
        if key <= block.last:
            raise ContractViolationError(f"append key {key} not above last {block.last}")
        keys = self.decompress(block)
        new_keys = np.append(keys, np.uint32(key))
        return self._recompress(new_keys, block.start)

    def delete(self, block: CompressedBlock, slot: int):
        """New block plus growth in payload bytes (positive = grew)."""
        if not 0 <= slot < block.n:
            raise ContractViolationError(f"delete slot {slot} out of range")
        keys = self.decompress(block)
        new_keys = np.delete(keys, slot)
        old_len = len(block.payload)
        if new_keys.size == 0:
            empty = CompressedBlock(b"", 0, 0, block.start, block.start)
            return empty, -old_len
        new_block = self._recompress(new_keys, block.start)
        return new_block, len(new_block.payload) - old_len

    def _recompress(self, keys: np.ndarray, start: int) -> CompressedBlock:
        return self.compress(keys, start)
