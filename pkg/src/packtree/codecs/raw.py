"""Identity codec: keys stored as little-endian 32-bit words, no coding.

Serves as the correctness oracle for every other codec and as the baseline
in size and speed measurements.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ContractViolationError, CorruptionError
from .base import Codec, CodecId, CompressedBlock


class RawCodec(Codec):
    codec_id = CodecId.UNCOMPRESSED
    differential = False

    def compress(self, keys, start: int) -> CompressedBlock:
        arr = np.asarray(keys, dtype=np.uint32)
        if not 0 < arr.size <= self.max_keys:
            raise ContractViolationError(f"block size {arr.size} out of range")
        if arr.size > 1 and not np.all(arr[1:] > arr[:-1]):
            raise ContractViolationError("keys are not strictly increasing")
        if arr[0] < start:
            raise ContractViolationError(f"first key {int(arr[0])} below start {start}")
        payload = arr.astype("<u4").tobytes()
        return CompressedBlock(payload, arr.size, len(payload), start, int(arr[-1]))

    def decompress(self, block: CompressedBlock) -> np.ndarray:
        if len(block.payload) != 4 * block.n:
            raise CorruptionError(
                f"raw payload is {len(block.payload)} bytes, expected {4 * block.n}"
            )
        return np.frombuffer(block.payload, dtype="<u4").astype(np.uint32)

    def payload_bytes(self, n: int, meta: int) -> int:
        return 4 * n

    def select(self, block: CompressedBlock, i: int) -> int:
        if not 0 <= i < block.n:
            raise ContractViolationError(f"select index {i} out of range")
        return int.from_bytes(block.payload[4 * i:4 * i + 4], "little")

    def estimate_insert_growth(self, block: Optional[CompressedBlock], key: int) -> int:
        return 4

    def worst_case_growth(self) -> int:
        return 4
