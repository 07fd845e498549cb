"""Block directory for one node: locating, growing, splitting compressed runs.

A key list owns an ordered sequence of compressed blocks plus one physical
offset per block inside the node's payload area. Descriptor order is key
order; physical order may drift as blocks grow and relocate, leaving holes
that vacuumize reclaims. Empty blocks (gaps) keep their descriptor and range
so deletions stay cheap; they are resurrected by inserts into their range or
dropped by vacuumize.

On-page layout: an 8-byte header (block count), then one 16-byte descriptor
per block (offset, key count, size or bit width, start, last), then the
payload area the offsets point into.
"""

from __future__ import annotations

import struct
from typing import List, Optional, Tuple

import numpy as np

from .codecs import Codec, CodecId, CompressedBlock
from .errors import ContractViolationError, CorruptionError, NeedsSpaceError

HEADER_BYTES = 8
DESC_BYTES = 16
_HEADER = struct.Struct("<HHI")          # block count, reserved, reserved
_DESC = struct.Struct("<HHHHII")         # offset, n, meta, reserved, start, last

PACKED_IDS = frozenset({CodecId.BP128, CodecId.FOR, CodecId.SIMDFOR})


class KeyList:
    """Compressed key storage of one node, bounded by a byte capacity.

    capacity covers the header, the descriptor directory and the payload
    extent together. Mutations either fit (possibly after an internal
    vacuumize) or raise NeedsSpaceError with the key list unchanged, so the
    caller can split the node and retry.
    """

    def __init__(self, codec: Codec, capacity: int):
        self.codec = codec
        self.capacity = capacity
        self.blocks: List[CompressedBlock] = []
        self.offsets: List[int] = []

    # -- space accounting ----------------------------------------------------

    @property
    def key_count(self) -> int:
        return sum(b.n for b in self.blocks)

    def _payload_capacity(self, block_count: Optional[int] = None) -> int:
        count = len(self.blocks) if block_count is None else block_count
        return self.capacity - HEADER_BYTES - DESC_BYTES * count

    def extent(self) -> int:
        ends = [off + len(b.payload)
                for off, b in zip(self.offsets, self.blocks) if b.n > 0]
        return max(ends, default=0)

    def used(self) -> int:
        return HEADER_BYTES + DESC_BYTES * len(self.blocks) + self.extent()

    def payload_bytes_total(self) -> int:
        return sum(len(b.payload) for b in self.blocks)

    def _room_at(self, i: int, payload_cap: int) -> int:
        """Contiguous bytes available to block i at its current offset."""
        base = self.offsets[i]
        limit = payload_cap
        for j, (off, blk) in enumerate(zip(self.offsets, self.blocks)):
            if j == i or blk.n == 0:
                continue
            if off <= base:
                if off + len(blk.payload) > base:
                    return 0  # a live block spans our offset
            elif off < limit:
                limit = off
        return limit - base

    def _extent_excluding(self, i: int) -> int:
        ends = [off + len(b.payload)
                for j, (off, b) in enumerate(zip(self.offsets, self.blocks))
                if j != i and b.n > 0]
        return max(ends, default=0)

    def _place(self, i: int, new_block: CompressedBlock,
               payload_cap: Optional[int] = None) -> None:
        """Swap block i for new_block, relocating it if it no longer fits."""
        cap = self._payload_capacity() if payload_cap is None else payload_cap
        size = len(new_block.payload)
        if size > self._room_at(i, cap):
            spot = self._extent_excluding(i)
            if spot + size > cap:
                raise NeedsSpaceError(f"{size} payload bytes do not fit")
            self.offsets[i] = spot
        self.blocks[i] = new_block

    # -- lookups ---------------------------------------------------------------

    def _locate(self, key: int) -> int:
        """Block whose range could contain key; block 0 when key precedes all.

        For differential codecs start is an exclusive bound (a split block's
        start equals its left neighbor's last key), so a key equal to start
        belongs to the previous block. For the offset-packed family start is
        the block's own first key and equality selects the block itself.
        """
        inclusive = self.codec.base_is_first_key
        idx = 0
        for j, blk in enumerate(self.blocks):
            if blk.start < key or (inclusive and blk.start == key):
                idx = j
            else:
                break
        return idx

    def _slot_base(self, i: int) -> int:
        return sum(b.n for b in self.blocks[:i])

    def find_slot(self, key: int) -> Optional[int]:
        """Global slot of key, or None when absent."""
        if not self.blocks:
            return None
        i = self._locate(key)
        blk = self.blocks[i]
        if blk.n == 0:
            return None
        found = self.codec.find_lower_bound(blk, key)
        if found is None or found[1] != key:
            return None
        return self._slot_base(i) + found[0]

    def lower_bound(self, key: int) -> Optional[Tuple[int, int]]:
        """Smallest (slot, stored key) with stored key >= key, or None."""
        if not self.blocks:
            return None
        i = self._locate(key)
        for j in range(i, len(self.blocks)):
            blk = self.blocks[j]
            if blk.n == 0:
                continue
            found = self.codec.find_lower_bound(blk, key)
            if found is not None:
                return self._slot_base(j) + found[0], found[1]
        return None

    def select(self, slot: int) -> int:
        if not 0 <= slot < self.key_count:
            raise ContractViolationError(f"slot {slot} out of range")
        for blk in self.blocks:
            if slot < blk.n:
                return self.codec.select(blk, slot)
            slot -= blk.n
        raise AssertionError("unreachable")

    def keys(self) -> np.ndarray:
        live = [self.codec.decompress(b) for b in self.blocks if b.n > 0]
        if not live:
            return np.empty(0, dtype=np.uint32)
        return np.concatenate(live)

    def max_key(self) -> Optional[int]:
        for blk in reversed(self.blocks):
            if blk.n > 0:
                return blk.last
        return None

    # -- mutations ---------------------------------------------------------------

    def insert(self, key: int) -> Optional[int]:
        """Global slot of the inserted key; None when it already exists."""
        try:
            return self._insert_once(key)
        except NeedsSpaceError:
            self.vacuumize()
            return self._insert_once(key)

    def _insert_once(self, key: int) -> Optional[int]:
        # capacity may have been lowered since the layout was built; placement
        # checks below only bound the block being moved, so revalidate the
        # whole extent first
        if self.used() > self.capacity:
            raise NeedsSpaceError("existing layout exceeds the capacity")
        if not self.blocks:
            block = self.codec.compress([key], key)
            if HEADER_BYTES + DESC_BYTES + len(block.payload) > self.capacity:
                raise NeedsSpaceError("node too small for a single block")
            self.blocks = [block]
            self.offsets = [0]
            return 0
        i = self._locate(key)
        blk = self.blocks[i]
        if blk.n >= self.codec.max_keys:
            if key > blk.last:
                # past the full block: open a fresh block instead of splitting
                return self._open_block_after(i, key)
            self._split_block(i)
            i = self._locate(key)
            blk = self.blocks[i]
        if key < blk.start:
            # key precedes every block: rebase the first block onto it
            return self._rebase_insert(i, key)
        result = self.codec.insert(blk, key)
        if result is None:
            return None
        new_block, in_slot = result
        self._place(i, new_block)
        return self._slot_base(i) + in_slot

    def _rebase_insert(self, i: int, key: int) -> int:
        blk = self.blocks[i]
        if blk.n == 0:
            self._place(i, self.codec.compress([key], key))
            return self._slot_base(i)
        keys = np.insert(self.codec.decompress(blk), 0, np.uint32(key))
        self._place(i, self.codec.compress(keys, key))
        return self._slot_base(i)

    def _open_block_after(self, i: int, key: int) -> int:
        block = self.codec.compress([key], self.blocks[i].last)
        cap = self._payload_capacity(len(self.blocks) + 1)
        spot = self.extent()
        if spot + len(block.payload) > cap:
            raise NeedsSpaceError("no room for a new block")
        self.blocks.insert(i + 1, block)
        self.offsets.insert(i + 1, spot)
        return self._slot_base(i + 1)

    def _split_block(self, i: int) -> None:
        """Split a full block at its key midpoint into two blocks."""
        blk = self.blocks[i]
        keys = self.codec.decompress(blk)
        half = (blk.n + 1) // 2
        left = self.codec.compress(keys[:half], blk.start)
        right = self.codec.compress(keys[half:], int(keys[half - 1]))
        cap = self._payload_capacity(len(self.blocks) + 1)
        left_size, right_size = len(left.payload), len(right.payload)
        if left_size <= self._room_at(i, cap):
            left_off = self.offsets[i]
        else:
            left_off = self._extent_excluding(i)
            if left_off + left_size > cap:
                raise NeedsSpaceError("no room to split a block")
        right_off = max(self._extent_excluding(i), left_off + left_size)
        if right_off + right_size > cap:
            raise NeedsSpaceError("no room to split a block")
        self.blocks[i] = left
        self.offsets[i] = left_off
        self.blocks.insert(i + 1, right)
        self.offsets.insert(i + 1, right_off)

    def delete(self, key: int) -> Optional[int]:
        """Global slot the key occupied; None when it was absent."""
        try:
            return self._delete_once(key)
        except NeedsSpaceError:
            self.vacuumize()
            return self._delete_once(key)

    def _delete_once(self, key: int) -> Optional[int]:
        if self.used() > self.capacity:
            raise NeedsSpaceError("existing layout exceeds the capacity")
        if not self.blocks:
            return None
        i = self._locate(key)
        blk = self.blocks[i]
        if blk.n == 0:
            return None
        found = self.codec.find_lower_bound(blk, key)
        if found is None or found[1] != key:
            return None
        in_slot = found[0]
        slot = self._slot_base(i) + in_slot
        new_block, _growth = self.codec.delete(blk, in_slot)
        self._place(i, new_block)
        return slot

    # -- reorganization -------------------------------------------------------

    def vacuumize(self) -> int:
        """Drop gaps and close holes; returns reclaimed bytes.

        Byte-oriented codecs keep each block's payload verbatim and only move
        it. The bit-packed family re-encodes all keys into densely filled
        blocks, unless re-chunking would occupy more space than plain
        compaction (merging frame-of-reference blocks can widen offsets), in
        which case it falls back to moving blocks like the byte codecs.
        """
        before = self.used()
        live = [(b, self.codec.decompress(b)) for b in self.blocks if b.n > 0]
        if self.codec.codec_id in PACKED_IDS and live:
            rechunked = self._rechunk([keys for _b, keys in live],
                                      live[0][0].start)
            compact_size = sum(len(b.payload) for b, _k in live)
            rechunk_size = sum(len(b.payload) for b in rechunked)
            rechunk_used = (HEADER_BYTES + DESC_BYTES * len(rechunked)
                            + rechunk_size)
            compact_used = (HEADER_BYTES + DESC_BYTES * len(live)
                            + compact_size)
            if rechunk_used <= compact_used:
                self._adopt(rechunked)
                return before - self.used()
        self._adopt([b for b, _k in live])
        return before - self.used()

    def _rechunk(self, key_arrays: List[np.ndarray], first_start: int
                 ) -> List[CompressedBlock]:
        keys = np.concatenate(key_arrays)
        blocks = []
        start = first_start
        for lo in range(0, keys.size, self.codec.max_keys):
            chunk = keys[lo:lo + self.codec.max_keys]
            blocks.append(self.codec.compress(chunk, start))
            start = int(chunk[-1])
        return blocks

    def _adopt(self, blocks: List[CompressedBlock]) -> None:
        offsets = []
        off = 0
        for blk in blocks:
            offsets.append(off)
            off += len(blk.payload)
        self.blocks = blocks
        self.offsets = offsets

    def split(self, key_weight: int = 0) -> Tuple[int, "KeyList"]:
        """Move the upper half into a new key list.

        Halves are balanced by each block's full cost: payload bytes, one
        descriptor, and key_weight bytes per key for whatever the caller
        stores alongside each key. Payload bytes alone are a bad proxy
        when that side cost dominates (a one-key packed block can occupy
        zero payload bytes). Returns (pivot, right) where pivot is the
        smallest key of the right side; self keeps the lower half.
        """
        if self.key_count < 2:
            raise ContractViolationError("cannot split fewer than 2 keys")
        self.vacuumize()
        if len(self.blocks) == 1:
            # rebuild both halves directly: placing them side by side first
            # could overflow a list that is splitting exactly because it is
            # out of room
            blk = self.blocks[0]
            keys = self.codec.decompress(blk)
            half = (blk.n + 1) // 2
            left = self.codec.compress(keys[:half], blk.start)
            right_blk = self.codec.compress(keys[half:], int(keys[half - 1]))
            self._adopt([left])
            right = KeyList(self.codec, self.capacity)
            right._adopt([right_blk])
            return int(keys[half]), right
        weights = [DESC_BYTES + len(b.payload) + key_weight * b.n
                   for b in self.blocks]
        total = sum(weights)
        cut, best, running = 1, None, 0
        for j in range(1, len(self.blocks)):
            running += weights[j - 1]
            gap = abs(2 * running - total)
            if best is None or gap < best:
                cut, best = j, gap
        right = KeyList(self.codec, self.capacity)
        right_blocks = self.blocks[cut:]
        self._adopt(self.blocks[:cut])
        right._adopt(right_blocks)
        pivot = right.codec.select(right.blocks[0], 0)
        return pivot, right

    # -- serialization -------------------------------------------------------

    def serialize(self) -> bytes:
        extent = self.extent()
        out = bytearray(HEADER_BYTES + DESC_BYTES * len(self.blocks) + extent)
        _HEADER.pack_into(out, 0, len(self.blocks), 0, 0)
        pos = HEADER_BYTES
        body = HEADER_BYTES + DESC_BYTES * len(self.blocks)
        for off, blk in zip(self.offsets, self.blocks):
            _DESC.pack_into(out, pos, off, blk.n, blk.meta, 0, blk.start, blk.last)
            pos += DESC_BYTES
            if blk.n > 0:
                out[body + off:body + off + len(blk.payload)] = blk.payload
        return bytes(out)

    @classmethod
    def parse(cls, data: bytes, codec: Codec, capacity: int) -> "KeyList":
        if len(data) < HEADER_BYTES:
            raise CorruptionError("key list header truncated")
        count, _r0, _r1 = _HEADER.unpack_from(data, 0)
        body = HEADER_BYTES + DESC_BYTES * count
        if len(data) < body:
            raise CorruptionError("key list directory truncated")
        kl = cls(codec, capacity)
        area = data[body:]
        for k in range(count):
            off, n, meta, _res, start, last = _DESC.unpack_from(
                data, HEADER_BYTES + DESC_BYTES * k)
            if n == 0:
                # gap: stale offset is never read
                kl.blocks.append(CompressedBlock(b"", 0, meta, start, last))
                kl.offsets.append(off)
                continue
            size = codec.payload_bytes(n, meta)
            if off + size > len(area):
                raise CorruptionError("block payload out of bounds")
            block = CompressedBlock(bytes(area[off:off + size]), n, meta, start, last)
            kl.blocks.append(block)
            kl.offsets.append(off)
        return kl
