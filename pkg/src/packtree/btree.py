"""B+ tree whose leaves store keys as compressed blocks.

Leaves hold a key list (compressed blocks plus descriptors) growing from the
node header and fixed-width records growing from the page tail; the two must
never meet. Internal nodes hold raw separator keys and child page ids. All
rebalancing is local: during descent an internal child that could not absorb
one more separator is split pre-emptively, and during erase descent a child
with fewer than four keys is merged into an adjacent sibling when it fits.
An operation therefore never dirties pages above the parent of the node
where it lands.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

import numpy as np

from .codecs import CODEC_NAMES, Codec, CodecId, get_codec
from .errors import (ContractViolationError, CursorInvalidatedError,
                     FormatError, NeedsSpaceError)
from .keylist import DESC_BYTES, KeyList
from .store import DEFAULT_PAGE_SIZE, Store, StoreConfig

# flags, layout version, reserved, key count, left sibling, right sibling,
# first child (internal nodes only)
NODE_HEADER = struct.Struct("<BBHIQQQ")
NODE_HEADER_BYTES = NODE_HEADER.size
LAYOUT_VERSION = 1
LEAF_FLAG = 0x01
RECORD_BYTES = 8
MERGE_THRESHOLD = 4

EMPTY_RECORD = b"\x00" * RECORD_BYTES


class LeafNode:
    __slots__ = ("page_id", "kl", "records", "left_sib", "right_sib")
    is_leaf = True

    def __init__(self, page_id: int, kl: KeyList, records: List[bytes],
                 left_sib: int = 0, right_sib: int = 0):
        self.page_id = page_id
        self.kl = kl
        self.records = records
        self.left_sib = left_sib
        self.right_sib = right_sib

    @property
    def count(self) -> int:
        return len(self.records)

    def serialize(self, page_size: int) -> bytes:
        body = self.kl.serialize()
        tail = b"".join(self.records)
        if NODE_HEADER_BYTES + len(body) + len(tail) > page_size:
            raise ContractViolationError("leaf contents exceed the page")
        page = bytearray(page_size)
        NODE_HEADER.pack_into(page, 0, LEAF_FLAG, LAYOUT_VERSION, 0,
                              len(self.records), self.left_sib,
                              self.right_sib, 0)
        page[NODE_HEADER_BYTES:NODE_HEADER_BYTES + len(body)] = body
        if tail:
            page[page_size - len(tail):] = tail
        return bytes(page)


class InternalNode:
    __slots__ = ("page_id", "seps", "children")
    is_leaf = False

    def __init__(self, page_id: int, seps: List[int], children: List[int]):
        self.page_id = page_id
        self.seps = seps
        self.children = children

    @property
    def count(self) -> int:
        return len(self.seps)

    def serialize(self, page_size: int) -> bytes:
        n = len(self.seps)
        if len(self.children) != n + 1:
            raise ContractViolationError("separator/child count mismatch")
        if NODE_HEADER_BYTES + 4 * n + RECORD_BYTES * n > page_size:
            raise ContractViolationError("internal node exceeds the page")
        page = bytearray(page_size)
        NODE_HEADER.pack_into(page, 0, 0, LAYOUT_VERSION, 0, n, 0, 0,
                              self.children[0])
        page[NODE_HEADER_BYTES:NODE_HEADER_BYTES + 4 * n] = (
            np.asarray(self.seps, dtype="<u4").tobytes())
        if n:
            page[page_size - RECORD_BYTES * n:] = (
                np.asarray(self.children[1:], dtype="<u8").tobytes())
        return bytes(page)


Node = Union[LeafNode, InternalNode]


def parse_node(page_id: int, data: bytes, codec: Codec,
               page_size: int) -> Node:
    flags, version, _res, count, left, right, child = NODE_HEADER.unpack_from(
        data, 0)
    if version != LAYOUT_VERSION:
        raise FormatError(f"unknown node layout version {version}")
    if flags & LEAF_FLAG:
        region = data[NODE_HEADER_BYTES:page_size - RECORD_BYTES * count]
        kl = KeyList.parse(region, codec, capacity=len(region))
        if kl.key_count != count:
            raise FormatError("leaf key count disagrees with its records")
        tail = data[page_size - RECORD_BYTES * count:]
        records = [bytes(tail[i * RECORD_BYTES:(i + 1) * RECORD_BYTES])
                   for i in range(count)]
        return LeafNode(page_id, kl, records, left, right)
    seps = np.frombuffer(data, dtype="<u4", count=count,
                         offset=NODE_HEADER_BYTES).tolist()
    children = [child]
    if count:
        children += np.frombuffer(data, dtype="<u8", count=count,
                                  offset=page_size - RECORD_BYTES * count
                                  ).tolist()
    if any(c == 0 for c in children):
        raise FormatError("internal node references page 0")
    return InternalNode(page_id, seps, children)


@dataclass(frozen=True, slots=True)
class BalanceEvent:
    """One structural change, with every page it involved."""
    kind: str
    pages: Tuple[int, ...]


class Cursor:
    """Forward scan in key order, one decoded block cached at a time.

    The cache is rebuilt when the scan crosses a block or leaf boundary and
    the position resets with it. Any tree mutation invalidates the cursor;
    the next advance then raises instead of returning stale keys.
    """

    __slots__ = ("_db", "_epoch", "_leaf_id", "_block_idx", "_pos",
                 "_slot_base", "_keys")

    def __init__(self, db: "Database"):
        self._db = db
        self._epoch = db.mutation_epoch
        self._leaf_id = db._leftmost_leaf_id()
        self._block_idx = -1
        self._pos = -1
        self._slot_base = 0
        self._keys: Optional[np.ndarray] = None

    def next(self) -> Optional[Tuple[int, bytes]]:
        """Advance and return (key, record), or None at the end."""
        db = self._db
        if self._epoch != db.mutation_epoch:
            raise CursorInvalidatedError("tree mutated while cursor was open")
        self._pos += 1
        while True:
            if self._keys is not None and self._pos < len(self._keys):
                leaf = db._node(self._leaf_id)
                record = leaf.records[self._slot_base + self._pos]
                return int(self._keys[self._pos]), record
            if not self._leaf_id:
                return None
            leaf = db._node(self._leaf_id)
            if self._keys is not None:
                self._slot_base += len(self._keys)
                self._keys = None
            advanced = False
            for j in range(self._block_idx + 1, len(leaf.kl.blocks)):
                blk = leaf.kl.blocks[j]
                if blk.n:
                    self._block_idx = j
                    self._keys = db.codec.decompress(blk)
                    self._pos = 0
                    advanced = True
                    break
            if advanced:
                continue
            self._leaf_id = leaf.right_sib
            self._block_idx = -1
            self._slot_base = 0
            self._pos = 0

    def __iter__(self) -> Iterator[Tuple[int, bytes]]:
        while True:
            item = self.next()
            if item is None:
                return
            yield item


class Database:
    """Ordered map from 32-bit keys to 8-byte records, one file on disk."""

    def __init__(self, store: Store):
        self._store = store
        self.codec: Codec = get_codec(store.config.codec,
                                      store.config.block_size)
        self._page = store.page_size
        self._nodes: Dict[int, Node] = {}
        self._dirty: Set[int] = set()
        self._closed = False
        self.mutation_epoch = 0
        self.last_op_pages: frozenset = frozenset()
        self.last_op_events: Tuple[BalanceEvent, ...] = ()
        self.last_op_leaf = 0
        self.last_op_parent = 0
        self._op_pages: Set[int] = set()
        self._op_events: List[BalanceEvent] = []
        if store.root == 0:
            root = self._new_leaf()
            store.root = root.page_id
            self.flush()

    # -- lifecycle -----------------------------------------------------------

    @classmethod
    def create(cls, path: str, codec: Union[CodecId, str] = CodecId.VBYTE,
               page_size: int = DEFAULT_PAGE_SIZE,
               block_size: Optional[int] = None) -> "Database":
        if isinstance(codec, str):
            try:
                codec = CODEC_NAMES[codec.lower()]
            except KeyError:
                raise ContractViolationError(f"unknown codec {codec!r}")
        config = StoreConfig(CodecId(codec), page_size, block_size)
        return cls(Store.create(path, config))

    @classmethod
    def open(cls, path: str) -> "Database":
        return cls(Store.open(path))

    def flush(self) -> None:
        for pid in sorted(self._dirty):
            node = self._nodes.get(pid)
            if node is not None:
                self._store.write_page(pid, node.serialize(self._page))
        self._dirty.clear()
        self._store.flush()

    def close(self) -> None:
        if self._closed:
            return
        self.flush()
        self._store.close()
        self._closed = True

    def __enter__(self) -> "Database":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- node plumbing -------------------------------------------------------

    def _node(self, page_id: int) -> Node:
        node = self._nodes.get(page_id)
        if node is None:
            node = parse_node(page_id, self._store.read_page(page_id),
                              self.codec, self._page)
            self._nodes[page_id] = node
        return node

    def _mark(self, node: Node) -> None:
        self._dirty.add(node.page_id)
        self._op_pages.add(node.page_id)

    def _leaf_capacity(self, n_records: int) -> int:
        return self._page - NODE_HEADER_BYTES - RECORD_BYTES * n_records

    def _new_leaf(self) -> LeafNode:
        pid = self._store.alloc_page()
        leaf = LeafNode(pid, KeyList(self.codec, self._leaf_capacity(0)), [])
        self._nodes[pid] = leaf
        self._mark(leaf)
        return leaf

    def _free_node(self, node: Node) -> None:
        self._nodes.pop(node.page_id, None)
        self._dirty.discard(node.page_id)
        self._store.free_page(node.page_id)

    def _can_absorb(self, node: InternalNode) -> bool:
        grown = node.count + 1
        return (NODE_HEADER_BYTES + 4 * grown + RECORD_BYTES * grown
                <= self._page)

    # -- instrumentation -----------------------------------------------------

    def _begin_op(self) -> None:
        self._op_pages = set()
        self._op_events = []
        self.last_op_leaf = 0
        self.last_op_parent = 0

    def _end_op(self) -> None:
        self.last_op_pages = frozenset(self._op_pages)
        self.last_op_events = tuple(self._op_events)
        if self._op_pages:
            self.mutation_epoch += 1

    def _event(self, kind: str, pages) -> None:
        self._op_events.append(BalanceEvent(kind, tuple(pages)))

    # -- descent and balancing -----------------------------------------------

    @staticmethod
    def _check_key(key) -> int:
        key = int(key)
        if not 0 <= key <= 0xFFFFFFFF:
            raise ContractViolationError(f"key {key} outside 32-bit range")
        return key

    def _collapse_root(self) -> None:
        root = self._node(self._store.root)
        while not root.is_leaf and root.count == 0:
            child_id = root.children[0]
            self._event("collapse_root", (root.page_id, child_id))
            self._free_node(root)
            self._store.root = child_id
            root = self._node(child_id)

    def _descend(self, key: int, erase: bool) -> Tuple[LeafNode,
                                                       Optional[InternalNode]]:
        self._collapse_root()
        node = self._node(self._store.root)
        if node.is_leaf:
            return node, None
        if not self._can_absorb(node):
            self._split_internal(node, None)
            node = self._node(self._store.root)
        while True:
            idx = bisect_right(node.seps, key)
            child = self._node(node.children[idx])
            if erase and child.count < MERGE_THRESHOLD and node.count >= 1:
                survivor = self._try_merge(node, idx)
                if survivor is not None:
                    child = survivor
            if not child.is_leaf and not self._can_absorb(child):
                self._split_internal(child, node)
                idx = bisect_right(node.seps, key)
                child = self._node(node.children[idx])
            if child.is_leaf:
                return child, node
            node = child

    def _split_internal(self, child: InternalNode,
                        parent: Optional[InternalNode]) -> None:
        mid = len(child.seps) // 2
        promoted = child.seps[mid]
        right = InternalNode(self._store.alloc_page(),
                             child.seps[mid + 1:], child.children[mid + 1:])
        self._nodes[right.page_id] = right
        child.seps = child.seps[:mid]
        child.children = child.children[:mid + 1]
        self._mark(child)
        self._mark(right)
        pages = [child.page_id, right.page_id]
        if parent is None:
            new_root = InternalNode(self._store.alloc_page(), [promoted],
                                    [child.page_id, right.page_id])
            self._nodes[new_root.page_id] = new_root
            self._mark(new_root)
            self._store.root = new_root.page_id
            pages.append(new_root.page_id)
            self._event("split_root", pages)
        else:
            pos = bisect_right(parent.seps, promoted)
            parent.seps.insert(pos, promoted)
            parent.children.insert(pos + 1, right.page_id)
            self._mark(parent)
            pages.append(parent.page_id)
            self._event("split_internal", pages)

    def _split_leaf(self, leaf: LeafNode,
                    parent: Optional[InternalNode]) -> Tuple[int, LeafNode]:
        pivot, right_kl = leaf.kl.split(key_weight=RECORD_BYTES)
        n_right = right_kl.key_count
        n_left = len(leaf.records) - n_right
        right = LeafNode(self._store.alloc_page(), right_kl,
                         leaf.records[n_left:])
        self._nodes[right.page_id] = right
        leaf.records = leaf.records[:n_left]
        leaf.kl.capacity = self._leaf_capacity(n_left)
        right.kl.capacity = self._leaf_capacity(n_right)
        pages = [leaf.page_id, right.page_id]
        right.left_sib = leaf.page_id
        right.right_sib = leaf.right_sib
        if leaf.right_sib:
            neighbor = self._node(leaf.right_sib)
            neighbor.left_sib = right.page_id
            self._mark(neighbor)
            pages.append(neighbor.page_id)
        leaf.right_sib = right.page_id
        self._mark(leaf)
        self._mark(right)
        if parent is None:
            new_root = InternalNode(self._store.alloc_page(), [pivot],
                                    [leaf.page_id, right.page_id])
            self._nodes[new_root.page_id] = new_root
            self._mark(new_root)
            self._store.root = new_root.page_id
            pages.append(new_root.page_id)
            self._event("split_root", pages)
        else:
            pos = bisect_right(parent.seps, pivot)
            parent.seps.insert(pos, pivot)
            parent.children.insert(pos + 1, right.page_id)
            self._mark(parent)
            pages.append(parent.page_id)
            self._event("split_leaf", pages)
        return pivot, right

    # -- merging -------------------------------------------------------------

    def _try_merge(self, parent: InternalNode,
                   idx: int) -> Optional[Node]:
        victim = self._node(parent.children[idx])
        si = idx - 1 if idx > 0 else idx + 1
        survivor = self._node(parent.children[si])
        if victim.is_leaf:
            if not self._leaf_merge_fits(survivor, victim):
                return None
            self._merge_leaves(parent, survivor, victim, idx, si)
        else:
            total = len(survivor.seps) + 1 + len(victim.seps)
            if (NODE_HEADER_BYTES + 4 * total + RECORD_BYTES * total
                    > self._page):
                return None
            self._merge_internals(parent, survivor, victim, idx, si)
        return survivor

    def _leaf_merge_fits(self, survivor: LeafNode, victim: LeafNode) -> bool:
        cap = self._leaf_capacity(len(survivor.records) + len(victim.records))
        free = cap - survivor.kl.used()
        # each key may pay full growth twice (block split plus insert) and
        # open up to two descriptors
        per_key = 2 * (self.codec.worst_case_growth() + DESC_BYTES)
        return free >= len(victim.records) * per_key

    def _merge_leaves(self, parent: InternalNode, survivor: LeafNode,
                      victim: LeafNode, idx: int, si: int) -> None:
        keys = victim.kl.keys().tolist()
        for k, record in zip(keys, victim.records):
            survivor.kl.capacity = self._leaf_capacity(
                len(survivor.records) + 1)
            slot = survivor.kl.insert(int(k))
            if slot is None:
                raise ContractViolationError("key present in two leaves")
            survivor.records.insert(slot, record)
        survivor.kl.capacity = self._leaf_capacity(len(survivor.records))
        pages = {survivor.page_id, victim.page_id, parent.page_id}
        if si < idx:
            survivor.right_sib = victim.right_sib
            if victim.right_sib:
                neighbor = self._node(victim.right_sib)
                neighbor.left_sib = survivor.page_id
                self._mark(neighbor)
                pages.add(neighbor.page_id)
        else:
            survivor.left_sib = victim.left_sib
            if victim.left_sib:
                neighbor = self._node(victim.left_sib)
                neighbor.right_sib = survivor.page_id
                self._mark(neighbor)
                pages.add(neighbor.page_id)
        parent.seps.pop(idx - 1 if si < idx else idx)
        parent.children.pop(idx)
        self._mark(survivor)
        self._mark(parent)
        self._free_node(victim)
        self._event("merge_leaf", sorted(pages))

    def _merge_internals(self, parent: InternalNode, survivor: InternalNode,
                         victim: InternalNode, idx: int, si: int) -> None:
        if si < idx:
            pulldown = parent.seps[idx - 1]
            survivor.seps = survivor.seps + [pulldown] + victim.seps
            survivor.children = survivor.children + victim.children
        else:
            pulldown = parent.seps[idx]
            survivor.seps = victim.seps + [pulldown] + survivor.seps
            survivor.children = victim.children + survivor.children
        parent.seps.pop(idx - 1 if si < idx else idx)
        parent.children.pop(idx)
        self._mark(survivor)
        self._mark(parent)
        pages = (survivor.page_id, victim.page_id, parent.page_id)
        self._free_node(victim)
        self._event("merge_internal", sorted(pages))

    # -- mutation ------------------------------------------------------------

    def insert(self, key, record: Optional[bytes] = None) -> bool:
        """Insert key with its record; False when the key already exists."""
        key = self._check_key(key)
        record = EMPTY_RECORD if record is None else bytes(record)
        if len(record) != RECORD_BYTES:
            raise ContractViolationError("records are exactly 8 bytes")
        self._begin_op()
        try:
            leaf, parent = self._descend(key, erase=False)
            return self._leaf_insert(leaf, parent, key, record)
        finally:
            self._end_op()

    def _leaf_insert(self, leaf: LeafNode, parent: Optional[InternalNode],
                     key: int, record: bytes) -> bool:
        self.last_op_parent = parent.page_id if parent else 0
        leaf.kl.capacity = self._leaf_capacity(len(leaf.records) + 1)
        try:
            slot = leaf.kl.insert(key)
        except NeedsSpaceError:
            pivot, right = self._split_leaf(leaf, parent)
            leaf = right if key >= pivot else leaf
            leaf.kl.capacity = self._leaf_capacity(len(leaf.records) + 1)
            try:
                slot = leaf.kl.insert(key)
            except NeedsSpaceError as exc:
                raise ContractViolationError(
                    "splitting a leaf left no room for one key") from exc
        self.last_op_leaf = leaf.page_id
        if slot is None:
            # the attempt may still have reshaped blocks
            leaf.kl.capacity = self._leaf_capacity(len(leaf.records))
            self._mark(leaf)
            return False
        leaf.records.insert(slot, record)
        leaf.kl.capacity = self._leaf_capacity(len(leaf.records))
        self._mark(leaf)
        return True

    def erase(self, key) -> bool:
        """Remove key; False when it was not present."""
        key = self._check_key(key)
        self._begin_op()
        try:
            leaf, parent = self._descend(key, erase=True)
            return self._leaf_erase(leaf, parent, key)
        finally:
            self._end_op()

    def _leaf_erase(self, leaf: LeafNode, parent: Optional[InternalNode],
                    key: int) -> bool:
        self.last_op_parent = parent.page_id if parent else 0
        self.last_op_leaf = leaf.page_id
        leaf.kl.capacity = self._leaf_capacity(max(len(leaf.records) - 1, 0))
        try:
            slot = leaf.kl.delete(key)
        except NeedsSpaceError:
            # removal would grow the packed payload past the page: split
            pivot, right = self._split_leaf(leaf, parent)
            leaf = right if key >= pivot else leaf
            self.last_op_leaf = leaf.page_id
            leaf.kl.capacity = self._leaf_capacity(
                max(len(leaf.records) - 1, 0))
            try:
                slot = leaf.kl.delete(key)
            except NeedsSpaceError as exc:
                raise ContractViolationError(
                    "splitting a leaf left no room for one delete") from exc
        if slot is None:
            leaf.kl.capacity = self._leaf_capacity(len(leaf.records))
            return False
        leaf.records.pop(slot)
        leaf.kl.capacity = self._leaf_capacity(len(leaf.records))
        self._mark(leaf)
        return True

    # -- queries -------------------------------------------------------------

    def find(self, key) -> Optional[bytes]:
        """Record stored under key, or None."""
        key = self._check_key(key)
        node = self._node(self._store.root)
        while not node.is_leaf:
            node = self._node(node.children[bisect_right(node.seps, key)])
        slot = node.kl.find_slot(key)
        return None if slot is None else node.records[slot]

    def cursor(self) -> Cursor:
        """Cursor positioned before the smallest key."""
        return Cursor(self)

    def _leftmost_leaf_id(self) -> int:
        node = self._node(self._store.root)
        while not node.is_leaf:
            node = self._node(node.children[0])
        return node.page_id

    def _leaves(self) -> Iterator[LeafNode]:
        pid = self._leftmost_leaf_id()
        while pid:
            leaf = self._node(pid)
            yield leaf
            pid = leaf.right_sib

    def key_count(self) -> int:
        """Number of stored keys, from block descriptors alone."""
        return sum(leaf.kl.key_count for leaf in self._leaves())

    def sum_keys(self) -> int:
        """Sum of all keys, accumulated block-at-a-time."""
        total = 0
        for leaf in self._leaves():
            for blk in leaf.kl.blocks:
                if blk.n:
                    keys = self.codec.decompress(blk)
                    total += int(keys.sum(dtype=np.uint64))
        return total

    def average_where_gt(self, threshold: int) -> Tuple[Optional[Fraction],
                                                        int]:
        """Exact mean and count of keys strictly above threshold.

        Blocks whose descriptor already proves last <= threshold are skipped
        without decoding.
        """
        total = 0
        count = 0
        for leaf in self._leaves():
            for blk in leaf.kl.blocks:
                if blk.n == 0 or blk.last <= threshold:
                    continue
                keys = self.codec.decompress(blk)
                picked = keys[keys > threshold]
                count += int(picked.size)
                total += int(picked.sum(dtype=np.uint64))
        if count == 0:
            return None, 0
        return Fraction(total, count), count

    def max_key(self) -> Optional[int]:
        """Largest stored key, read from the right edge of the tree."""
        node = self._node(self._store.root)
        while not node.is_leaf:
            node = self._node(node.children[-1])
        while node is not None:
            top = node.kl.max_key()
            if top is not None:
                return top
            node = self._node(node.left_sib) if node.left_sib else None
        return None
