"""Single-file page store: header page, fixed-size pages, chained freelist.

Page 0 holds the file header (magic, format version, key type, codec,
geometry, root pointer, freelist head). All other pages are tree nodes or
freelist members. A freed page stores the id of the next free page in its
first 8 bytes; an in-memory set mirrors the chain to reject double frees.
All on-disk integers are little-endian.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Optional, Set

from .codecs import CodecId
from .errors import ContractViolationError, FormatError

MAGIC = b"PKTR"
FORMAT_VERSION = 1
KEY_TYPE_U32 = 0
DEFAULT_PAGE_SIZE = 16384

# magic, version, key type, codec, page size, block size, reserved,
# root page, freelist head, page count
_HEADER = struct.Struct("<4sHBBIHHQQQ")


@dataclass(slots=True)
class StoreConfig:
    codec: CodecId = CodecId.VBYTE
    page_size: int = DEFAULT_PAGE_SIZE
    block_size: Optional[int] = None  # keys per block; None = codec default


class Store:
    """Page-granular file access plus allocation bookkeeping."""

    def __init__(self, file, config: StoreConfig, root: int,
                 freelist_head: int, page_count: int):
        self._file = file
        self.config = config
        self.page_size = config.page_size
        self.root = root
        self._free_head = freelist_head
        self.page_count = page_count
        self._free_set: Set[int] = set()
        self._load_freelist()
        self._closed = False

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def create(cls, path: str, config: Optional[StoreConfig] = None) -> "Store":
        config = config or StoreConfig()
        if config.page_size < 512:
            raise ContractViolationError("page size below 512 bytes")
        fd = os.open(path, os.O_RDWR | os.O_CREAT | os.O_EXCL, 0o644)
        file = os.fdopen(fd, "r+b")
        store = cls(file, config, root=0, freelist_head=0, page_count=1)
        store.write_header()
        return store

    @classmethod
    def open(cls, path: str) -> "Store":
        file = open(path, "r+b")
        raw = file.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            file.close()
            raise FormatError("file too short for a database header")
        (magic, version, key_type, codec, page_size, block_size, _res,
         root, free_head, page_count) = _HEADER.unpack(raw)
        if magic != MAGIC:
            file.close()
            raise FormatError("bad magic: not a database file")
        if version != FORMAT_VERSION:
            file.close()
            raise FormatError(f"unsupported format version {version}")
        if key_type != KEY_TYPE_U32:
            file.close()
            raise FormatError(f"unsupported key type {key_type}")
        size = file.seek(0, 2)
        if size < page_size * page_count:
            file.close()
            raise FormatError("file truncated below its page count")
        config = StoreConfig(CodecId(codec), page_size, block_size or None)
        return cls(file, config, root, free_head, page_count)

    def write_header(self) -> None:
        block_size = self.config.block_size or 0
        raw = _HEADER.pack(MAGIC, FORMAT_VERSION, KEY_TYPE_U32,
                           int(self.config.codec), self.page_size, block_size,
                           0, self.root, self._free_head, self.page_count)
        self._file.seek(0)
        self._file.write(raw.ljust(self.page_size, b"\x00"))

    def flush(self) -> None:
        self.write_header()
        self._file.flush()
        os.fsync(self._file.fileno())

    def close(self) -> None:
        if self._closed:
            return
        self.flush()
        self._file.close()
        self._closed = True

    # -- page io -------------------------------------------------------------

    def read_page(self, page_id: int) -> bytes:
        if not 0 < page_id < self.page_count:
            raise ContractViolationError(f"page {page_id} out of range")
        self._file.seek(page_id * self.page_size)
        data = self._file.read(self.page_size)
        if len(data) != self.page_size:
            raise FormatError(f"page {page_id} truncated")
        return data

    def write_page(self, page_id: int, data: bytes) -> None:
        if not 0 < page_id < self.page_count:
            raise ContractViolationError(f"page {page_id} out of range")
        if len(data) > self.page_size:
            raise ContractViolationError("page data exceeds page size")
        self._file.seek(page_id * self.page_size)
        self._file.write(data.ljust(self.page_size, b"\x00"))

    # -- allocation ----------------------------------------------------------

    def _load_freelist(self) -> None:
        pid = self._free_head
        while pid:
            if pid in self._free_set or not 0 < pid < self.page_count:
                raise FormatError("freelist chain is corrupt")
            self._free_set.add(pid)
            self._file.seek(pid * self.page_size)
            pid = int.from_bytes(self._file.read(8), "little")

    def alloc_page(self) -> int:
        if self._free_head:
            pid = self._free_head
            self._file.seek(pid * self.page_size)
            self._free_head = int.from_bytes(self._file.read(8), "little")
            self._free_set.discard(pid)
            return pid
        pid = self.page_count
        self.page_count += 1
        self._file.seek(pid * self.page_size)
        self._file.write(b"\x00" * self.page_size)
        return pid

    def free_page(self, page_id: int) -> None:
        if not 0 < page_id < self.page_count:
            raise ContractViolationError(f"cannot free page {page_id}")
        if page_id in self._free_set:
            raise ContractViolationError(f"double free of page {page_id}")
        self._file.seek(page_id * self.page_size)
        self._file.write(self._free_head.to_bytes(8, "little"))
        self._free_head = page_id
        self._free_set.add(page_id)

    @property
    def free_pages(self) -> int:
        return len(self._free_set)
