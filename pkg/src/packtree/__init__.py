"""Embedded ordered store for 32-bit keys with compressed leaf blocks."""

from .btree import BalanceEvent, Cursor, Database
from .codecs import CodecId, get_codec
from .errors import (ContractViolationError, CorruptionError,
                     CursorInvalidatedError, DatabaseFullError, FormatError,
                     PacktreeError)

__version__ = "0.1.0"

__all__ = [
    "BalanceEvent",
    "CodecId",
    "ContractViolationError",
    "CorruptionError",
    "Cursor",
    "CursorInvalidatedError",
    "Database",
    "DatabaseFullError",
    "FormatError",
    "PacktreeError",
    "get_codec",
    "__version__",
]
