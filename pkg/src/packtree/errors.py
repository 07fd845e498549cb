"""Exception types shared across the package."""


class PacktreeError(Exception):
    """Base class for all packtree errors."""


class ContractViolationError(PacktreeError):
    """A caller broke a documented precondition (bad input, no space, ...)."""


class CorruptionError(PacktreeError):
    """Stored bytes cannot be decoded (truncated or inconsistent payload)."""


class FormatError(CorruptionError):
    """A file is not a packtree database or uses an unsupported version."""


class DatabaseFullError(PacktreeError):
    """The storage file cannot grow any further."""


class NeedsSpaceError(PacktreeError):
    """A node-local operation cannot fit even after vacuumize.

    Raised by the key directory so the tree can split the node; never
    surfaced to library users.
    """


class CursorInvalidatedError(PacktreeError):
    """The tree was mutated while a cursor was attached to it."""
