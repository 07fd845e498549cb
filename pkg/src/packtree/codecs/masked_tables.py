"""Lookup tables for the mask-driven varint decoder.

The decoder walks the payload in 16-byte windows. For each window it gathers
the most significant bit of every byte into a 16-bit mask (bit i = MSB of
byte i). A zero bit marks a byte that ends a value, so the mask alone
determines where every complete value inside the window starts and stops and
how far the window can be advanced; no data byte needs to be inspected to
find value boundaries.

The table built here maps each of the 65536 masks to the in-window offsets
of its value-ending bytes. Those offsets are this decoder's equivalent of a
shuffle permutation: consecutive terminators delimit the byte run of one
value, and the advance length is the offset just past the last terminator.
Bytes after the last terminator belong to a value that continues into the
next window and are re-examined there.

Tables are generated on first use from the 8-bit half-mask decomposition
below and cached for the process lifetime. The one-byte-at-a-time decoder
serves as the differential-test oracle for everything derived from them.
"""

from __future__ import annotations

from typing import Optional, Tuple

_M8 = 0x8080808080808080
_MUL8 = 0x0002040810204081

_TERMS16: Optional[Tuple[bytes, ...]] = None


def gather_msb8(qword: int) -> int:
    """8-bit mask of the MSBs of a little-endian 8-byte word.

    (qword & _M8) leaves MSB j at bit 8j+7; multiplying by _MUL8 (which has
    bits at 7k for k in 0..7) lands MSB j at bit 56+j exactly once, and no
    two partial products collide, so the top byte is the gathered mask.
    """
    return ((qword & _M8) * _MUL8 >> 56) & 0xFF


def build_terminator_table() -> Tuple[bytes, ...]:
    """terms[mask] = offsets of zero-MSB bytes within a 16-byte window.

    Composed from the two 8-bit halves of the mask so construction stays
    cheap: low-half offsets verbatim, high-half offsets shifted up by 8.
    """
    low = tuple(
        bytes(i for i in range(8) if not (m >> i) & 1) for m in range(256)
    )
    high = tuple(bytes(x + 8 for x in entry) for entry in low)
    return tuple(low[m & 0xFF] + high[m >> 8] for m in range(1 << 16))


def terminator_table() -> Tuple[bytes, ...]:
    global _TERMS16
    if _TERMS16 is None:
        _TERMS16 = build_terminator_table()
    return _TERMS16
