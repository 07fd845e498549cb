"""Block codecs for sorted 32-bit keys and the registry that selects them."""

from __future__ import annotations

from typing import Dict, Optional, Type

from .base import Codec, CodecId, CompressedBlock
from .masked import MaskedVByteCodec
from .packed import BP128Codec, ForCodec, SimdForCodec
from .raw import RawCodec
from .varintgb import VarIntGBCodec
from .vbyte import VByteCodec

CODEC_CLASSES: Dict[CodecId, Type[Codec]] = {
    CodecId.UNCOMPRESSED: RawCodec,
    CodecId.VBYTE: VByteCodec,
    CodecId.VARINTGB: VarIntGBCodec,
    CodecId.MASKEDVBYTE: MaskedVByteCodec,
    CodecId.BP128: BP128Codec,
    CodecId.FOR: ForCodec,
    CodecId.SIMDFOR: SimdForCodec,
}

CODEC_NAMES: Dict[str, CodecId] = {cid.name.lower(): cid for cid in CodecId}


def get_codec(codec_id: CodecId, max_keys: Optional[int] = None) -> Codec:
    """Instantiate the codec for an id, optionally overriding block capacity."""
    return CODEC_CLASSES[CodecId(codec_id)](max_keys)


__all__ = [
    "BP128Codec",
    "CODEC_CLASSES",
    "CODEC_NAMES",
    "Codec",
    "CodecId",
    "CompressedBlock",
    "ForCodec",
    "MaskedVByteCodec",
    "RawCodec",
    "SimdForCodec",
    "VByteCodec",
    "VarIntGBCodec",
    "get_codec",
]
