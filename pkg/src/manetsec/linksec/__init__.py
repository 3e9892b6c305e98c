"""Link-layer security: the CBC-X frame codec over a 64-bit block cipher."""

from .cbcx import (
    AuthFailed,
    CbcxError,
    DataTooLong,
    FrameFormatError,
    FrameHeader,
    LengthMismatch,
    LinkFrame,
    PaddingInvalid,
    RanCounter,
    build_iv,
    cbcx_decrypt,
    cbcx_encrypt,
    format_vector,
    pad,
    read_vectors,
    unpad,
)
from .xtea import XTEA, BlockCipher64

__all__ = [
    "AuthFailed", "BlockCipher64", "CbcxError", "DataTooLong", "FrameFormatError",
    "FrameHeader", "LengthMismatch", "LinkFrame", "PaddingInvalid", "RanCounter", "XTEA",
    "build_iv", "cbcx_decrypt", "cbcx_encrypt", "format_vector", "pad", "read_vectors", "unpad",
]
