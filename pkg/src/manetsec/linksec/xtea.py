"""XTEA, the reference 64-bit block cipher for the link layer.

Big-endian word order, 128-bit key, 32 cycles (64 Feistel rounds).
"""

from __future__ import annotations

from functools import lru_cache
from typing import Protocol

MASK = 0xFFFFFFFF
DELTA = 0x9E3779B9
CYCLES = 32


class BlockCipher64(Protocol):
    block_size: int

    def encrypt_block(self, key: bytes, block: bytes) -> bytes: ...

    def decrypt_block(self, key: bytes, block: bytes) -> bytes: ...


@lru_cache(maxsize=4096)
def _schedule(key: bytes) -> tuple[tuple[int, int], ...]:
    if len(key) != 16:
        raise ValueError("XTEA key must be 16 bytes")
    k = [int.from_bytes(key[i:i + 4], "big") for i in range(0, 16, 4)]
    s = 0
    out = []
    for _ in range(CYCLES):
        a = (s + k[s & 3]) & MASK
        s = (s + DELTA) & MASK
        b = (s + k[(s >> 11) & 3]) & MASK
        out.append((a, b))
    return tuple(out)


def encrypt_int(key: bytes, block: int) -> int:
    v0, v1 = block >> 32, block & MASK
    for a, b in _schedule(key):
        v0 = (v0 + ((((v1 << 4) ^ (v1 >> 5)) + v1) ^ a)) & MASK
        v1 = (v1 + ((((v0 << 4) ^ (v0 >> 5)) + v0) ^ b)) & MASK
    return (v0 << 32) | v1


def decrypt_int(key: bytes, block: int) -> int:
    v0, v1 = block >> 32, block & MASK
    for a, b in reversed(_schedule(key)):
        v1 = (v1 - ((((v0 << 4) ^ (v0 >> 5)) + v0) ^ b)) & MASK
        v0 = (v0 - ((((v1 << 4) ^ (v1 >> 5)) + v1) ^ a)) & MASK
    return (v0 << 32) | v1


class XTEA:
    """:class:`BlockCipher64` backed by XTEA."""

    block_size = 8

    def encrypt_block(self, key: bytes, block: bytes) -> bytes:
        if len(block) != 8:
            raise ValueError("block must be 8 bytes")
        return encrypt_int(key, int.from_bytes(block, "big")).to_bytes(8, "big")

    def decrypt_block(self, key: bytes, block: bytes) -> bytes:
        if len(block) != 8:
            raise ValueError("block must be 8 bytes")
        return decrypt_int(key, int.from_bytes(block, "big")).to_bytes(8, "big")

    # integer fast path used by the codec
    encrypt_int = staticmethod(encrypt_int)
    decrypt_int = staticmethod(decrypt_int)
