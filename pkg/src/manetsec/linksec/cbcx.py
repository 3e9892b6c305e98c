"""CBC-X link-layer frames: one-pass CBC encryption plus a 4-byte MAC.

Wire layout (all integers big-endian)::

    dest(2) | A(1) | L(1) | G(1) | ran(3) | body(8..32) | mac(4)

The 8 header bytes double as the IV, so the IV costs nothing on the wire.
The body is the CBC encryption of the padded data, and the MAC is

    first 4 bytes of E_K(C_n xor P_1 xor ... xor P_n)

with the plaintext checksum accumulated while the blocks are being chained.
The checksum is what makes a flip in any body block (not only the last)
visible to the receiver. The header is covered through P_1 = D_K(C_1) xor C_0;
adding C_0 to the tag input as well would cancel that dependency.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass

from .xtea import XTEA, BlockCipher64

MAX_DATA = 29
HEADER_LEN = 8
MAC_LEN = 4
BLOCK = 8


class CbcxError(ValueError):
    pass


class DataTooLong(CbcxError):
    pass


class PaddingInvalid(CbcxError):
    pass


class AuthFailed(CbcxError):
    pass


class LengthMismatch(CbcxError):
    pass


class FrameFormatError(CbcxError):
    pass


@dataclass(frozen=True)
class FrameHeader:
    dest: int
    am_type: int
    length: int
    group: int
    ran: int

    def __post_init__(self) -> None:
        for name, value, bits in (("dest", self.dest, 16), ("am_type", self.am_type, 8),
                                  ("length", self.length, 8), ("group", self.group, 8),
                                  ("ran", self.ran, 24)):
            if not 0 <= value < (1 << bits):
                raise FrameFormatError(f"{name}={value} does not fit in {bits} bits")

    def to_bytes(self) -> bytes:
        return (self.dest.to_bytes(2, "big") + bytes((self.am_type, self.length, self.group))
                + self.ran.to_bytes(3, "big"))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "FrameHeader":
        if len(raw) != HEADER_LEN:
            raise FrameFormatError("header must be 8 bytes")
        return cls(int.from_bytes(raw[0:2], "big"), raw[2], raw[3], raw[4],
                   int.from_bytes(raw[5:8], "big"))


@dataclass(frozen=True)
class LinkFrame:
    header: FrameHeader
    body: bytes
    mac: bytes

    def to_bytes(self) -> bytes:
        return self.header.to_bytes() + self.body + self.mac

    @classmethod
    def from_bytes(cls, raw: bytes) -> "LinkFrame":
        if len(raw) < HEADER_LEN + BLOCK + MAC_LEN:
            raise FrameFormatError("frame too short")
        return cls(FrameHeader.from_bytes(raw[:HEADER_LEN]), raw[HEADER_LEN:-MAC_LEN],
                   raw[-MAC_LEN:])

    @property
    def wire_size(self) -> int:
        return HEADER_LEN + len(self.body) + MAC_LEN


def build_iv(header: FrameHeader) -> bytes:
    """IV = dest | A | L | G | ran, i.e. the header bytes verbatim."""
    return header.to_bytes()


def pad(data: bytes) -> bytes:
    """Append N = 8 - (len mod 8) bytes of value N (always at least one)."""
    if len(data) > MAX_DATA:
        raise DataTooLong(f"data is {len(data)} bytes, limit is {MAX_DATA}")
    n = BLOCK - len(data) % BLOCK
    return bytes(data) + bytes((n,)) * n


def unpad(padded: bytes) -> bytes:
    if len(padded) < BLOCK or len(padded) % BLOCK:
        raise PaddingInvalid("padded length must be a positive multiple of 8")
    n = padded[-1]
    if not 1 <= n <= BLOCK:
        raise PaddingInvalid(f"pad count {n} out of range")
    if padded[-n:] != bytes((n,)) * n:
        raise PaddingInvalid("inconsistent padding bytes")
    return padded[:-n]


def _ops(cipher: BlockCipher64):
    enc = getattr(cipher, "encrypt_int", None)
    dec = getattr(cipher, "decrypt_int", None)
    if enc is not None and dec is not None:
        return enc, dec

    def enc_b(key: bytes, x: int) -> int:
        return int.from_bytes(cipher.encrypt_block(key, x.to_bytes(8, "big")), "big")

    def dec_b(key: bytes, x: int) -> int:
        return int.from_bytes(cipher.decrypt_block(key, x.to_bytes(8, "big")), "big")

    return enc_b, dec_b


_XTEA = XTEA()


def cbcx_encrypt(key: bytes, header: FrameHeader, data: bytes,
                 cipher: BlockCipher64 = _XTEA) -> LinkFrame:
    if len(data) > MAX_DATA:
        raise DataTooLong(f"data is {len(data)} bytes, limit is {MAX_DATA}")
    if header.length != len(data):
        raise LengthMismatch(f"header length {header.length} != data length {len(data)}")
    enc, _ = _ops(cipher)
    padded = pad(data)
    prev = int.from_bytes(build_iv(header), "big")
    checksum = 0
    body = bytearray()
    for i in range(0, len(padded), BLOCK):
        p = int.from_bytes(padded[i:i + BLOCK], "big")
        checksum ^= p
        prev = enc(key, p ^ prev)
        body += prev.to_bytes(BLOCK, "big")
    tag = enc(key, prev ^ checksum).to_bytes(BLOCK, "big")[:MAC_LEN]
    return LinkFrame(header, bytes(body), tag)


def cbcx_decrypt(key: bytes, frame: LinkFrame, cipher: BlockCipher64 = _XTEA) -> bytes:
    """Authenticate and decrypt a frame, returning the original data bytes.

    The MAC is checked before padding or length, so any alteration of the
    header, body or MAC surfaces as :class:`AuthFailed`.
    """
    body = frame.body
    if len(body) < BLOCK or len(body) % BLOCK or len(body) > 32 or len(frame.mac) != MAC_LEN:
        raise FrameFormatError("malformed frame body or mac")
    enc, dec = _ops(cipher)
    prev = int.from_bytes(build_iv(frame.header), "big")
    checksum = 0
    plain = bytearray()
    for i in range(0, len(body), BLOCK):
        c = int.from_bytes(body[i:i + BLOCK], "big")
        p = dec(key, c) ^ prev
        checksum ^= p
        plain += p.to_bytes(BLOCK, "big")
        prev = c
    tag = enc(key, prev ^ checksum).to_bytes(BLOCK, "big")[:MAC_LEN]
    if not hmac.compare_digest(tag, frame.mac):
        raise AuthFailed("MAC mismatch")
    data = unpad(bytes(plain))
    if len(data) != frame.header.length:
        raise LengthMismatch(f"decrypted {len(data)} bytes, header says {frame.header.length}")
    return data


class RanCounter:
    """Per-(sender, receiver) 24-bit frame counter, seeded randomly."""

    def __init__(self, rng):
        self._rng = rng
        self._next: dict[tuple[int, int], int] = {}

    def next(self, sender: int, receiver: int) -> int:
        key = (sender, receiver)
        value = self._next.get(key)
        if value is None:
            value = int(self._rng.integers(0, 1 << 24))
        self._next[key] = (value + 1) % (1 << 24)
        return value


def read_vectors(path) -> list[dict[str, bytes]]:
    """Parse a known-answer file: one whitespace-separated hex record per line.

    Field order: key dest A L G ran data body mac. ``-`` stands for empty data.
    Lines starting with ``#`` are comments.
    """
    names = ("key", "dest", "A", "L", "G", "ran", "data", "body", "mac")
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != len(names):
                raise ValueError(f"{path}:{lineno}: expected {len(names)} fields")
            out.append({n: (b"" if v == "-" else bytes.fromhex(v)) for n, v in zip(names, parts)})
    return out


def format_vector(key: bytes, frame: LinkFrame, data: bytes) -> str:
    h = frame.header
    fields = [key.hex(), h.dest.to_bytes(2, "big").hex(), f"{h.am_type:02x}", f"{h.length:02x}",
              f"{h.group:02x}", h.ran.to_bytes(3, "big").hex(), data.hex() or "-",
              frame.body.hex(), frame.mac.hex()]
    return " ".join(fields)
