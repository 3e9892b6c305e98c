"""Encrypt one link frame with CBC-X, then flip a bit on the wire and watch it fail."""

from __future__ import annotations

from manetsec.linksec import AuthFailed, FrameHeader, LinkFrame, cbcx_decrypt, cbcx_encrypt

key = bytes(range(16))
data = b"route 0-4-9 ok"
frame = cbcx_encrypt(key, FrameHeader(dest=9, am_type=0x11, length=len(data), group=1,
                                      ran=0x00BEEF), data)
raw = frame.to_bytes()
print(f"frame ({len(raw)} bytes): {raw.hex()}")
print(f"  body {frame.body.hex()}  mac {frame.mac.hex()}")
print(f"decrypts to {cbcx_decrypt(key, frame)!r}")

for bit in (3, 70, 8 * len(raw) - 1):
    mutated = bytearray(raw)
    mutated[bit // 8] ^= 0x80 >> (bit % 8)
    try:
        cbcx_decrypt(key, LinkFrame.from_bytes(bytes(mutated)))
        print(f"bit {bit:3d} flipped: accepted (unexpected)")
    except AuthFailed as exc:
        print(f"bit {bit:3d} flipped: rejected ({exc})")
