"""Keccak-256 in pure Python.

This is the original Keccak (pad byte 0x01) as used on Ethereum, not the
finalized SHA-3 standard (pad byte 0x06).  Both variants share the
Keccak-f[1600] permutation, which lets the test suite cross-check this
implementation against ``hashlib.sha3_256`` on the SHA-3 padding path.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1

_ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A,
    0x8000000080008000, 0x000000000000808B, 0x0000000080000001,
    0x8000000080008081, 0x8000000000008009, 0x000000000000008A,
    0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089,
    0x8000000000008003, 0x8000000000008002, 0x8000000000000080,
    0x000000000000800A, 0x800000008000000A, 0x8000000080008081,
    0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# Combined rho+pi step: destination lane d takes source lane _PI_SOURCE[d]
# rotated left by _RHO_BY_DEST[d].  Lane index is x + 5*y.
_PI_SOURCE = [0] * 25
_RHO_BY_DEST = [0] * 25
_RHO_OFFSETS = (
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
)
for _x in range(5):
    for _y in range(5):
        _src = _x + 5 * _y
        _dst = _y + 5 * ((2 * _x + 3 * _y) % 5)
        _PI_SOURCE[_dst] = _src
        _RHO_BY_DEST[_dst] = _RHO_OFFSETS[_src]

_RATE_BYTES = 136  # 1600 - 2*256 bits


def _keccak_f1600(lanes: list[int]) -> list[int]:
    """One full 24-round Keccak-f[1600] permutation over 25 64-bit lanes."""
    for rc in _ROUND_CONSTANTS:
        # theta
        c0 = lanes[0] ^ lanes[5] ^ lanes[10] ^ lanes[15] ^ lanes[20]
        c1 = lanes[1] ^ lanes[6] ^ lanes[11] ^ lanes[16] ^ lanes[21]
        c2 = lanes[2] ^ lanes[7] ^ lanes[12] ^ lanes[17] ^ lanes[22]
        c3 = lanes[3] ^ lanes[8] ^ lanes[13] ^ lanes[18] ^ lanes[23]
        c4 = lanes[4] ^ lanes[9] ^ lanes[14] ^ lanes[19] ^ lanes[24]
        d0 = c4 ^ (((c1 << 1) | (c1 >> 63)) & _MASK)
        d1 = c0 ^ (((c2 << 1) | (c2 >> 63)) & _MASK)
        d2 = c1 ^ (((c3 << 1) | (c3 >> 63)) & _MASK)
        d3 = c2 ^ (((c4 << 1) | (c4 >> 63)) & _MASK)
        d4 = c3 ^ (((c0 << 1) | (c0 >> 63)) & _MASK)
        for y in (0, 5, 10, 15, 20):
            lanes[y] ^= d0
            lanes[y + 1] ^= d1
            lanes[y + 2] ^= d2
            lanes[y + 3] ^= d3
            lanes[y + 4] ^= d4
        # rho + pi
        b = [0] * 25
        for dst in range(25):
            v = lanes[_PI_SOURCE[dst]]
            r = _RHO_BY_DEST[dst]
            b[dst] = ((v << r) | (v >> (64 - r))) & _MASK if r else v
        # chi
        for y in (0, 5, 10, 15, 20):
            b0, b1, b2, b3, b4 = b[y], b[y + 1], b[y + 2], b[y + 3], b[y + 4]
            lanes[y] = b0 ^ (~b1 & b2)
            lanes[y + 1] = b1 ^ (~b2 & b3)
            lanes[y + 2] = b2 ^ (~b3 & b4)
            lanes[y + 3] = b3 ^ (~b4 & b0)
            lanes[y + 4] = b4 ^ (~b0 & b1)
        # iota
        lanes[0] = (lanes[0] ^ rc) & _MASK
    return lanes


def _sponge_256(data: bytes, pad_byte: int) -> bytes:
    padded_len = ((len(data) // _RATE_BYTES) + 1) * _RATE_BYTES
    padded = bytearray(data)
    padded.append(pad_byte)
    padded.extend(b"\x00" * (padded_len - len(padded)))
    padded[-1] ^= 0x80

    lanes = [0] * 25
    for block_start in range(0, padded_len, _RATE_BYTES):
        block = padded[block_start:block_start + _RATE_BYTES]
        for i in range(_RATE_BYTES // 8):
            lanes[i] ^= int.from_bytes(block[8 * i:8 * i + 8], "little")
        _keccak_f1600(lanes)

    out = bytearray()
    for i in range(4):  # 32 bytes from the first four lanes
        out.extend(lanes[i].to_bytes(8, "little"))
    return bytes(out)


def keccak256(data: bytes) -> bytes:
    """Ethereum-style Keccak-256 digest of ``data``."""
    return _sponge_256(data, 0x01)


def sha3_256(data: bytes) -> bytes:
    """NIST SHA3-256 digest; exists only to cross-check the permutation."""
    return _sponge_256(data, 0x06)
