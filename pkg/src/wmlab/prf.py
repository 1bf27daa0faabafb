"""Keyed hash utilities shared by the language models and watermark schemes.

Every reproducible-by-key quantity in the lab is derived from HMAC-SHA256.
The message framing is pinned here and nowhere else: a one-byte domain tag
followed by each input part, length-prefixed with a 4-byte big-endian
integer.  Token ids are encoded as 8-byte big-endian integers.  A 64-bit
value is read big-endian from the first 8 bytes of the digest; a unit
float divides that by 2**64.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from collections.abc import Iterable

# Domain tags. Schemes must never share a tag.
TAG_LM = b"\x00"
TAG_UNIGRAM = b"\x01"
TAG_TOURNAMENT = b"\x02"
TAG_SEED = b"\x03"


def ids_bytes(ids: Iterable[int]) -> bytes:
    """Encode token ids as concatenated 8-byte big-endian integers."""
    return b"".join(struct.pack(">Q", i) for i in ids)


def prf_bytes(key: bytes, tag: bytes, *parts: bytes) -> bytes:
    msg = bytearray(tag)
    for part in parts:
        msg += struct.pack(">I", len(part))
        msg += part
    return hmac.new(key, bytes(msg), hashlib.sha256).digest()


def prf_u64(key: bytes, tag: bytes, *parts: bytes) -> int:
    return int.from_bytes(prf_bytes(key, tag, *parts)[:8], "big")


def prf_unit(key: bytes, tag: bytes, *parts: bytes) -> float:
    """Map the PRF output uniformly into [0, 1)."""
    return prf_u64(key, tag, *parts) / 2.0**64


def derive_seed(master_seed: int, index: int) -> int:
    """Per-sample RNG seed, a pure function of (master seed, sample index)."""
    key = (master_seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big")
    return prf_u64(key, TAG_SEED, struct.pack(">Q", index))
