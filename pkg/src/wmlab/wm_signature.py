"""Publicly detectable watermark: sign a hash of an initial segment, embed
the repetition-coded signature into subsequent token choices, verify with
the public key only.

Byte layouts are pinned so independent implementations interoperate:

* segment hash: SHA-256 over the segment token surfaces, each encoded as
  4-byte big-endian length + UTF-8 bytes, joined with a 0x1F separator;
* token bit: least significant bit of the last byte of SHA-256 of the
  token's surface (unkeyed, publicly computable);
* payload: signature bytes in order, bits most-significant first, each bit
  repeated ``repetition`` times and majority-decoded.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .corpus import LanguageModel, TokenSequence, Vocabulary, draw


class Ed25519Scheme:
    """Default signature construction: Ed25519 over the 32-byte segment hash.

    Deterministic signing keeps embedding a pure function of the seed.
    """

    name = "ed25519"
    signature_bits = 512

    def keygen(self, seed: bytes) -> tuple[bytes, bytes]:
        if len(seed) != 32:
            raise ValueError("seed must be 32 bytes")
        sk = Ed25519PrivateKey.from_private_bytes(seed)
        return seed, sk.public_key().public_bytes_raw()

    def sign(self, sk: bytes, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(sk).sign(message)

    def verify(self, pk: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(pk).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False


@dataclass(frozen=True)
class SignatureParams:
    pk: bytes
    sk: bytes | None = None
    seg_len: int = 16
    repetition: int = 3
    max_rejects: int = 64
    scheme: Ed25519Scheme = Ed25519Scheme()

    def __post_init__(self) -> None:
        if self.seg_len < 1:
            raise ValueError("seg_len must be >= 1")
        if self.repetition < 1 or self.repetition % 2 == 0:
            raise ValueError("repetition factor must be odd and >= 1")
        if self.max_rejects < 1:
            raise ValueError("max_rejects must be >= 1")

    @classmethod
    def from_seed(cls, seed: bytes, **kwargs) -> "SignatureParams":
        scheme = kwargs.pop("scheme", Ed25519Scheme())
        sk, pk = scheme.keygen(seed)
        return cls(pk=pk, sk=sk, scheme=scheme, **kwargs)

    def public(self) -> "SignatureParams":
        """Verification-side parameters; carries no secret key."""
        return replace(self, sk=None)

    @property
    def payload_tokens(self) -> int:
        return self.repetition * self.scheme.signature_bits

    @property
    def min_length(self) -> int:
        return self.seg_len + self.payload_tokens


@dataclass(frozen=True)
class SignatureDetection:
    recovered_bits: str
    decode_ok: bool
    verify_ok: bool
    decision: bool


@dataclass(frozen=True)
class EmbedResult:
    text: TokenSequence
    signature: bytes
    draws_per_bit: tuple[int, ...]


def token_bit(surface: str) -> int:
    """Publicly computable bit of a token surface."""
    return hashlib.sha256(surface.encode("utf-8")).digest()[-1] & 1


@lru_cache(maxsize=32)
def _vocab_bits(vocab: Vocabulary) -> np.ndarray:
    bits = np.fromiter((token_bit(t) for t in vocab.tokens), dtype=np.uint8,
                       count=len(vocab))
    bits.setflags(write=False)
    return bits


def segment_hash(surfaces: Sequence[str]) -> bytes:
    buf = bytearray()
    for i, surface in enumerate(surfaces):
        if i:
            buf += b"\x1f"
        raw = surface.encode("utf-8")
        buf += len(raw).to_bytes(4, "big")
        buf += raw
    return hashlib.sha256(bytes(buf)).digest()


def signature_bits(signature: bytes) -> list[int]:
    return [(byte >> (7 - i)) & 1 for byte in signature for i in range(8)]


def _bits_to_bytes(bits: Sequence[int]) -> bytes:
    out = bytearray()
    for i in range(0, len(bits), 8):
        byte = 0
        for bit in bits[i:i + 8]:
            byte = (byte << 1) | bit
        out.append(byte)
    return bytes(out)


def embed(params: SignatureParams, lm: LanguageModel, prompt: TokenSequence,
          length: int, rng_seed: int = 0) -> TokenSequence:
    return embed_detailed(params, lm, prompt, length, rng_seed).text


def embed_detailed(params: SignatureParams, lm: LanguageModel,
                   prompt: TokenSequence, length: int,
                   rng_seed: int = 0) -> EmbedResult:
    """Generate, sign the initial segment, and rejection-sample the payload in.

    Each payload bit redraws from the step distribution until a token with
    the matching bit appears; after ``max_rejects`` draws the most probable
    matching token is forced.
    """
    if params.sk is None:
        raise ValueError("embedding requires the secret key")
    if length < params.min_length:
        raise ValueError(
            f"length {length} too short: payload needs at least "
            f"{params.min_length} tokens "
            f"(seg_len {params.seg_len} + {params.repetition}x"
            f"{params.scheme.signature_bits} payload)"
        )
    rng = np.random.default_rng(rng_seed)
    vocab = lm.vocab
    bits = _vocab_bits(vocab)
    ids = list(prompt.ids)

    for _ in range(params.seg_len):
        ids.append(draw(np.cumsum(lm.next_distribution(ids)), rng))

    seg_surfaces = [vocab.tokens[t] for t in ids[len(prompt.ids):]]
    digest = segment_hash(seg_surfaces)
    signature = params.scheme.sign(params.sk, digest)
    payload = [bit for bit in signature_bits(signature)
               for _ in range(params.repetition)]

    draws_per_bit: list[int] = []
    for want in payload:
        probs = lm.next_distribution(ids)
        cumulative = np.cumsum(probs)
        draws = 0
        while True:
            token = draw(cumulative, rng)
            draws += 1
            if bits[token] == want:
                break
            if draws >= params.max_rejects:
                matching = np.where(bits == want, probs, -1.0)
                token = int(matching.argmax())
                break
        draws_per_bit.append(draws)
        ids.append(token)

    for _ in range(length - params.seg_len - len(payload)):
        ids.append(draw(np.cumsum(lm.next_distribution(ids)), rng))

    text = TokenSequence(tuple(ids), vocab, prompt.oov)
    return EmbedResult(text, signature, tuple(draws_per_bit))


def detect(params: SignatureParams, text: TokenSequence) -> SignatureDetection:
    """Public verification: recompute the segment hash, majority-decode the
    payload, and verify the signature against the public key only."""
    if len(text) < params.seg_len + params.repetition:
        raise ValueError("insufficient payload")
    surfaces = text.surfaces()
    digest = segment_hash(surfaces[:params.seg_len])

    r = params.repetition
    n_bits = params.scheme.signature_bits
    payload_surfaces = surfaces[params.seg_len:params.seg_len + r * n_bits]
    decode_ok = len(payload_surfaces) == r * n_bits

    bits: list[int] = []
    for i in range(0, len(payload_surfaces) - r + 1, r):
        block = payload_surfaces[i:i + r]
        ones = sum(token_bit(s) for s in block)
        bits.append(1 if 2 * ones > r else 0)

    verify_ok = False
    if decode_ok:
        verify_ok = params.scheme.verify(params.pk, digest, _bits_to_bytes(bits))
    decision = decode_ok and verify_ok
    recovered = "".join(str(b) for b in bits)
    return SignatureDetection(recovered, decode_ok, verify_ok, decision)
