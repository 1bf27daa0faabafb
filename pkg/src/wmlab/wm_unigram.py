"""Fixed green/red vocabulary partition watermark with z-score detection.

A token is green iff the keyed PRF of its id falls below the green-list
fraction gamma.  Generation adds a logit boost delta to green tokens;
detection runs a one-proportion z-test of the observed green count against
the gamma baseline.  UNK tokens are scored by hashing their surface string
so attacked text that introduced new words stays scorable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .corpus import Sampler, TokenSequence, Vocabulary, draw
from .prf import TAG_UNIGRAM, prf_unit

KEY_BYTES = 32


@dataclass(frozen=True)
class UnigramParams:
    key: bytes
    gamma: float = 0.5
    delta: float = 2.0
    # Attack-success accounting threshold; deployment detection may raise it.
    z_threshold: float = 0.0

    def __post_init__(self) -> None:
        if len(self.key) != KEY_BYTES:
            raise ValueError(f"key must be {KEY_BYTES} bytes")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if self.delta < 0.0:
            raise ValueError("delta must be non-negative")


@dataclass(frozen=True)
class UnigramDetection:
    green_count: int
    scored: int
    z: float
    decision: bool


def is_green_id(params: UnigramParams, token_id: int) -> bool:
    return prf_unit(params.key, TAG_UNIGRAM, struct.pack(">Q", token_id)) < params.gamma


def is_green_surface(params: UnigramParams, surface: str) -> bool:
    return prf_unit(params.key, TAG_UNIGRAM, surface.encode("utf-8")) < params.gamma


@lru_cache(maxsize=32)
def _green_mask(params: UnigramParams, vocab: Vocabulary) -> np.ndarray:
    mask = np.fromiter(
        (is_green_id(params, t) for t in range(len(vocab))),
        dtype=bool, count=len(vocab),
    )
    mask.setflags(write=False)
    return mask


def green_list(params: UnigramParams, vocab: Vocabulary) -> frozenset[int]:
    """Green token ids; a pure function of (key, vocab)."""
    return frozenset(np.flatnonzero(_green_mask(params, vocab)).tolist())


def watermarked_sampler(params: UnigramParams, vocab: Vocabulary) -> Sampler:
    """Sampler that boosts green logits by delta before the softmax.

    Boosting a logit by delta is identical to multiplying the probability
    by e**delta and renormalizing, so the base distribution is reweighted
    directly.  With delta=0 this is plain ancestral sampling.
    """
    boost = np.where(_green_mask(params, vocab), np.exp(params.delta), 1.0)

    def sampler(probs: np.ndarray, context, rng: np.random.Generator) -> int:
        weighted = probs * boost
        return draw(np.cumsum(weighted / weighted.sum()), rng)

    return sampler


def boosted_distribution(params: UnigramParams, vocab: Vocabulary,
                         probs: np.ndarray) -> np.ndarray:
    """The output distribution the watermarked sampler draws from."""
    weighted = probs * np.where(_green_mask(params, vocab), np.exp(params.delta), 1.0)
    return weighted / weighted.sum()


def detect(params: UnigramParams, text: TokenSequence) -> UnigramDetection:
    """One-proportion z-test of the green-token count against gamma."""
    scored = len(text)
    if scored < 1:
        raise ValueError("nothing to score")
    mask = _green_mask(params, text.vocab)
    green = 0
    for pos, tid in enumerate(text.ids):
        if tid == text.vocab.unk_id:
            green += is_green_surface(params, text.surface_at(pos))
        else:
            green += bool(mask[tid])
    gamma = params.gamma
    z = (green - gamma * scored) / np.sqrt(scored * gamma * (1.0 - gamma))
    return UnigramDetection(green, scored, float(z), bool(z > params.z_threshold))
