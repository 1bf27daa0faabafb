"""Tournament-sampling watermark: keyed per-candidate g-bits, mean-g detection.

Each generation step draws candidate tokens from the model distribution
and keeps the one with the highest keyed g-value; the average g over a
text is the detector statistic, with null mean 0.5.  The first
``context_width`` positions of a text lack a full context window and are
skipped at detection.
"""

from __future__ import annotations

import struct
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .corpus import Sampler, TokenSequence, draw
from .prf import TAG_TOURNAMENT, ids_bytes, prf_bytes

KEY_BYTES = 32


@dataclass(frozen=True)
class TournamentParams:
    key: bytes
    m: int = 2                 # candidates per tournament
    layers: int = 1            # tournament depth
    context_width: int = 4     # context window for g computation
    g_threshold: float = 0.5

    def __post_init__(self) -> None:
        if len(self.key) != KEY_BYTES:
            raise ValueError(f"key must be {KEY_BYTES} bytes")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.context_width < 1:
            raise ValueError("context_width must be >= 1")


@dataclass(frozen=True)
class TournamentDetection:
    mean_g: float
    scored: int
    decision: bool


def g_value(params: TournamentParams, context: Sequence[int], candidate: int) -> int:
    """Keyed bit for (last-H context ids, candidate id)."""
    window = tuple(context[-params.context_width:])
    digest = prf_bytes(params.key, TAG_TOURNAMENT, ids_bytes(window),
                       struct.pack(">Q", candidate))
    return digest[-1] & 1


def tournament_sampler(params: TournamentParams) -> Sampler:
    """Per position, keep the max-g candidate of m i.i.d. draws (ties: first drawn).

    With layers > 1 each candidate of a layer is itself the winner of a
    lower-layer tournament, i.e. m**layers leaf draws per emitted token.
    With m=1 the stream is identical to plain ancestral sampling.
    """

    def sampler(probs: np.ndarray, context, rng: np.random.Generator) -> int:
        cumulative = np.cumsum(probs)

        def pick(depth: int) -> int:
            if depth == 0:
                return draw(cumulative, rng)
            best = -1
            best_g = -1
            for _ in range(params.m):
                cand = pick(depth - 1)
                g = g_value(params, context, cand)
                if g > best_g:
                    best, best_g = cand, g
            return best

        return pick(params.layers)

    return sampler


def detect(params: TournamentParams, text: TokenSequence) -> TournamentDetection:
    """Mean g over positions with a full context window."""
    h = params.context_width
    if len(text) < h + 1:
        raise ValueError("insufficient context")
    total = 0
    scored = 0
    for i in range(h, len(text)):
        total += g_value(params, text.ids[i - h:i], text.ids[i])
        scored += 1
    mean_g = total / scored
    return TournamentDetection(mean_g, scored, bool(mean_g > params.g_threshold))
