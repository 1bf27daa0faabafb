"""Tokenization, vocabularies, prompt sets, and deterministic toy language models.

The lab works with word-level tokens.  Two LM backends are provided: a
hash-based high-entropy model (statistical tests need entropy) and an
add-one-smoothed n-gram model trained on a plain-text corpus (quality
metrics need natural-ish sentences).  Both are pure functions of their
configuration, so generation is reproducible bit-for-bit.
"""

from __future__ import annotations

import json
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

from .prf import TAG_LM, ids_bytes, prf_u64

UNK_SURFACE = "<unk>"
SENTENCE_ENDERS = (".", "!", "?")
# Trailing characters detached into their own token.
DETACHABLE_PUNCT = ".!?,;:"

Sampler = Callable[[np.ndarray, Sequence[int], np.random.Generator], int]


@dataclass(frozen=True)
class Vocabulary:
    """Dense token-id space over unique surface strings.

    Id 0 is always the reserved UNK token; ``punctuation_ids`` marks the
    sentence enders present in the vocabulary.
    """

    tokens: tuple[str, ...]
    punctuation_ids: frozenset[int]
    unk_id: int = 0

    def __post_init__(self) -> None:
        if not self.tokens or self.tokens[self.unk_id] != UNK_SURFACE:
            raise ValueError("vocabulary must reserve an UNK token")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary surfaces must be unique")
        if any(not t for t in self.tokens):
            raise ValueError("vocabulary surfaces must be non-empty")
        if any(i < 0 or i >= len(self.tokens) for i in self.punctuation_ids):
            raise ValueError("punctuation ids out of range")

    @classmethod
    def from_words(cls, words: Sequence[str]) -> "Vocabulary":
        toks = [UNK_SURFACE] + [w for w in words if w != UNK_SURFACE]
        punct = frozenset(i for i, t in enumerate(toks) if t in SENTENCE_ENDERS)
        return cls(tokens=tuple(toks), punctuation_ids=punct)

    @classmethod
    def from_file(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            words = [line.strip() for line in fh if line.strip()]
        return cls.from_words(words)

    @cached_property
    def id_of(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class TokenSequence:
    """Ordered token ids plus the surfaces needed to losslessly reconstruct text.

    ``oov`` is a sidecar of (position, surface) pairs for tokens that mapped
    to the UNK id, so ``surface()`` round-trips through ``tokenize()``.
    """

    ids: tuple[int, ...]
    vocab: Vocabulary
    oov: tuple[tuple[int, str], ...] = ()

    def __post_init__(self) -> None:
        size = len(self.vocab)
        if any(i < 0 or i >= size for i in self.ids):
            raise ValueError("token id out of vocabulary range")

    def __len__(self) -> int:
        return len(self.ids)

    @cached_property
    def _oov_map(self) -> dict[int, str]:
        return dict(self.oov)

    def surface_at(self, position: int) -> str:
        tid = self.ids[position]
        if tid == self.vocab.unk_id:
            return self._oov_map.get(position, UNK_SURFACE)
        return self.vocab.tokens[tid]

    def surfaces(self) -> list[str]:
        return [self.surface_at(i) for i in range(len(self.ids))]

    def surface(self) -> str:
        """Reconstructed text: single-space joins, no space before punctuation."""
        out: list[str] = []
        for word in self.surfaces():
            if out and word in DETACHABLE_PUNCT:
                out[-1] += word
            else:
                out.append(word)
        return " ".join(out)

    def slice(self, start: int, stop: int | None = None) -> "TokenSequence":
        stop = len(self.ids) if stop is None else stop
        oov = tuple(
            (p - start, s) for p, s in self.oov if start <= p < stop
        )
        return TokenSequence(self.ids[start:stop], self.vocab, oov)


def from_surfaces(words: Sequence[str], vocab: Vocabulary) -> TokenSequence:
    """Build a sequence from per-token surfaces, routing OOV words through UNK."""
    ids: list[int] = []
    oov: list[tuple[int, str]] = []
    lookup = vocab.id_of
    for pos, word in enumerate(words):
        tid = lookup.get(word)
        if tid is None:
            tid = vocab.unk_id
            oov.append((pos, word))
        ids.append(tid)
    return TokenSequence(tuple(ids), vocab, tuple(oov))


def tokenize(text: str, vocab: Vocabulary) -> TokenSequence:
    """Whitespace split with trailing punctuation detached into its own token."""
    words: list[str] = []
    for chunk in text.split():
        if len(chunk) > 1 and chunk[-1] in DETACHABLE_PUNCT:
            words.append(chunk[:-1])
            words.append(chunk[-1])
        else:
            words.append(chunk)
    return from_surfaces(words, vocab)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    p = np.exp(shifted)
    return p / p.sum()


_SM_MULT1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_MULT2 = np.uint64(0x94D049BB133111EB)
_SM_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = x + _SM_GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _SM_MULT1
    z = (z ^ (z >> np.uint64(27))) * _SM_MULT2
    return z ^ (z >> np.uint64(31))


class HashLM:
    """High-entropy LM: keyed-hash logits in [0, 1), softmax at a temperature.

    Per step, one HMAC of (seed, last-k context ids) yields a step seed; a
    splitmix64 mix of that seed with each token id gives the per-token
    uniform logit.  Deterministic for fixed (seed, order, context).
    """

    backend = "hash_lm"

    def __init__(self, vocab: Vocabulary, order: int = 3, seed: int = 0,
                 temperature: float = 1.0):
        if order < 1:
            raise ValueError("order must be >= 1")
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.vocab = vocab
        self.order = order
        self.seed = seed
        self.temperature = temperature
        self._seed_bytes = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big")
        self._id_mix = _splitmix64(np.arange(len(vocab), dtype=np.uint64))

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        ctx = tuple(context[-self.order:])
        step = prf_u64(self._seed_bytes, TAG_LM, ids_bytes(ctx))
        mixed = _splitmix64(self._id_mix ^ np.uint64(step))
        u = mixed.astype(np.float64) * 2.0**-64
        return _softmax(u / self.temperature)


class NgramLM:
    """Add-one-smoothed k-gram model over a training corpus."""

    backend = "ngram_lm"

    def __init__(self, vocab: Vocabulary, corpus_text: str, order: int = 2):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.vocab = vocab
        self.order = order
        train = tokenize(corpus_text, vocab).ids
        counts: dict[tuple[int, ...], Counter] = {}
        for i in range(order, len(train)):
            ctx = train[i - order:i]
            counts.setdefault(ctx, Counter())[train[i]] += 1
        self._counts = counts

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        size = len(self.vocab)
        ctx = tuple(context[-self.order:])
        p = np.ones(size)
        ctx_counts = self._counts.get(ctx)
        total = 0
        if ctx_counts:
            total = sum(ctx_counts.values())
            for tid, c in ctx_counts.items():
                p[tid] += c
        return p / (total + size)


LanguageModel = HashLM | NgramLM


def draw(cumulative: np.ndarray, rng: np.random.Generator) -> int:
    """One ancestral draw from a cumulative distribution.

    Shared by every sampler so degenerate watermark configurations consume
    the RNG identically to plain sampling.
    """
    idx = int(np.searchsorted(cumulative, rng.random(), side="right"))
    return min(idx, len(cumulative) - 1)


def ancestral_sampler(probs: np.ndarray, context: Sequence[int],
                      rng: np.random.Generator) -> int:
    return draw(np.cumsum(probs), rng)


def generate(lm: LanguageModel, prompt: TokenSequence, length: int,
             sampler: Sampler | None = None, rng_seed: int = 0) -> TokenSequence:
    """Append exactly ``length`` sampled tokens to the prompt."""
    if length < 1:
        raise ValueError("length must be >= 1")
    sampler = sampler or ancestral_sampler
    rng = np.random.default_rng(rng_seed)
    ids = list(prompt.ids)
    for _ in range(length):
        probs = lm.next_distribution(ids)
        ids.append(sampler(probs, ids, rng))
    return TokenSequence(tuple(ids), lm.vocab, prompt.oov)


@dataclass(frozen=True)
class PromptSet:
    """Numbered prompts, iterated in numeric key order."""

    entries: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def texts(self) -> list[str]:
        return [text for _, text in self.entries]


class PromptFormatError(ValueError):
    pass


def parse_prompts(raw: str) -> PromptSet:
    def reject_duplicates(pairs):
        seen = set()
        for key, _ in pairs:
            if key in seen:
                raise PromptFormatError(f"duplicate key {key!r}")
            seen.add(key)
        return dict(pairs)

    try:
        data = json.loads(raw, object_pairs_hook=reject_duplicates)
    except json.JSONDecodeError as exc:
        raise PromptFormatError(f"malformed prompt JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise PromptFormatError("prompt file must be a JSON object")
    entries = []
    for key, value in data.items():
        try:
            num = int(key)
        except ValueError:
            raise PromptFormatError(f"key {key!r} is not an integer") from None
        if num < 1:
            raise PromptFormatError(f"key {key!r} is not a positive integer")
        if not isinstance(value, str):
            raise PromptFormatError(f"value for key {key} is not a string")
        if not value:
            raise PromptFormatError(f"value for key {key} is empty")
        entries.append((num, key, value))
    entries.sort(key=lambda e: e[0])
    return PromptSet(tuple((key, value) for _, key, value in entries))


def load_prompts(path) -> PromptSet:
    with open(path, encoding="utf-8") as fh:
        return parse_prompts(fh.read())


def _data_text(name: str) -> str:
    return resources.files("wmlab.data").joinpath(name).read_text(encoding="utf-8")


def default_vocabulary() -> Vocabulary:
    words = [line.strip() for line in _data_text("wordlist.txt").splitlines()
             if line.strip()]
    return Vocabulary.from_words(words)


def default_prompts() -> PromptSet:
    return parse_prompts(_data_text("prompts.json"))


def default_corpus_text() -> str:
    return _data_text("corpus.txt")
