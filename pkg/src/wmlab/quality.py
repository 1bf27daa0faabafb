"""Text-quality metrics: readability, complexity, a grammar-error proxy,
and lexical similarity, with plugin slots for neural metrics.

The syllable rule is pinned (maximal aeiouy groups, minus one for a
terminal silent "e" when more than one group, floor 1) so Flesch and Fog
are reproducible bit-for-bit.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .attacks import Lexicon
from .corpus import TokenSequence
from .plugin import PluginClient

VOWELS = set("aeiouy")

DETERMINERS = frozenset({
    "the", "a", "an", "this", "that", "these", "those", "each", "every",
    "some", "any", "no", "either", "neither",
})
PREPOSITIONS = frozenset({
    "of", "in", "on", "at", "by", "for", "with", "from", "to", "into",
    "over", "under", "about", "between", "through", "during", "before",
    "after", "above", "below",
})
# Words that read as unfinished when they sit directly before a terminator.
DANGLING = DETERMINERS | PREPOSITIONS

TERMINATORS = (".", "!", "?")


@dataclass(frozen=True)
class QualityReport:
    rouge1_f: float
    rougeL_f: float
    flesch: float
    fog: float
    errors: int
    words: int
    sentences: int
    syllables: int
    bert_f1: float | None = None


def count_syllables(word: str) -> int:
    letters = [c for c in word.lower() if c.isalpha()]
    groups = 0
    prev_vowel = False
    for c in letters:
        vowel = c in VOWELS
        if vowel and not prev_vowel:
            groups += 1
        prev_vowel = vowel
    if groups > 1 and letters and letters[-1] == "e":
        groups -= 1
    return max(groups, 1)


def _is_word(surface: str) -> bool:
    return any(c.isalnum() for c in surface)


def text_counts(text: TokenSequence) -> tuple[int, int, int]:
    """(words, sentences, syllables); sentences floor at 1 for nonempty text."""
    surfaces = text.surfaces()
    words = [s for s in surfaces if _is_word(s)]
    sentences = max(sum(s in TERMINATORS for s in surfaces), 1)
    syllables = sum(count_syllables(w) for w in words)
    return len(words), sentences, syllables


def flesch(text: TokenSequence) -> float:
    """Flesch Reading Ease: 206.835 - 1.015 W/S - 84.6 Syl/W."""
    words, sentences, syllables = text_counts(text)
    if words == 0:
        raise ValueError("flesch needs at least one word")
    return 206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words)


def fog(text: TokenSequence) -> float:
    """Gunning Fog: 0.4 * (W/S + 100 * complex/W), complex = 3+ syllables."""
    surfaces = text.surfaces()
    words = [s for s in surfaces if _is_word(s)]
    if not words:
        raise ValueError("fog needs at least one word")
    sentences = max(sum(s in TERMINATORS for s in surfaces), 1)
    complex_words = sum(count_syllables(w) >= 3 for w in words)
    return 0.4 * (len(words) / sentences + 100.0 * complex_words / len(words))


def error_count(text: TokenSequence, lexicon: Lexicon,
                plugin: PluginClient | None = None) -> int:
    """Grammar-error proxy; a configured plugin overrides it entirely.

    Proxy rules: consecutive duplicate words, a sentence opening with a
    non-alphabetic token, determiner directly followed by determiner, and
    a dangling determiner/preposition left before a terminator.
    """
    if plugin is not None:
        return int(plugin.error_count(text.surface()))
    surfaces = [s.lower() for s in text.surfaces()]
    errors = 0
    sentence_start = True
    prev: str | None = None
    for surface in surfaces:
        if sentence_start and not surface[:1].isalpha():
            errors += 1
        if prev is not None:
            if _is_word(surface) and surface == prev:
                errors += 1
            if prev in DETERMINERS and surface in DETERMINERS:
                errors += 1
            if prev in DANGLING and surface in TERMINATORS:
                errors += 1
        sentence_start = surface in TERMINATORS
        prev = surface
    return errors


def _ngram_overlap_f1(candidate: list, reference: list, n: int) -> float:
    cand = Counter(tuple(candidate[i:i + n])
                   for i in range(len(candidate) - n + 1))
    ref = Counter(tuple(reference[i:i + n])
                  for i in range(len(reference) - n + 1))
    overlap = sum((cand & ref).values())
    total_c = sum(cand.values())
    total_r = sum(ref.values())
    if overlap == 0 or total_c == 0 or total_r == 0:
        return 0.0
    precision = overlap / total_c
    recall = overlap / total_r
    return 2 * precision * recall / (precision + recall)


def _lcs_length(a: list, b: list) -> int:
    # Bit-parallel LCS length (Crochemore-style row update on big ints);
    # linear in len(b) times len(a)/wordsize instead of quadratic.
    if not a or not b:
        return 0
    masks: dict = {}
    for i, x in enumerate(a):
        masks[x] = masks.get(x, 0) | (1 << i)
    m = len(a)
    full = (1 << m) - 1
    v = full
    for y in b:
        u = v & masks.get(y, 0)
        v = ((v + u) | (v - u)) & full
    return m - v.bit_count()


def _units(text: TokenSequence) -> list:
    # Token ids, except OOV positions use the sidecar surface so distinct
    # unknown words never count as matches.
    return [text.surface_at(i) if tid == text.vocab.unk_id else tid
            for i, tid in enumerate(text.ids)]


def rouge_f(candidate: TokenSequence, reference: TokenSequence,
            mode: str = "1") -> float:
    """ROUGE F1 over tokens: mode "1" n-gram overlap, mode "L" via LCS."""
    if len(reference) == 0:
        raise ValueError("empty reference")
    cand, ref = _units(candidate), _units(reference)
    if mode == "1":
        return _ngram_overlap_f1(cand, ref, 1)
    if mode == "L":
        lcs = _lcs_length(cand, ref)
        if lcs == 0:
            return 0.0
        precision = lcs / len(cand)
        recall = lcs / len(ref)
        return 2 * precision * recall / (precision + recall)
    raise ValueError(f"unknown rouge mode {mode!r}")


def semantic_similarity(candidate: TokenSequence, reference: TokenSequence,
                        plugin: PluginClient | None = None) -> float | None:
    """Neural similarity via the score_pair plugin; absent without one."""
    if plugin is None:
        return None
    return plugin.score_pair(candidate.surface(), reference.surface())


def quality_report(candidate: TokenSequence, reference: TokenSequence,
                   lexicon: Lexicon,
                   similarity_plugin: PluginClient | None = None,
                   grammar_plugin: PluginClient | None = None) -> QualityReport:
    words, sentences, syllables = text_counts(candidate)
    return QualityReport(
        rouge1_f=rouge_f(candidate, reference, "1"),
        rougeL_f=rouge_f(candidate, reference, "L"),
        flesch=flesch(candidate),
        fog=fog(candidate),
        errors=error_count(candidate, lexicon, grammar_plugin),
        words=words,
        sentences=sentences,
        syllables=syllables,
        bert_f1=semantic_similarity(candidate, reference, similarity_plugin),
    )
