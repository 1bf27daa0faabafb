"""Lexical attack suite, incremental attack pipeline, and plugin attacks.

All lexical attacks are deterministic per seed and log every modification;
replaying the edit log over the input reproduces the attacked sequence
exactly.  Edit positions refer to the input sequence (deletions are
applied as tombstones at the end of replay), which also makes the shared
sampling order of incremental runs visible as edit-prefix inclusion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .corpus import TokenSequence, from_surfaces, tokenize
from .plugin import PluginClient, PluginError
from .prf import derive_seed

CONTENT_POS = frozenset({"noun", "verb", "adjective", "adverb"})
ATTACK_KINDS = ("synonym", "deletion", "random_swap", "adjacent_swap",
                "simple_paraphrase", "plugin")

# Paper-motivated default intensity ceilings; overridable via AttackSpec.
DEFAULT_MAX_INTENSITY = {"synonym": 0.30, "deletion": 0.10}

SIMPLE_PARAPHRASE_SYNONYM_RATE = 0.5
SIMPLE_PARAPHRASE_SWAP_RATE = 0.3


@dataclass(frozen=True)
class Lexicon:
    """Word -> synonyms/part-of-speech tables plus the function-word list."""

    thesaurus: dict[str, tuple[str, ...]]
    pos: dict[str, str]
    function_words: frozenset[str]

    def pos_of(self, word: str) -> str | None:
        tag = self.pos.get(word)
        if tag is not None:
            return tag
        if word in self.function_words:
            return "function"
        return None

    def synonyms(self, word: str) -> tuple[str, ...]:
        return self.thesaurus.get(word, ())

    def is_content(self, word: str) -> bool:
        # Unknown-pos words count as content words.
        tag = self.pos_of(word)
        return tag is None or tag in CONTENT_POS

    @classmethod
    def load(cls, thesaurus_path, function_words_path) -> "Lexicon":
        with open(thesaurus_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        thesaurus = {}
        pos = {}
        for word, entry in raw.items():
            pos[word] = entry["pos"]
            syns = tuple(entry.get("syn", ()))
            if syns:
                thesaurus[word] = syns
        with open(function_words_path, encoding="utf-8") as fh:
            function_words = frozenset(
                line.strip() for line in fh if line.strip())
        return cls(thesaurus, pos, function_words)


def default_lexicon() -> Lexicon:
    data = resources.files("wmlab.data")
    with resources.as_file(data.joinpath("lexicon.json")) as lex, \
            resources.as_file(data.joinpath("function_words.txt")) as fw:
        return Lexicon.load(lex, fw)


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    intensity: float = 0.0
    rng_seed: int = 0
    plugin_cmd: str | None = None
    max_intensity: float | None = None  # overrides the default ceiling

    def __post_init__(self) -> None:
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("intensity must be in [0, 1]")
        ceiling = self.max_intensity
        if ceiling is None:
            ceiling = DEFAULT_MAX_INTENSITY.get(self.kind, 1.0)
        if self.intensity > ceiling:
            raise ValueError(
                f"{self.kind} intensity {self.intensity} exceeds ceiling {ceiling}")
        if self.kind == "plugin" and not self.plugin_cmd:
            raise ValueError("plugin attack needs plugin_cmd")

    @property
    def label(self) -> str:
        if self.kind == "plugin":
            return f"plugin:{self.plugin_cmd}"
        if self.kind in ("simple_paraphrase",):
            return self.kind
        return f"{self.kind}@{self.intensity:g}"


@dataclass(frozen=True)
class Edit:
    position: int
    op: str  # replace | delete | swap | replace_all
    before: str
    after: str
    position2: int | None = None


@dataclass(frozen=True)
class AttackResult:
    attacked: TokenSequence
    spec: AttackSpec
    edits: tuple[Edit, ...] = field(default_factory=tuple)


def apply_edits(original: TokenSequence, edits: tuple[Edit, ...]) -> TokenSequence:
    """Replay an edit log over the input; reproduces AttackResult.attacked."""
    words = original.surfaces()
    deleted: set[int] = set()
    for edit in edits:
        if edit.op == "replace":
            words[edit.position] = edit.after
        elif edit.op == "swap":
            j = edit.position2
            words[edit.position], words[j] = words[j], words[edit.position]
        elif edit.op == "delete":
            deleted.add(edit.position)
        elif edit.op == "replace_all":
            return tokenize(edit.after, original.vocab)
        else:
            raise ValueError(f"unknown edit op {edit.op!r}")
    kept = [w for i, w in enumerate(words) if i not in deleted]
    return from_surfaces(kept, original.vocab)


def _result(original: TokenSequence, spec: AttackSpec,
            edits: list[Edit]) -> AttackResult:
    return AttackResult(apply_edits(original, tuple(edits)), spec, tuple(edits))


def synonym_attack(text: TokenSequence, lexicon: Lexicon, intensity: float,
                   seed: int, content_only: bool = True,
                   spec: AttackSpec | None = None) -> AttackResult:
    """Replace a random subset of synonym-bearing (content) words."""
    spec = spec or AttackSpec("synonym", intensity, seed, max_intensity=1.0)
    rng = np.random.default_rng(seed)
    words = text.surfaces()
    candidates = [i for i, w in enumerate(words)
                  if (not content_only or lexicon.is_content(w))
                  and lexicon.synonyms(w)]
    count = int(np.floor(intensity * len(candidates)))
    edits: list[Edit] = []
    if candidates:
        order = rng.permutation(len(candidates))
        # Draw each replacement in sampled order so a lower intensity yields
        # an edit-prefix of a higher one under the same seed.
        for slot in order[:count]:
            pos = candidates[int(slot)]
            syns = lexicon.synonyms(words[pos])
            choice = syns[int(rng.integers(len(syns)))]
            edits.append(Edit(pos, "replace", words[pos], choice))
    return _result(text, spec, edits)


def _is_terminator(seq: TokenSequence, pos: int) -> bool:
    return seq.surface_at(pos) in (".", "!", "?")


def deletion_attack(text: TokenSequence, lexicon: Lexicon, intensity: float,
                    seed: int, spec: AttackSpec | None = None) -> AttackResult:
    """Delete floor(intensity * T) tokens, function words first; the final
    sentence terminator is never deleted."""
    spec = spec or AttackSpec("deletion", intensity, seed, max_intensity=1.0)
    rng = np.random.default_rng(seed)
    words = text.surfaces()
    total = len(words)
    quota = int(np.floor(intensity * total))
    protected = {total - 1} if total and _is_terminator(text, total - 1) else set()
    function = [i for i, w in enumerate(words)
                if w in lexicon.function_words and i not in protected]
    others = [i for i in range(total)
              if i not in protected and words[i] not in lexicon.function_words]
    order = [function[int(i)] for i in rng.permutation(len(function))]
    order += [others[int(i)] for i in rng.permutation(len(others))]
    edits = [Edit(pos, "delete", words[pos], "") for pos in order[:quota]]
    return _result(text, spec, edits)


def random_swap_attack(text: TokenSequence, intensity: float, seed: int,
                       spec: AttackSpec | None = None) -> AttackResult:
    """floor(intensity * T) independent swaps of uniformly chosen index pairs."""
    spec = spec or AttackSpec("random_swap", intensity, seed)
    rng = np.random.default_rng(seed)
    words = list(text.surfaces())
    total = len(words)
    edits: list[Edit] = []
    if total >= 2:
        for _ in range(int(np.floor(intensity * total))):
            i = int(rng.integers(total))
            j = int(rng.integers(total - 1))
            if j >= i:
                j += 1
            edits.append(Edit(i, "swap", words[i], words[j], position2=j))
            words[i], words[j] = words[j], words[i]
    return _result(text, spec, edits)


def adjacent_swap_attack(text: TokenSequence, lexicon: Lexicon,
                         intensity: float, seed: int,
                         spec: AttackSpec | None = None) -> AttackResult:
    """Swap a random non-overlapping subset of adjacent same-pos pairs.

    Pairs where either word lacks a known pos tag are ineligible.
    """
    spec = spec or AttackSpec("adjacent_swap", intensity, seed)
    rng = np.random.default_rng(seed)
    words = text.surfaces()
    eligible = [i for i in range(len(words) - 1)
                if lexicon.pos_of(words[i]) is not None
                and lexicon.pos_of(words[i]) == lexicon.pos_of(words[i + 1])]
    count = int(np.floor(intensity * len(eligible)))
    edits: list[Edit] = []
    used: set[int] = set()
    if eligible:
        for slot in rng.permutation(len(eligible)):
            if len(edits) >= count:
                break
            i = eligible[int(slot)]
            if i in used or i + 1 in used:
                continue
            used.update((i, i + 1))
            edits.append(Edit(i, "swap", words[i], words[i + 1], position2=i + 1))
    return _result(text, spec, edits)


def simple_paraphrase_attack(text: TokenSequence, lexicon: Lexicon, seed: int,
                             spec: AttackSpec | None = None) -> AttackResult:
    """Aggressive lexical composition: unfiltered synonym replacement at 0.5,
    then adjacent swaps at 0.3.  A lab construction; not a neural method."""
    spec = spec or AttackSpec("simple_paraphrase", rng_seed=seed)
    phase1 = synonym_attack(text, lexicon, SIMPLE_PARAPHRASE_SYNONYM_RATE,
                            derive_seed(seed, 1), content_only=False)
    phase2 = adjacent_swap_attack(phase1.attacked, lexicon,
                                  SIMPLE_PARAPHRASE_SWAP_RATE,
                                  derive_seed(seed, 2))
    return AttackResult(phase2.attacked, spec, phase1.edits + phase2.edits)


def plugin_attack(text: TokenSequence, plugin: PluginClient | str,
                  timeout_ms: int | None = None,
                  spec: AttackSpec | None = None) -> AttackResult:
    """Send the text to an external attack plugin and re-tokenize the reply.

    Raises PluginError on timeout, process death, or malformed responses;
    the harness records those as plugin failures instead of aborting.
    """
    owned = isinstance(plugin, str)
    client = PluginClient(plugin, timeout_ms) if owned else plugin
    spec = spec or AttackSpec("plugin", rng_seed=0, plugin_cmd=client.cmd)
    try:
        original = text.surface()
        attacked_text = client.attack(original)
        edits = (Edit(0, "replace_all", original, attacked_text),)
        return AttackResult(tokenize(attacked_text, text.vocab), spec, edits)
    finally:
        if owned:
            client.close()


def run_attack(text: TokenSequence, spec: AttackSpec, lexicon: Lexicon,
               plugin: PluginClient | None = None) -> AttackResult:
    """Dispatch one AttackSpec."""
    if spec.kind == "synonym":
        return synonym_attack(text, lexicon, spec.intensity, spec.rng_seed,
                              spec=spec)
    if spec.kind == "deletion":
        return deletion_attack(text, lexicon, spec.intensity, spec.rng_seed,
                               spec=spec)
    if spec.kind == "random_swap":
        return random_swap_attack(text, spec.intensity, spec.rng_seed, spec=spec)
    if spec.kind == "adjacent_swap":
        return adjacent_swap_attack(text, lexicon, spec.intensity,
                                    spec.rng_seed, spec=spec)
    if spec.kind == "simple_paraphrase":
        return simple_paraphrase_attack(text, lexicon, spec.rng_seed, spec=spec)
    if spec.kind == "plugin":
        if plugin is not None:
            return plugin_attack(text, plugin, spec=spec)
        return plugin_attack(text, spec.plugin_cmd, spec=spec)
    raise ValueError(f"unknown attack kind {spec.kind!r}")


def incremental_run(text: TokenSequence, kind: str, intensities: list[float],
                    seed: int, lexicon: Lexicon,
                    ) -> list[tuple[float, AttackResult]]:
    """Apply one attack kind at each intensity to the original text.

    Steps are independent-from-original but share the seed, so for synonym
    and deletion the edits at a lower intensity are a subset of those at a
    higher one.
    """
    if any(b < a for a, b in zip(intensities, intensities[1:])):
        raise ValueError("intensities must be ascending")
    out = []
    for intensity in intensities:
        spec = AttackSpec(kind, intensity, seed, max_intensity=1.0)
        out.append((intensity, run_attack(text, spec, lexicon)))
    return out


def attack_with_protected_prefix(text: TokenSequence, prefix_len: int,
                                 spec: AttackSpec, lexicon: Lexicon,
                                 plugin: PluginClient | None = None,
                                 ) -> AttackResult:
    """Attack only the tokens after ``prefix_len``, keeping the prefix intact.

    Edit positions are reported in whole-sequence coordinates, so none is
    ever below ``prefix_len``.
    """
    head = text.slice(0, prefix_len)
    tail = text.slice(prefix_len)
    result = run_attack(tail, spec, lexicon, plugin)
    merged = from_surfaces(head.surfaces() + result.attacked.surfaces(),
                           text.vocab)
    shifted = tuple(
        Edit(e.position + prefix_len, e.op, e.before, e.after,
             None if e.position2 is None else e.position2 + prefix_len)
        for e in result.edits
    )
    return AttackResult(merged, spec, shifted)
