"""wmlab: a watermarking robustness laboratory.

Embeds and detects three classes of text watermarks over deterministic toy
language models, attacks the watermarked text with semantic-preserving
transformations, and reports watermark removal alongside text-quality
degradation.
"""

__version__ = "0.1.0"

from .attacks import AttackResult, AttackSpec, Lexicon
from .corpus import (
    HashLM,
    NgramLM,
    PromptSet,
    TokenSequence,
    Vocabulary,
    generate,
    load_prompts,
    tokenize,
)
from .harness import ExperimentConfig, ExperimentReport, run_experiment
from .reports import emit_tables

__all__ = [
    "AttackResult",
    "AttackSpec",
    "ExperimentConfig",
    "ExperimentReport",
    "HashLM",
    "Lexicon",
    "NgramLM",
    "PromptSet",
    "TokenSequence",
    "Vocabulary",
    "emit_tables",
    "generate",
    "load_prompts",
    "run_experiment",
    "tokenize",
]
