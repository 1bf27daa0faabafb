"""Experiment orchestration: generate watermarked/control text per prompt,
run the attack catalog and incremental grids, and aggregate detection and
quality statistics into report tables.

Reproducibility contract: every output byte is a pure function of the
config and master seed.  Per-sample seeds are PRF-derived from the master
seed and sample index, so serial and parallel runs agree; aggregation is a
fold over sample index order regardless of completion order.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import attacks as atk
from . import wm_signature, wm_tournament, wm_unigram
from .attacks import AttackResult, AttackSpec, Lexicon
from .corpus import (
    HashLM,
    NgramLM,
    PromptSet,
    TokenSequence,
    Vocabulary,
    default_corpus_text,
    default_prompts,
    default_vocabulary,
    generate,
    load_prompts,
    tokenize,
)
from .plugin import PluginClient, PluginError
from .prf import derive_seed
from .quality import QualityReport, quality_report

SCHEMES = ("unigram", "tournament", "signature")


@dataclass(frozen=True)
class LMConfig:
    backend: str = "hash_lm"
    order: int = 3
    temperature: float = 1.0
    seed: int = 7
    corpus: str | None = None  # training text path for ngram_lm

    def __post_init__(self) -> None:
        if self.backend not in ("hash_lm", "ngram_lm"):
            raise ValueError(f"unknown LM backend {self.backend!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str = "unigram"
    n_samples: int = 10
    master_seed: int = 0
    length: int = 300
    workers: int = 1
    prompts: str | None = None
    wordlist: str | None = None
    lexicon: str | None = None
    function_words: str | None = None
    lm: LMConfig = LMConfig()
    scheme_params: tuple[tuple[str, object], ...] = ()
    attacks: tuple[AttackSpec, ...] = ()
    incremental_kinds: tuple[str, ...] = ()
    incremental_grid: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        grid = self.incremental_grid
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("incremental grid must be ascending")

    @property
    def params_dict(self) -> dict:
        return dict(self.scheme_params)


def _derive_key(master_seed: int, label: str) -> bytes:
    seed = (master_seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big")
    return hashlib.sha256(b"wmlab-key:" + label.encode() + seed).digest()


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    lm = LMConfig(**raw.pop("lm", {}))
    specs = tuple(AttackSpec(**entry) for entry in raw.pop("attacks", []))
    incremental = raw.pop("incremental", {})
    params = raw.pop("scheme_params", {})
    return ExperimentConfig(
        lm=lm,
        attacks=specs,
        scheme_params=tuple(sorted(params.items())),
        incremental_kinds=tuple(incremental.get("kinds", ())),
        incremental_grid=tuple(incremental.get("grid", ())),
        **raw,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def config_to_dict(config: ExperimentConfig) -> dict:
    raw = asdict(config)
    raw["lm"] = asdict(config.lm)
    raw["attacks"] = [asdict(s) for s in config.attacks]
    raw["scheme_params"] = dict(config.scheme_params)
    raw["incremental"] = {
        "kinds": list(raw.pop("incremental_kinds")),
        "grid": list(raw.pop("incremental_grid")),
    }
    return raw


@dataclass(frozen=True)
class Workspace:
    vocab: Vocabulary
    lexicon: Lexicon
    prompts: PromptSet
    lm: HashLM | NgramLM


@lru_cache(maxsize=8)
def build_workspace(config: ExperimentConfig) -> Workspace:
    vocab = (Vocabulary.from_file(config.wordlist) if config.wordlist
             else default_vocabulary())
    if config.lexicon and config.function_words:
        lexicon = Lexicon.load(config.lexicon, config.function_words)
    else:
        lexicon = atk.default_lexicon()
    prompts = load_prompts(config.prompts) if config.prompts else default_prompts()
    if config.lm.backend == "hash_lm":
        lm = HashLM(vocab, order=config.lm.order, seed=config.lm.seed,
                    temperature=config.lm.temperature)
    else:
        if config.lm.corpus:
            with open(config.lm.corpus, encoding="utf-8") as fh:
                corpus_text = fh.read()
        else:
            corpus_text = default_corpus_text()
        lm = NgramLM(vocab, corpus_text, order=config.lm.order)
    return Workspace(vocab, lexicon, prompts, lm)


class SchemeRunner:
    """Scheme-specific generation, detection, and attack-success accounting."""

    protected_prefix = 0

    def generate_watermarked(self, ws, length, rng_seed) -> TokenSequence:
        raise NotImplementedError

    def score(self, text: TokenSequence) -> tuple[float, bool]:
        """(detection score, detected decision)."""
        raise NotImplementedError

    def attack_succeeded(self, score: float) -> bool:
        raise NotImplementedError


class UnigramRunner(SchemeRunner):
    def __init__(self, config: ExperimentConfig):
        p = config.params_dict
        key = bytes.fromhex(p["key"]) if "key" in p else \
            _derive_key(config.master_seed, "unigram")
        self.params = wm_unigram.UnigramParams(
            key=key,
            gamma=float(p.get("gamma", 0.5)),
            delta=float(p.get("delta", 2.0)),
            z_threshold=float(p.get("z_threshold", 0.0)),
        )

    def sampler(self, ws):
        return wm_unigram.watermarked_sampler(self.params, ws.vocab)

    def score(self, text):
        det = wm_unigram.detect(self.params, text)
        return det.z, det.decision

    def attack_succeeded(self, score):
        # Success rule: z below 0, independent of any deployment threshold.
        return score < 0.0


class TournamentRunner(SchemeRunner):
    def __init__(self, config: ExperimentConfig):
        p = config.params_dict
        key = bytes.fromhex(p["key"]) if "key" in p else \
            _derive_key(config.master_seed, "tournament")
        self.params = wm_tournament.TournamentParams(
            key=key,
            m=int(p.get("m", 2)),
            layers=int(p.get("layers", 1)),
            context_width=int(p.get("context_width", 4)),
            g_threshold=float(p.get("g_threshold", 0.5)),
        )

    def sampler(self, ws):
        return wm_tournament.tournament_sampler(self.params)

    def score(self, text):
        det = wm_tournament.detect(self.params, text)
        return det.mean_g, det.decision

    def attack_succeeded(self, score):
        return score < self.params.g_threshold


class SignatureRunner(SchemeRunner):
    def __init__(self, config: ExperimentConfig):
        p = config.params_dict
        seed = bytes.fromhex(p["signature_seed"]) if "signature_seed" in p \
            else _derive_key(config.master_seed, "signature")
        self.params = wm_signature.SignatureParams.from_seed(
            seed,
            seg_len=int(p.get("seg_len", 16)),
            repetition=int(p.get("repetition", 3)),
            max_rejects=int(p.get("max_rejects", 64)),
        )
        self.protected_prefix = self.params.seg_len

    def score(self, text):
        det = wm_signature.detect(self.params.public(), text)
        return float(det.decision), det.decision

    def attack_succeeded(self, score):
        return score < 0.5


def make_runner(config: ExperimentConfig) -> SchemeRunner:
    if config.scheme == "unigram":
        return UnigramRunner(config)
    if config.scheme == "tournament":
        return TournamentRunner(config)
    return SignatureRunner(config)


@dataclass(frozen=True)
class Record:
    """One scored text variant of one sample; the raw-results unit."""

    sample: int
    variant: str          # watermarked | unwatermarked | attack label
    kind: str             # reference | control | attack | incremental
    score: float | None
    decision: bool | None
    success: bool | None
    tokens: int
    intensity: float | None = None
    attack_kind: str | None = None
    plugin_failure: bool = False
    quality: dict | None = None


def _quality_dict(report: QualityReport) -> dict:
    return asdict(report)


_plugin_cache: dict[str, PluginClient] = {}


def _plugin_for(cmd: str) -> PluginClient:
    client = _plugin_cache.get(cmd)
    if client is None or not client.alive():
        client = PluginClient(cmd)
        _plugin_cache[cmd] = client
    return client


def _apply_attack(watermarked: TokenSequence, spec: AttackSpec,
                  ws: Workspace, prefix: int) -> AttackResult:
    plugin = None
    if spec.kind == "plugin":
        plugin = _plugin_for(spec.plugin_cmd)
    if prefix > 0:
        return atk.attack_with_protected_prefix(watermarked, prefix, spec,
                                                ws.lexicon, plugin)
    return atk.run_attack(watermarked, spec, ws.lexicon, plugin)


def run_sample(config: ExperimentConfig, index: int) -> list[Record]:
    """Generate, attack, and score one sample; pure in (config, index)."""
    ws = build_workspace(config)
    runner = make_runner(config)
    seed = derive_seed(config.master_seed, index)
    key, prompt_text = ws.prompts.entries[index % len(ws.prompts)]
    prompt = tokenize(prompt_text, ws.vocab)

    if isinstance(runner, SignatureRunner):
        wm_full = wm_signature.embed(runner.params, ws.lm, prompt,
                                     config.length, derive_seed(seed, 0))
    else:
        wm_full = generate(ws.lm, prompt, config.length,
                           sampler=runner.sampler(ws),
                           rng_seed=derive_seed(seed, 0))
    control_full = generate(ws.lm, prompt, config.length,
                            rng_seed=derive_seed(seed, 1))
    watermarked = wm_full.slice(len(prompt))
    control = control_full.slice(len(prompt))

    records: list[Record] = []

    def scored(variant, kind, text, *, intensity=None, attack_kind=None,
               success_rule=False) -> Record:
        score, decision = runner.score(text)
        quality = _quality_dict(quality_report(text, watermarked, ws.lexicon))
        return Record(
            sample=index, variant=variant, kind=kind, score=score,
            decision=decision,
            success=runner.attack_succeeded(score) if success_rule else None,
            tokens=len(text), intensity=intensity, attack_kind=attack_kind,
            quality=quality,
        )

    records.append(scored("watermarked", "reference", watermarked))
    records.append(scored("unwatermarked", "control", control))

    for ai, spec in enumerate(config.attacks):
        spec_i = replace(spec, rng_seed=derive_seed(seed, 100 + ai))
        try:
            result = _apply_attack(watermarked, spec_i, ws,
                                   runner.protected_prefix)
            records.append(scored(spec.label, "attack", result.attacked,
                                  intensity=spec.intensity,
                                  attack_kind=spec.kind, success_rule=True))
        except PluginError:
            records.append(Record(
                sample=index, variant=spec.label, kind="attack", score=None,
                decision=None, success=None, tokens=0,
                intensity=spec.intensity, attack_kind=spec.kind,
                plugin_failure=True,
            ))

    for ki, kind in enumerate(config.incremental_kinds):
        inc_seed = derive_seed(seed, 1000 + ki)
        target = watermarked
        if runner.protected_prefix > 0:
            for intensity in config.incremental_grid:
                spec = AttackSpec(kind, intensity, inc_seed, max_intensity=1.0)
                result = atk.attack_with_protected_prefix(
                    target, runner.protected_prefix, spec, ws.lexicon)
                records.append(scored(f"{kind}@{intensity:g}", "incremental",
                                      result.attacked, intensity=intensity,
                                      attack_kind=kind, success_rule=True))
        else:
            for intensity, result in atk.incremental_run(
                    target, kind, list(config.incremental_grid), inc_seed,
                    ws.lexicon):
                records.append(scored(f"{kind}@{intensity:g}", "incremental",
                                      result.attacked, intensity=intensity,
                                      attack_kind=kind, success_rule=True))
    return records


def _run_sample_task(args: tuple[ExperimentConfig, int]) -> list[Record]:
    return run_sample(*args)


@dataclass(frozen=True)
class DetectionRow:
    variant: str
    success_rate: float | None
    mean: float | None
    std: float | None
    min: float | None
    max: float | None
    median: float | None
    n: int
    n_success: int
    n_fail: int
    n_plugin_failure: int
    invalid: bool = False


@dataclass(frozen=True)
class QualityRow:
    variant: str
    averages: dict[str, float | None]
    pct_change: dict[str, float | None]


@dataclass(frozen=True)
class IncrementalRow:
    attack_kind: str
    intensity: float
    mean_score: float | None
    ci95_half: float | None
    n: int
    quality_means: dict[str, float | None]


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    records: tuple[Record, ...]
    detection: tuple[DetectionRow, ...]
    quality: tuple[QualityRow, ...]
    incremental: tuple[IncrementalRow, ...]


QUALITY_METRICS = ("bert_f1", "fog", "flesch", "errors", "rouge1_f", "rougeL_f")


def _stats(scores: list[float]) -> dict:
    arr = np.asarray(scores, dtype=float)
    return {
        "mean": float(arr.mean()),
        "std": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
        "min": float(arr.min()),
        "max": float(arr.max()),
        "median": float(np.median(arr)),
    }


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def _quality_means(records: list[Record]) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    for metric in QUALITY_METRICS:
        values = [r.quality[metric] for r in records
                  if r.quality and r.quality.get(metric) is not None]
        out[metric] = _mean_or_none(values)
    return out


def aggregate(config: ExperimentConfig,
              records: list[Record]) -> ExperimentReport:
    by_variant: dict[str, list[Record]] = {}
    order: list[str] = []
    for record in records:
        if record.kind in ("reference", "control", "attack"):
            if record.variant not in by_variant:
                order.append(record.variant)
            by_variant.setdefault(record.variant, []).append(record)

    detection: list[DetectionRow] = []
    quality_rows: list[QualityRow] = []
    ref_means = _quality_means(by_variant.get("watermarked", []))
    for variant in order:
        rows = by_variant[variant]
        ok = [r for r in rows if not r.plugin_failure]
        failures = len(rows) - len(ok)
        scores = [r.score for r in ok if r.score is not None]
        is_attack = rows[0].kind == "attack"
        invalid = is_attack and not ok
        stats = _stats(scores) if scores else dict.fromkeys(
            ("mean", "std", "min", "max", "median"))
        n_success = sum(bool(r.success) for r in ok)
        detection.append(DetectionRow(
            variant=variant,
            success_rate=(100.0 * n_success / len(ok)
                          if is_attack and ok else None),
            n=len(rows), n_success=n_success,
            n_fail=len(ok) - n_success if is_attack else 0,
            n_plugin_failure=failures,
            invalid=invalid,
            **stats,
        ))
        means = _quality_means(ok)
        pct: dict[str, float | None] = {}
        for metric in QUALITY_METRICS:
            ref = ref_means.get(metric)
            avg = means.get(metric)
            if variant == "watermarked" or ref in (None, 0.0) or avg is None:
                pct[metric] = None
            else:
                pct[metric] = 100.0 * (avg - ref) / ref
        quality_rows.append(QualityRow(variant, means, pct))

    incremental: list[IncrementalRow] = []
    inc = [r for r in records if r.kind == "incremental"]
    for kind in config.incremental_kinds:
        for intensity in config.incremental_grid:
            cell = [r for r in inc
                    if r.attack_kind == kind and r.intensity == intensity]
            scores = [r.score for r in cell if r.score is not None]
            mean = _mean_or_none(scores)
            ci = None
            if len(scores) > 1:
                ci = 1.96 * float(np.std(scores, ddof=1)) / np.sqrt(len(scores))
            elif len(scores) == 1:
                ci = 0.0
            incremental.append(IncrementalRow(
                attack_kind=kind, intensity=intensity, mean_score=mean,
                ci95_half=ci, n=len(scores),
                quality_means=_quality_means(cell),
            ))

    return ExperimentReport(config, tuple(records), tuple(detection),
                            tuple(quality_rows), tuple(incremental))


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    indices = list(range(config.n_samples))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            per_sample = list(pool.map(
                _run_sample_task, [(config, i) for i in indices],
                chunksize=max(1, len(indices) // (4 * config.workers))))
    else:
        per_sample = [run_sample(config, i) for i in indices]
    records = [record for sample in per_sample for record in sample]
    return aggregate(config, records)


def records_to_ndjson(records) -> str:
    lines = [json.dumps(asdict(r), sort_keys=True) for r in records]
    return "\n".join(lines) + "\n" if lines else ""


def records_from_ndjson(text: str) -> list[Record]:
    out = []
    for line in text.splitlines():
        if line.strip():
            out.append(Record(**json.loads(line)))
    return out


def load_report(run_dir) -> ExperimentReport:
    """Rebuild a report from a run directory's saved config and raw results."""
    run_dir = Path(run_dir)
    config = load_config(run_dir / "run_config.json")
    records = records_from_ndjson(
        (run_dir / "raw_results.ndjson").read_text(encoding="utf-8"))
    return aggregate(config, records)
