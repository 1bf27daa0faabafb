"""Command-line interface.

Subcommands: generate (watermarked text from prompts), detect (score a
text file), attack (apply one attack), run (full experiment), report
(re-emit tables and figures from saved raw results).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import wm_signature
from .attacks import ATTACK_KINDS, AttackSpec, run_attack
from .corpus import generate, tokenize
from .harness import (
    ExperimentConfig,
    SignatureRunner,
    build_workspace,
    config_to_dict,
    load_config,
    load_report,
    make_runner,
    run_experiment,
)
from .plugin import PluginError
from .prf import derive_seed
from .reports import emit_tables


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "scheme", None):
        overrides["scheme"] = args.scheme
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "plugin", None):
        extra = tuple(AttackSpec("plugin", plugin_cmd=cmd)
                      for cmd in args.plugin)
        overrides["attacks"] = config.attacks + extra
    return replace(config, **overrides) if overrides else config


def cmd_generate(args) -> int:
    config = _config(args)
    ws = build_workspace(config)
    runner = make_runner(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = args.n or config.n_samples
    meta_lines = []
    for index in range(count):
        seed = derive_seed(config.master_seed, index)
        key, prompt_text = ws.prompts.entries[index % len(ws.prompts)]
        prompt = tokenize(prompt_text, ws.vocab)
        if isinstance(runner, SignatureRunner):
            full = wm_signature.embed(runner.params, ws.lm, prompt,
                                      config.length, derive_seed(seed, 0))
        else:
            full = generate(ws.lm, prompt, config.length,
                            sampler=runner.sampler(ws),
                            rng_seed=derive_seed(seed, 0))
        text = full.slice(len(prompt))
        path = out / f"watermarked_{index:03d}.txt"
        path.write_text(text.surface() + "\n", encoding="utf-8")
        score, decision = runner.score(text)
        meta_lines.append(json.dumps(
            {"sample": index, "prompt_key": key, "file": path.name,
             "score": score, "decision": decision}, sort_keys=True))
    (out / "meta.ndjson").write_text("\n".join(meta_lines) + "\n",
                                     encoding="utf-8")
    print(f"wrote {count} watermarked texts to {out}")
    return 0


def cmd_detect(args) -> int:
    config = _config(args)
    ws = build_workspace(config)
    runner = make_runner(config)
    raw = Path(args.file).read_text(encoding="utf-8")
    text = tokenize(raw, ws.vocab)
    try:
        score, decision = runner.score(text)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"scheme": config.scheme, "score": score,
                      "decision": decision, "tokens": len(text)},
                     sort_keys=True))
    return 0


def cmd_attack(args) -> int:
    config = _config(args)
    ws = build_workspace(config)
    spec = AttackSpec(args.kind, args.intensity, args.seed or 0,
                      plugin_cmd=args.plugin_cmd,
                      max_intensity=args.max_intensity)
    raw = Path(args.file).read_text(encoding="utf-8")
    text = tokenize(raw, ws.vocab)
    try:
        result = run_attack(text, spec, ws.lexicon)
    except PluginError as exc:
        print(f"plugin failure: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.write_text(result.attacked.surface() + "\n", encoding="utf-8")
    edits_path = out.with_suffix(out.suffix + ".edits.ndjson")
    edits_path.write_text(
        "".join(json.dumps(asdict(e), sort_keys=True) + "\n"
                for e in result.edits),
        encoding="utf-8")
    print(f"{len(result.edits)} edits -> {out}")
    return 0


def cmd_run(args) -> int:
    config = _config(args)
    report = run_experiment(config)
    out = args.out or "wmlab_out"
    written = emit_tables(report, out, figures=not args.no_figures)
    for path in written:
        print(path)
    return 0


def cmd_report(args) -> int:
    report = load_report(args.run_dir)
    written = emit_tables(report, args.out or args.run_dir,
                          figures=not args.no_figures)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wmlab",
        description="Watermark robustness lab: embed, attack, detect, report.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, workers=False):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--scheme", choices=("unigram", "tournament", "signature"))
        p.add_argument("--seed", type=int, help="master seed override")
        if workers:
            p.add_argument("--workers", type=int)
            p.add_argument("--plugin", action="append", default=[],
                           help="plugin attack command (repeatable)")

    p = sub.add_parser("generate", help="generate watermarked text from prompts")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, help="number of samples")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", help="score a text file")
    common(p)
    p.add_argument("file")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("attack", help="apply one attack to a text file")
    common(p)
    p.add_argument("file")
    p.add_argument("--kind", required=True, choices=ATTACK_KINDS)
    p.add_argument("--intensity", type=float, default=0.0)
    p.add_argument("--max-intensity", type=float, default=None,
                   help="override the default intensity ceiling")
    p.add_argument("--plugin-cmd", help="command for kind=plugin")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("run", help="run a full experiment")
    common(p, workers=True)
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-emit tables from saved raw results")
    p.add_argument("run_dir")
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
