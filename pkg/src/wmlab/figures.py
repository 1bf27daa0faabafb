"""Figure rendering for the report path.

Two figures accompany the delimited output: violin plots of the detection
score distribution per text variant, and incremental intensity curves with
95% confidence bands.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import ExperimentReport

VIOLIN_PNG = "detection_violin.png"
INCREMENTAL_PNG = "incremental_detection.png"


def _score_arrays(report: ExperimentReport) -> dict[str, list[float]]:
    arrays: dict[str, list[float]] = {}
    for record in report.records:
        if record.kind in ("reference", "control", "attack") \
                and record.score is not None:
            arrays.setdefault(record.variant, []).append(record.score)
    return arrays


def plot_score_violin(report: ExperimentReport, path: Path) -> bool:
    arrays = _score_arrays(report)
    labels = [v for v, scores in arrays.items() if len(scores) >= 2]
    if not labels:
        return False
    fig, ax = plt.subplots(figsize=(max(6, 1.1 * len(labels)), 4.5))
    ax.violinplot([arrays[v] for v in labels], showmedians=True)
    ax.set_xticks(range(1, len(labels) + 1))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(f"{report.config.scheme} detection score")
    ax.set_title("Detection score distribution by variant")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def plot_incremental(report: ExperimentReport, path: Path) -> bool:
    rows = [r for r in report.incremental if r.mean_score is not None]
    if not rows:
        return False
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for kind in dict.fromkeys(r.attack_kind for r in rows):
        series = [r for r in rows if r.attack_kind == kind]
        x = np.array([r.intensity for r in series])
        y = np.array([r.mean_score for r in series])
        ci = np.array([r.ci95_half or 0.0 for r in series])
        ax.plot(x, y, marker="o", label=kind)
        ax.fill_between(x, y - ci, y + ci, alpha=0.2)
    ax.set_xlabel("modification intensity")
    ax.set_ylabel(f"mean {report.config.scheme} detection score")
    ax.set_title("Incremental attack intensity vs detection (95% CI)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def render_figures(report: ExperimentReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    written = []
    path = out / VIOLIN_PNG
    if plot_score_violin(report, path):
        written.append(path)
    path = out / INCREMENTAL_PNG
    if plot_incremental(report, path):
        written.append(path)
    return written
