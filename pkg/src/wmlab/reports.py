"""Report emission: RFC-4180-style CSV tables, raw NDJSON, a text summary,
and rendered figures.

Numeric presentation follows the tables this lab mirrors: detection scores
and quality averages to 2 decimals, percentages to 1 decimal.  Raw NDJSON
keeps full precision so figures and tables can be regenerated without
re-running attacks.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .figures import render_figures
from .harness import (
    QUALITY_METRICS,
    ExperimentReport,
    config_to_dict,
    records_to_ndjson,
)

DETECTION_CSV = "detection_stats.csv"
QUALITY_CSV = "quality_stats.csv"
INCREMENTAL_CSV = "incremental_series.csv"
RAW_NDJSON = "raw_results.ndjson"
CONFIG_JSON = "run_config.json"
SUMMARY_TXT = "summary.txt"


def _f2(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def _f1(value: float | None) -> str:
    return "" if value is None else f"{value:.1f}"


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_detection_csv(report: ExperimentReport, path: Path) -> None:
    header = ["variant", "success_rate", "mean", "std", "min", "max",
              "median", "n", "n_success", "n_fail", "n_plugin_failure",
              "invalid"]
    rows = []
    for row in report.detection:
        rows.append([
            row.variant, _f1(row.success_rate), _f2(row.mean), _f2(row.std),
            _f2(row.min), _f2(row.max), _f2(row.median), str(row.n),
            str(row.n_success), str(row.n_fail), str(row.n_plugin_failure),
            "1" if row.invalid else "0",
        ])
    _write_csv(path, header, rows)


def write_quality_csv(report: ExperimentReport, path: Path) -> None:
    header = ["variant"]
    for metric in QUALITY_METRICS:
        header += [f"{metric}_avg", f"{metric}_pct_change"]
    rows = []
    for row in report.quality:
        cells = [row.variant]
        for metric in QUALITY_METRICS:
            cells.append(_f2(row.averages.get(metric)))
            cells.append(_f1(row.pct_change.get(metric)))
        rows.append(cells)
    _write_csv(path, header, rows)


def write_incremental_csv(report: ExperimentReport, path: Path) -> None:
    header = ["attack_kind", "intensity", "mean_score", "ci95_half", "n"]
    header += [f"{metric}_mean" for metric in QUALITY_METRICS]
    rows = []
    for row in report.incremental:
        cells = [row.attack_kind, f"{row.intensity:g}", _f2(row.mean_score),
                 _f2(row.ci95_half), str(row.n)]
        cells += [_f2(row.quality_means.get(m)) for m in QUALITY_METRICS]
        rows.append(cells)
    _write_csv(path, header, rows)


def write_summary(report: ExperimentReport, path: Path) -> None:
    lines = [
        f"scheme: {report.config.scheme}",
        f"samples: {report.config.n_samples}",
        f"master seed: {report.config.master_seed}",
        "",
        "detection:",
    ]
    for row in report.detection:
        rate = "  ---" if row.success_rate is None else f"{row.success_rate:5.1f}"
        mean = "  n/a" if row.mean is None else f"{row.mean:8.2f}"
        suffix = "  [invalid: no usable samples]" if row.invalid else ""
        failures = (f"  plugin_failures={row.n_plugin_failure}"
                    if row.n_plugin_failure else "")
        lines.append(
            f"  {row.variant:<28} success%={rate}  mean={mean}{failures}{suffix}")
    lines.append("")
    lines.append("quality (% change vs watermarked reference):")
    for row in report.quality:
        parts = []
        for metric in QUALITY_METRICS:
            avg = row.averages.get(metric)
            if avg is None:
                continue
            pct = row.pct_change.get(metric)
            change = "" if pct is None else f" ({pct:+.1f}%)"
            parts.append(f"{metric}={avg:.2f}{change}")
        lines.append(f"  {row.variant:<28} " + "  ".join(parts))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_tables(report: ExperimentReport, out_dir, figures: bool = True) -> list[Path]:
    """Write every report artifact into ``out_dir`` and return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / DETECTION_CSV
    write_detection_csv(report, path)
    written.append(path)

    path = out / QUALITY_CSV
    write_quality_csv(report, path)
    written.append(path)

    path = out / INCREMENTAL_CSV
    write_incremental_csv(report, path)
    written.append(path)

    path = out / RAW_NDJSON
    path.write_text(records_to_ndjson(report.records), encoding="utf-8")
    written.append(path)

    path = out / CONFIG_JSON
    path.write_text(
        json.dumps(config_to_dict(report.config), indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8")
    written.append(path)

    path = out / SUMMARY_TXT
    write_summary(report, path)
    written.append(path)

    if figures:
        written.extend(render_figures(report, out))
    return written
