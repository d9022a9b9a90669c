"""File reports: delimited data plus rendered figures.

Both report paths write a CSV next to a PNG into a caller-chosen
directory and return the created paths. Rendering uses the Agg backend
so it works headless; everything is sorted so repeated runs produce
identical CSV bytes.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

from .sessionlog import READING, LogRecord
from .stats import StatsReport
from .vitals import VitalKind, canonical_unit


def _ensure_dir(out_dir: str | Path) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_stats_report(stats: StatsReport, out_dir: str | Path) -> list[Path]:
    """occurrences.csv + occurrences.png: per-kind requirement counts."""
    out = _ensure_dir(out_dir)
    ordered = sorted(
        stats.counts.items(), key=lambda item: (-item[1], item[0].value)
    )

    csv_path = out / "occurrences.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["kind", "unit", "count"])
        for kind, count in ordered:
            writer.writerow([kind.value, canonical_unit(kind), count])

    png_path = out / "occurrences.png"
    nonzero = [(kind, count) for kind, count in ordered if count > 0]
    fig, ax = plt.subplots(figsize=(8, max(2.0, 0.35 * max(len(nonzero), 1) + 1)))
    if nonzero:
        labels = [kind.value for kind, _ in reversed(nonzero)]
        values = [count for _, count in reversed(nonzero)]
        ax.barh(labels, values, color="#2a6f97")
        ax.set_xlabel("requirement occurrences")
    else:
        ax.text(0.5, 0.5, "no requirements in corpus", ha="center", va="center")
        ax.set_axis_off()
    ax.set_title("Vital sign occurrences across protocols")
    fig.tight_layout()
    fig.savefig(png_path)
    plt.close(fig)
    return [csv_path, png_path]


def write_replay_report(records: Iterable[LogRecord], out_dir: str | Path) -> list[Path]:
    """readings.csv + vitals.png: every logged reading and its timeline."""
    out = _ensure_dir(out_dir)
    readings = [r for r in records if r.get("type") == READING]

    csv_path = out / "readings.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seq", "ingested_at", "kind", "value", "timestamp", "origin"])
        for r in readings:
            writer.writerow(
                [r["seq"], r["t"], r["kind"], r["value"], r["timestamp"], r["origin"]]
            )

    by_kind: dict[str, list[tuple[int, float]]] = {}
    for r in readings:
        by_kind.setdefault(r["kind"], []).append((r["timestamp"], r["value"]))

    png_path = out / "vitals.png"
    fig, ax = plt.subplots(figsize=(9, 4.5))
    if by_kind:
        for kind_name in sorted(by_kind):
            points = sorted(by_kind[kind_name])
            xs = [t / 1000.0 for t, _ in points]
            ys = [v for _, v in points]
            try:
                unit = canonical_unit(VitalKind(kind_name))
                label = f"{kind_name} [{unit}]"
            except ValueError:
                label = kind_name
            ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=label)
        ax.set_xlabel("session time [s]")
        ax.set_ylabel("value")
        ax.legend(loc="best", fontsize="small")
    else:
        ax.text(0.5, 0.5, "no readings", ha="center", va="center")
        ax.set_axis_off()
    ax.set_title("Ingested vital signs over session time")
    fig.tight_layout()
    fig.savefig(png_path)
    plt.close(fig)
    return [csv_path, png_path]
