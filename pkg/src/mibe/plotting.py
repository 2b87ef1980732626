"""Figures for the cost-profile report."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from mibe.metering import ProfileRow  # noqa: E402

OPS = ("M", "P", "E")


def figure_size(width: float = 8.0, height: float | None = None) -> tuple[float, float]:
    golden = (math.sqrt(5) - 1.0) / 2.0
    return width, height or width * golden


def plot_profile(rows: list[ProfileRow], path: str | Path) -> Path:
    """Grouped bars of measured vs published M/P/E counts, one panel per phase."""
    path = Path(path)
    phases = list(dict.fromkeys(r.phase for r in rows))
    fig, axes = plt.subplots(1, max(len(phases), 1), figsize=figure_size(4.0 * max(len(phases), 1), 3.6), squeeze=False)
    for ax, phase in zip(axes[0], phases):
        series = [(f"{r.scheme}", r.counter.as_dict()) for r in rows if r.phase == phase]
        published = next((r.published for r in rows if r.phase == phase and r.published is not None), None)
        if published is not None:
            series.append(("published", published))
        width = 0.8 / len(series)
        for i, (label, counts) in enumerate(series):
            xs = [j + i * width for j in range(len(OPS))]
            ax.bar(xs, [counts.get(op, 0) for op in OPS], width, label=label)
        ax.set_xticks([j + 0.4 - width / 2 for j in range(len(OPS))])
        ax.set_xticklabels(OPS)
        ax.set_title(phase)
        ax.set_ylabel("operations")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
