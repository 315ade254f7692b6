"""Figures for benchmark reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import CURVE_T, cumulative_curve  # noqa: E402


def plot_cumulative(series: dict, path, title: str | None = None) -> str:
    """Cumulative IoU curves, one line per entry of ``{label: ious}``, saved to `path`."""
    fig, ax = plt.subplots(figsize=(4.5, 3.5), dpi=120)
    for label, ious in series.items():
        curve = cumulative_curve(np.asarray(ious, dtype=float))
        ax.plot(CURVE_T, curve, marker="o", ms=3, label=f"{label} (mean {np.mean(ious):.2f})")
    ax.set_xlabel("IoU threshold")
    ax.set_ylabel("fraction of cases")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower left", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return str(path)
