"""Figure rendering for the report path.

Every figure is written next to its delimited counterpart (CSV/JSON), so
the numbers stay the primary artifact and the images are a view of them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reversibility import RateMatrix


def save_heatmap(matrix: RateMatrix, path, title: str | None = None) -> Path:
    """Render the token-by-CS reversibility matrix as an annotated heatmap."""
    data = np.array(matrix.values, dtype=float)
    fig, ax = plt.subplots(figsize=(1.8 + 1.4 * len(matrix.cs_modes), 1.4 + 0.9 * len(matrix.its)))
    im = ax.imshow(data, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(matrix.cs_modes)), matrix.cs_modes)
    ax.set_yticks(range(len(matrix.its)), matrix.its)
    ax.set_xlabel("catalyst statement")
    ax.set_ylabel("indicator token")
    ax.set_title(title or f"Reversibility ({matrix.backend})")
    for i in range(len(matrix.its)):
        for j in range(len(matrix.cs_modes)):
            color = "white" if data[i, j] < 0.6 else "black"
            ax.text(j, i, f"{data[i, j]:.4f}", ha="center", va="center", color=color)
    fig.colorbar(im, ax=ax, label="rate")
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_score_histogram(hist: dict[str, int], path, title: str = "Quality score distribution") -> Path:
    """Bar chart of the 0-5 score buckets."""
    labels = list(hist)
    counts = [hist[k] for k in labels]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(len(labels)), counts, color="#348ABD")
    ax.set_xticks(range(len(labels)), labels)
    ax.set_xlabel("score range")
    ax.set_ylabel("data points")
    ax.set_title(title)
    for i, c in enumerate(counts):
        ax.text(i, c, str(c), ha="center", va="bottom")
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_pairwise_tallies(tallies: dict[str, int], path, title: str = "Pairwise verdicts") -> Path:
    """Bar chart of canonical pairwise verdict counts."""
    labels = list(tallies)
    counts = [tallies[k] for k in labels]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(range(len(labels)), counts, color=["#E24A33", "#348ABD", "#777777"][: len(labels)])
    ax.set_xticks(range(len(labels)), labels)
    ax.set_ylabel("wins")
    ax.set_title(title)
    for i, c in enumerate(counts):
        ax.text(i, c, str(c), ha="center", va="bottom")
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path
