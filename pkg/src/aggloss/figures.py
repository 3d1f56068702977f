"""Figure rendering for harness reports.

Every bench/simulate report directory gets PNG figures next to its CSVs:
pairwise-matrix heatmaps, the k*-vs-improvement scatter, and the
accuracy-vs-corruption-level curves with the majority baseline dotted in.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import ComparisonMatrix, SweepRow


def save_matrix_heatmap(matrix: ComparisonMatrix, path, which: str = "significant") -> None:
    """Heatmap of pairwise win fractions (row = baseline, column = challenger)."""
    grid = matrix.significant if which == "significant" else matrix.improve2
    m = len(matrix.methods)
    fig, ax = plt.subplots(figsize=(1.1 * m + 1.8, 1.1 * m + 1.2))
    shown = np.ma.masked_invalid(grid)
    im = ax.imshow(shown, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(m), matrix.methods, rotation=45, ha="right")
    ax.set_yticks(range(m), matrix.methods)
    ax.set_xlabel("outperforming method")
    ax.set_ylabel("baseline method")
    title = ("significant wins (p <= 0.05)" if which == "significant"
             else ">= 2 point wins")
    ax.set_title(f"fraction of {matrix.n_datasets} datasets, {title}")
    for i in range(m):
        for j in range(m):
            if i != j:
                ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center",
                        fontsize=9)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_kstar_scatter(rows, path) -> None:
    """Improvement over the average loss vs the selected k*/n ratio."""
    fig, ax = plt.subplots(figsize=(5, 4))
    if rows:
        xs = [r["k_star_ratio"] for r in rows]
        ys = [r["delta_accuracy"] for r in rows]
        ax.scatter(xs, ys, alpha=0.8)
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("selected k* / n")
    ax.set_ylabel("test-accuracy gain over average")
    ax.set_title("decaying-k gains vs selected k*")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_curves(rows: list[SweepRow], corruption: str, path) -> None:
    """Per-method accuracy against corruption level, majority baseline dotted."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    methods = sorted({r.method for r in rows})
    for method in methods:
        pts = sorted((r.level, r.mean_test_accuracy)
                     for r in rows if r.method == method)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=method)
    base = sorted({(r.level, r.majority_baseline) for r in rows})
    ax.plot([p[0] for p in base], [p[1] for p in base], linestyle=":",
            color="black", label="majority class")
    ax.set_xlabel(f"{corruption} level")
    ax.set_ylabel("mean test accuracy")
    ax.set_title(f"robustness to {corruption}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trace_plot(epochs, values, path, ylabel: str = "aggregate loss") -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(epochs, values)
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
