"""Figure rendering for the report tables (headless, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_YLABEL = {"f1": "F1 (%)", "eo": "equal opportunity (%)",
           "spd": "statistical parity difference (%)"}


def metric_bars(table, path, dpi: int = 150) -> None:
    """Grouped per-label bars with one color per cell and std error bars."""
    n_groups = len(table.columns)
    n_rows = len(table.rows)
    x = np.arange(n_groups)
    width = 0.8 / max(n_rows, 1)
    fig, ax = plt.subplots(figsize=(1.6 + 1.1 * n_groups, 4.0))
    for i, row in enumerate(table.rows):
        ax.bar(x + (i - (n_rows - 1) / 2) * width, 100 * row.mean,
               width=width, yerr=100 * row.std, capsize=2, label=row.label)
    ax.set_xticks(x)
    ax.set_xticklabels(table.columns)
    ax.set_ylabel(_YLABEL.get(table.kind, f"{table.kind} (%)"))
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def ablation_heatmap(table, path, dpi: int = 150) -> None:
    """Average-F1 heatmap over the loss-weight grid."""
    alphas = sorted({row.alpha for row in table.rows})
    betas = sorted({row.beta for row in table.rows})
    grid = np.full((len(alphas), len(betas)), np.nan)
    for row in table.rows:
        grid[alphas.index(row.alpha), betas.index(row.beta)] = 100 * row.mean[-1]
    fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(betas), 1.5 + 1.0 * len(alphas)))
    im = ax.imshow(grid, cmap="viridis")
    for i in range(len(alphas)):
        for j in range(len(betas)):
            if not np.isnan(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.1f}", ha="center", va="center",
                        color="white", fontsize=9)
    ax.set_xticks(range(len(betas)), [f"{b:g}" for b in betas])
    ax.set_yticks(range(len(alphas)), [f"{a:g}" for a in alphas])
    ax.set_xlabel("beta (paired alignment weight)")
    ax.set_ylabel("alpha (discrepancy weight)")
    fig.colorbar(im, ax=ax, label="avg F1 (%)")
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def history_curves(history_rows, path, dpi: int = 150) -> None:
    """Loss trajectories from a training history."""
    fig, ax = plt.subplots(figsize=(7, 4))
    iters = [r["iter"] for r in history_rows]
    for key in ("L1", "L2", "L3", "dis", "pm2"):
        ax.plot(iters, [r[key] for r in history_rows], label=key, linewidth=0.9)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
