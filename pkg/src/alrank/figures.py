"""Render learning-curve and diagnostic figures next to the CSV outputs.

The CSVs remain the machine-readable contract; these PNGs are the
human-readable companion the report path drops alongside them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def _strategy_color(index: int) -> str:
    return _COLORS[index % len(_COLORS)]


def save_learning_curve_figure(summaries_by_strategy: dict, path) -> Path:
    """BLEU vs labeled fraction with shaded bootstrap 95% bands."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for idx, (strategy, rows) in enumerate(sorted(summaries_by_strategy.items())):
        xs = [r.labeled_fraction for r in rows]
        color = _strategy_color(idx)
        ax.plot(xs, [r.bleu_mean for r in rows], marker="x", markersize=4,
                color=color, label=strategy)
        ax.fill_between(xs, [r.bleu_lo for r in rows], [r.bleu_hi for r in rows],
                        color=color, alpha=0.15, linewidth=0)
    ax.set_xlabel("fraction of data labeled")
    ax.set_ylabel("BLEU")
    ax.set_title("Held-out BLEU over the acquisition process")
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_diagnostics_figure(summaries_by_strategy: dict, path) -> Path:
    """Diversity diagnostics: nearest-train distance and clusters per batch."""
    fig, (ax_nn, ax_cl) = plt.subplots(1, 2, figsize=(9.5, 4.0))
    for idx, (strategy, rows) in enumerate(sorted(summaries_by_strategy.items())):
        rounds = [r.round for r in rows]
        color = _strategy_color(idx)
        ax_nn.plot(rounds, [r.mean_nn_dist_mean for r in rows], marker="x",
                   markersize=4, color=color, label=strategy)
        ax_cl.plot(rounds, [r.clusters_selected_mean for r in rows], marker="x",
                   markersize=4, color=color, label=strategy)
    ax_nn.set_xlabel("acquisition round")
    ax_nn.set_ylabel("mean distance to nearest labeled item")
    ax_nn.set_title("Validation coverage")
    ax_nn.grid(alpha=0.25)
    ax_cl.set_xlabel("acquisition round")
    ax_cl.set_ylabel("distinct clusters in batch")
    ax_cl.set_title("Batch diversity")
    ax_cl.grid(alpha=0.25)
    ax_nn.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_run_figures(summaries_by_strategy: dict, out_dir) -> list:
    out_dir = Path(out_dir)
    return [
        save_learning_curve_figure(summaries_by_strategy, out_dir / "curve_bleu.png"),
        save_diagnostics_figure(summaries_by_strategy, out_dir / "diagnostics.png"),
    ]
