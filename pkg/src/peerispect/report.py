"""Render sweep results as figures next to the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import MetricsRow  # noqa: E402

_STRATEGY_LABELS = {
    "bm25": "BM25",
    "dense": "Dense",
    "dense_rerank": "Dense + Reranker",
    "sparse_rerank": "Sparse + Reranker",
}


def render_metrics_figure(rows: list[MetricsRow], path: str | Path) -> Path:
    """Grouped bar chart of accuracy (and recall when present) per
    strategy, one bar series per model. Failed cells are skipped."""
    rows = [r for r in rows if r.error is None and r.accuracy is not None]
    if not rows:
        raise ValueError("no successful metric rows to plot")

    models = list(dict.fromkeys(r.model_name for r in rows))
    strategies = list(dict.fromkeys(r.strategy.kind.value for r in rows))
    has_recall = any(r.recall_at_k is not None for r in rows)

    def cell(model: str, strategy: str, attr: str):
        for r in rows:
            if r.model_name == model and r.strategy.kind.value == strategy:
                return getattr(r, attr)
        return None

    n_panels = 2 if has_recall else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(5.5 * n_panels, 3.6), squeeze=False)
    panels = [("accuracy", "Accuracy")]
    if has_recall:
        panels.append(("recall_at_k", "Retrieval recall"))

    width = 0.8 / max(1, len(models))
    x_base = range(len(strategies))
    for ax, (attr, title) in zip(axes[0], panels):
        for mi, model in enumerate(models):
            values = [cell(model, s, attr) for s in strategies]
            xs = [x + mi * width for x in x_base]
            ax.bar(
                xs,
                [v if v is not None else 0.0 for v in values],
                width=width,
                label=model,
            )
        ax.set_xticks([x + width * (len(models) - 1) / 2 for x in x_base])
        ax.set_xticklabels(
            [_STRATEGY_LABELS.get(s, s) for s in strategies], rotation=20, ha="right"
        )
        ax.set_ylim(0.0, 1.05)
        ax.set_ylabel(title)
        ax.grid(axis="y", alpha=0.3)
    axes[0][0].legend(fontsize=8)

    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
