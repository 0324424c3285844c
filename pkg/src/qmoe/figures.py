"""Figure rendering for the reporting commands.

Every report path that writes a delimited file also drops a PNG next to
it. Rendering is forced onto the Agg backend and savefig metadata is
pinned, so reruns produce byte-identical files and the determinism
guarantees of the CLI extend to the figures.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_SAVE_KW = dict(dpi=150, metadata={"Software": "qmoe"})

plt.rcParams.update({
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
})


def metric_bars(means: dict[str, float], path: str | Path, title: str = "") -> Path:
    """Bar chart of metric means for one run."""
    path = Path(path)
    names = list(means)
    values = [means[n] for n in names]
    fig, ax = plt.subplots()
    bars = ax.bar(range(len(names)), values, color="#4878b0")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("mean")
    if title:
        ax.set_title(title)
    for bar, v in zip(bars, values):
        ax.text(bar.get_x() + bar.get_width() / 2, v + 0.01, f"{v:.3f}",
                ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def per_query_histogram(values: list[float], metric_name: str,
                        path: str | Path) -> Path:
    """Distribution of one metric across queries."""
    path = Path(path)
    fig, ax = plt.subplots()
    ax.hist(values, bins=20, range=(0.0, 1.0), color="#4878b0", edgecolor="white")
    ax.set_xlabel(metric_name)
    ax.set_ylabel("queries")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def comparison_bars(rows: list[tuple[str, float, float, bool]], label_a: str,
                    label_b: str, path: str | Path) -> Path:
    """Side-by-side metric means for two runs; '*' marks a significant
    difference. Rows are (metric, mean_a, mean_b, significant)."""
    path = Path(path)
    names = [r[0] for r in rows]
    a = [r[1] for r in rows]
    b = [r[2] for r in rows]
    x = range(len(rows))
    width = 0.38
    fig, ax = plt.subplots()
    ax.bar([i - width / 2 for i in x], a, width, label=label_a, color="#4878b0")
    ax.bar([i + width / 2 for i in x], b, width, label=label_b, color="#e0883a")
    for i, (_, va, vb, sig) in enumerate(rows):
        if sig:
            ax.text(i, max(va, vb) + 0.02, "*", ha="center", fontsize=13)
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("mean")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def training_curves(logs, path: str | Path) -> Path:
    """Train/validation loss trajectories from the epoch log."""
    path = Path(path)
    epochs = [log.epoch for log in logs]
    fig, ax = plt.subplots()
    ax.plot(epochs, [log.train_total for log in logs], label="train total",
            color="#4878b0")
    ax.plot(epochs, [log.val_total for log in logs], label="validation total",
            color="#e0883a")
    ax.plot(epochs, [log.train_contrastive for log in logs],
            label="train contrastive", color="#4878b0", linestyle="--", alpha=0.6)
    ax.plot(epochs, [log.train_bce for log in logs], label="train cross-entropy",
            color="#4878b0", linestyle=":", alpha=0.6)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path
