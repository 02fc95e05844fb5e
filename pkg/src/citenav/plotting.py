"""Figure rendering for the CLI report paths.

Figures are written next to the delimited outputs; everything uses the
Agg backend so runs work headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_sweep_curve(curve, path: str | Path, title: str = "Citation budget sweep") -> None:
    """Mean recall as a function of the retained-document budget k_d."""
    k_ds = [point.k_d for point in curve]
    recalls = [point.mean_recall for point in curve]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(k_ds, recalls, marker="o")
    best = max(range(len(curve)), key=lambda i: (recalls[i], k_ds[i]))
    ax.scatter([k_ds[best]], [recalls[best]], color="crimson", zorder=3,
               label=f"best k_d = {k_ds[best]}")
    ax.set_xlabel("k_d (retained docs; k_c = budget - k_d)")
    ax.set_ylabel("mean recall")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_metric_distributions(report, path: str | Path,
                              title: str = "Per-query metrics") -> None:
    """Histograms of per-query F1@20, MRR and recall."""
    metrics = [
        ("F1@20", [m.f1_at_20 for m in report.per_query.values()]),
        ("MRR", [m.mrr for m in report.per_query.values()]),
        ("R@1000", [m.recall_at_1000 for m in report.per_query.values()]),
    ]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    for ax, (name, values) in zip(axes, metrics):
        ax.hist(values, bins=20, range=(0.0, 1.0), color="steelblue", edgecolor="white")
        mean = sum(values) / len(values) if values else 0.0
        ax.axvline(mean, color="crimson", linestyle="--", label=f"mean {mean:.3f}")
        ax.set_title(name)
        ax.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
