"""Figures written next to the delimited command output."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def relation_heatmaps(u, rels: dict, path: str, title: str = "") -> str:
    """One boolean matrix panel per named relation over the universe."""
    names = [u.name(i) for i in range(u.size)]
    fig, axes = plt.subplots(1, len(rels), figsize=(3.2 * len(rels) + 0.5, 3.4), squeeze=False)
    for ax, (label, rel) in zip(axes[0], rels.items()):
        ax.imshow(rel.matrix, cmap="Greys", vmin=0, vmax=1, interpolation="nearest")
        ax.set_title(label, fontsize=9)
        if u.size <= 24:
            ax.set_xticks(range(u.size), names, rotation=90, fontsize=6)
            ax.set_yticks(range(u.size), names, fontsize=6)
        else:
            ax.set_xticks([])
            ax.set_yticks([])
    if title:
        fig.suptitle(title, fontsize=10)
    return _save(fig, path)


def law_counts(report, path: str, title: str = "") -> str:
    rules = sorted(set(report.passed) | set(report.skipped))
    passed = [report.passed.get(r, 0) for r in rules]
    skipped = [report.skipped.get(r, 0) for r in rules]
    failed = [sum(1 for f in report.failures if f.rule == r) for r in rules]
    fig, ax = plt.subplots(figsize=(max(5, 0.45 * len(rules) + 2), 3.6))
    xs = range(len(rules))
    ax.bar(xs, passed, label="passed", color="0.35")
    ax.bar(xs, skipped, bottom=passed, label="skipped", color="0.75")
    ax.bar(xs, failed, bottom=[p + s for p, s in zip(passed, skipped)], label="failed", color="tab:red")
    ax.set_xticks(list(xs), rules, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("checks")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    return _save(fig, path)


def tower_sizes(sizes: dict, path: str) -> str:
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.bar(list(sizes), list(sizes.values()), color="0.4")
    ax.set_xlabel("(bL,bR)")
    ax.set_ylabel("tower elements")
    return _save(fig, path)
