"""Matplotlib rendering of sweep lines and proportion-error bars."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .tables import METRIC_ACCURACY, METRIC_L1, SweepTable, load_table


def sweep_rows(table: SweepTable, metric: str = METRIC_ACCURACY):
    """The rows a sweep plot would draw, in input order (dry-run payload)."""
    return table.select(metric)


def plot_sweep(csv_path, axis_label: str, out_path, metric: str = METRIC_ACCURACY) -> None:
    """One line per method over the sweep axis with a shaded +/- std band."""
    table = load_table(csv_path)
    rows = sweep_rows(table, metric)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for method in table.methods(metric):
        pts = sorted((r.axis, r.mean, r.std) for r in rows if r.method == method)
        axis = np.array([p[0] for p in pts])
        mean = np.array([p[1] for p in pts])
        std = np.array([p[2] for p in pts])
        line, = ax.plot(axis, mean, marker="o", label=method)
        ax.fill_between(axis, mean - std, mean + std, alpha=0.2, color=line.get_color())
    ax.set_xticks(sorted({r.axis for r in rows}))
    ax.set_xlabel(axis_label)
    ax.set_ylabel(metric.replace("_", " "))
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_proportion_error(csv_path, out_path, metric: str = METRIC_L1) -> None:
    """Grouped bars: one group per setting (axis value), one bar per method."""
    table = load_table(csv_path)
    rows = sweep_rows(table, metric)
    methods = table.methods(metric)
    settings = sorted({r.axis for r in rows})
    lookup = {(r.axis, r.method): r for r in rows}
    width = 0.8 / len(methods)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    base = np.arange(len(settings), dtype=float)
    for j, method in enumerate(methods):
        offsets = base + (j - (len(methods) - 1) / 2) * width
        means = [lookup[(s, method)].mean if (s, method) in lookup else np.nan for s in settings]
        stds = [lookup[(s, method)].std if (s, method) in lookup else 0.0 for s in settings]
        ax.bar(offsets, means, width=width, yerr=stds, capsize=3, label=method)
    ax.set_xticks(base)
    ax.set_xticklabels([f"{s:g}" for s in settings])
    ax.set_xlabel("setting")
    ax.set_ylabel(metric.replace("_", " "))
    ax.grid(alpha=0.3, axis="y")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
