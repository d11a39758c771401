"""Matplotlib figures written next to the JSON/text reports."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

import numpy as np  # noqa: E402

REAL = "#333333"
GEN = "#1f77b4"
BASE = "#d62728"


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trajectories(real, generated, path, network=None, baseline=None, max_lines=40):
    """Real vs generated tracks (lon on x, lat on y), optional cell outlines."""
    panels = [("real", real, REAL), ("generated", generated, GEN)]
    if baseline is not None:
        panels.append(("levy baseline", baseline, BASE))
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.8), sharex=True, sharey=True)
    allpts = np.concatenate([np.asarray(t) for t in real])
    pad = 2.0
    for ax, (title, trajs, color) in zip(np.atleast_1d(axes), panels):
        if network is not None:
            for c in network.cells:
                lat0, lat1, lon0, lon1 = c.bounds()
                ax.add_patch(Rectangle((lon0, lat0), lon1 - lon0, lat1 - lat0, fill=False, lw=0.3, ec="0.75"))
        for t in list(trajs)[:max_lines]:
            t = np.asarray(t)
            ax.plot(t[:, 1], t[:, 0], color=color, lw=0.6, alpha=0.6)
        ax.set_title(title)
        ax.set_xlabel("lon (deg)")
        ax.set_xlim(allpts[:, 1].min() - pad, allpts[:, 1].max() + pad)
        ax.set_ylim(allpts[:, 0].min() - pad, allpts[:, 0].max() + pad)
    np.atleast_1d(axes)[0].set_ylabel("lat (deg)")
    _save(fig, path)


def plot_histograms(reports, path):
    """Cluster-occupancy histograms (test vs each method), normalised to fractions."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    methods = list(reports)
    first = reports[methods[0]]
    k = len(first.counts_test)
    width = 0.8 / (len(methods) + 1)
    x = np.arange(k)
    ct = np.asarray(first.counts_test, dtype=float)
    ax.bar(x, ct / max(ct.sum(), 1), width, label="test", color=REAL)
    for i, m in enumerate(methods, start=1):
        cg = np.asarray(reports[m].counts_gen, dtype=float)
        ax.bar(x + i * width, cg / max(cg.sum(), 1), width, label=m, color=[GEN, BASE, "C2", "C3"][(i - 1) % 4])
    ax.set_xlabel("k-means cluster")
    ax.set_ylabel("fraction of points")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_summary(summary, path):
    methods = list(summary)
    kinds = sorted({k for m in methods for k in summary[m]["metrics"]})
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    width = 0.8 / max(len(methods), 1)
    x = np.arange(len(kinds))
    for i, m in enumerate(methods):
        cov = [summary[m]["metrics"].get(k, {}).get("coverage", 0.0) for k in kinds]
        ax.bar(x + i * width, cov, width, label=m)
    ax.set_xticks(x + width * (len(methods) - 1) / 2)
    ax.set_xticklabels(kinds)
    ax.set_ylim(0, 1)
    ax.set_ylabel("coverage")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_loss(curve, path, label="training loss"):
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.plot(np.arange(1, len(curve) + 1), curve)
    ax.set_xlabel("epoch")
    ax.set_ylabel(label)
    _save(fig, path)
