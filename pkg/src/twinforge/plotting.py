"""Figures written next to the CSV/JSON report artifacts (non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .classifier import CLASS_NAMES  # noqa: E402
from .convergence import smooth  # noqa: E402

_META = {"Software": None}  # keep PNG bytes free of version strings


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)


def plot_scores(trace, path, window: int = 100, threshold: float | None = 0.05, title: str = ""):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    it = trace.iterations
    for series, name, color in ((trace.score_d, "discriminator", "tab:blue"), (trace.score_g, "generator", "tab:orange")):
        ax.plot(it, series, color=color, alpha=0.25, lw=0.6)
        ax.plot(it, smooth(series, window), color=color, lw=1.4, label=name)
    ax.axhline(0.5, color="k", lw=0.8, ls="--")
    if threshold is not None:
        ax.axhspan(0.5 - threshold, 0.5 + threshold, color="0.85", zorder=0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1)
    ax.legend(loc="upper right", fontsize=8)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_spectra(freqs, curves: dict, path, title: str = ""):
    """``curves`` maps a legend label to a power vector sampled at ``freqs``."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, power in curves.items():
        ax.semilogy(freqs, np.maximum(power, 1e-30), lw=1.0, label=label)
    ax.set_xlabel("frequency [Hz]")
    ax.set_ylabel("PSD")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_pca(coords, sources, labels, path):
    coords = np.asarray(coords)
    sources = np.asarray(sources)
    labels = np.asarray(labels)
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    for src, marker in (("real", "o"), ("generated", "^")):
        for lab, color in ((0, "tab:green"), (1, "tab:red")):
            m = (sources == src) & (labels == lab)
            if m.any():
                ax.scatter(*coords[m, :3].T, s=5, marker=marker, color=color, alpha=0.5, label=f"{src} {CLASS_NAMES[1 - lab]}")
    ax.set_xlabel("PC1")
    ax.set_ylabel("PC2")
    ax.set_zlabel("PC3")
    ax.legend(fontsize=7, markerscale=2)
    _save(fig, path)


def plot_confusion(confusion, path, title: str = ""):
    cm = np.asarray(confusion)
    fig, ax = plt.subplots(figsize=(3.8, 3.4))
    ax.imshow(cm, cmap="Blues")
    for (i, j), v in np.ndenumerate(cm):
        ax.text(j, i, str(int(v)), ha="center", va="center", color="white" if v > cm.max() / 2 else "black")
    ax.set_xticks([0, 1], CLASS_NAMES)
    ax.set_yticks([0, 1], CLASS_NAMES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    if title:
        ax.set_title(title)
    _save(fig, path)
