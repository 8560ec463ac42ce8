"""Matplotlib figures for the CLI report path.

All figures are rendered off-screen and saved without timestamp or
version metadata, so reruns give byte-identical PNGs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def iwe_panels(images: dict, path, title: str = "") -> None:
    """Side-by-side grayscale IWEs, one panel per ``name -> image`` entry."""
    n = len(images)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.4), squeeze=False)
    for ax, (name, img) in zip(axes[0], images.items()):
        ax.imshow(np.asarray(img), cmap="gray_r", interpolation="nearest")
        ax.set_title(name, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def roc_figure(curves: dict, path) -> None:
    """ROC curves keyed by legend label; each value is a :class:`RocCurve`."""
    fig, ax = plt.subplots(figsize=(4.0, 4.0))
    for name, c in curves.items():
        ax.plot(c.fpr, c.tpr, lw=1.2, label=f"{name} (AUC {c.auc:.3f})")
    ax.plot([0, 1], [0, 1], color="0.6", lw=0.8, ls="--")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def history_figure(rows: list, path) -> None:
    """Objective and parameter change per outer iteration."""
    it = [r.iteration for r in rows]
    fig, (a0, a1) = plt.subplots(2, 1, figsize=(4.5, 4.5), sharex=True)
    a0.plot(it, [r.objective for r in rows], marker="o", ms=3)
    a0.set_ylabel("objective")
    a1.semilogy(it, [max(r.param_change, 1e-16) for r in rows], marker="o", ms=3)
    a1.set_ylabel("parameter change")
    a1.set_xlabel("iteration")
    fig.tight_layout()
    _save(fig, path)


def sweep_figure(rows: list[dict], path, metric: str = "auc") -> None:
    """``metric`` against tau, one line per noise rate."""
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    for rate in sorted({r["noise_hz"] for r in rows}):
        sub = sorted((r for r in rows if r["noise_hz"] == rate), key=lambda r: r["tau"])
        ax.plot([r["tau"] for r in sub], [r[metric] for r in sub], marker="o", ms=3, label=f"{rate:g} Hz/px")
    ax.set_xlabel("tau")
    ax.set_ylabel(metric)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
