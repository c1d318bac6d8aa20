"""Figure output for run reports: error heatmaps, convergence curves, image previews.

All figures use the Agg backend and carry no timestamp metadata, so the same
input always produces the same PNG bytes. Heatmaps use the ``viridis``
colormap; their value range is written to a ``.txt`` sidecar.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

HEATMAP_CMAP = "viridis"
DPI = 100

_RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "svg.hashsalt": "lainr",
}

_PNG_META = {"Software": None}


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, dpi=DPI, metadata=_PNG_META)
    plt.close(fig)
    return path


def save_heatmap(errors, steps, frequencies, path, title=None, vmin=0.0, vmax=None):
    """Steps x frequencies error matrix drawn with frequency on the y axis.

    Returns the PNG path; ``<path>.txt`` records colormap and value range.
    """
    errors = np.asarray(errors, dtype=np.float64)
    vmax = float(errors.max()) if vmax is None else float(vmax)
    if vmax <= vmin:
        vmax = vmin + 1.0
    labels = [f"{w / np.pi:g}π" for w in frequencies]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 2.6))
        im = ax.imshow(errors.T, aspect="auto", origin="lower", cmap=HEATMAP_CMAP,
                       vmin=vmin, vmax=vmax, interpolation="nearest")
        ax.set_yticks(range(len(labels)))
        ax.set_yticklabels(labels)
        ticks = np.linspace(0, len(steps) - 1, min(len(steps), 6)).round().astype(int)
        ax.set_xticks(ticks)
        ax.set_xticklabels([str(steps[i]) for i in ticks])
        ax.set_xlabel("training step")
        ax.set_ylabel("frequency")
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax, label="relative error")
        fig.tight_layout()
        out = _save(fig, path)
    sidecar = Path(str(out) + ".txt")
    sidecar.write_text(
        f"colormap: {HEATMAP_CMAP}\nvmin: {vmin!r}\nvmax: {vmax!r}\n"
        f"data_min: {float(errors.min())!r}\ndata_max: {float(errors.max())!r}\n"
        f"rows(steps): {len(steps)}\ncols(frequencies): {len(frequencies)}\n"
    )
    return out


def save_convergence(curves, path, ylabel="PSNR (dB)"):
    """``curves`` maps a label to an (epochs, values) pair."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for label, (epochs, values) in curves.items():
            ax.plot(epochs, values, label=label, linewidth=1.2)
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def save_preview(image, path):
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    with plt.rc_context(_RC):
        h, w = img.shape[:2]
        fig = plt.figure(figsize=(w / DPI, h / DPI), dpi=DPI)
        ax = fig.add_axes([0, 0, 1, 1])
        ax.imshow(img, cmap="gray" if img.ndim == 2 else None, vmin=0.0, vmax=1.0, interpolation="nearest")
        ax.axis("off")
        return _save(fig, path)
