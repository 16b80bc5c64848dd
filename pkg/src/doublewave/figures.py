"""Matplotlib figures for the report path (PNG, Agg backend only).

These sit alongside the delimited outputs as quick visual summaries; the
byte-identical reproducibility guarantee covers CSV and JSON, while figures
are merely stable for a fixed matplotlib version.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .fields import ScalarComplexField  # noqa: E402


def save_series(path: str, x, series: dict, *, xlabel: str, ylabel: str,
                title: str, logy: bool = False) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    for label, y in series.items():
        ax.plot(x, y, label=label, linewidth=1.4)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(frameon=False, fontsize=8)
    ax.grid(True, alpha=0.25)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_loglog(path: str, x, series: dict, *, xlabel: str, ylabel: str,
                title: str) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    for label, y in series.items():
        ax.loglog(x, y, marker="o", markersize=3, linewidth=1.2, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(frameon=False, fontsize=8)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_heatmap(path: str, fld: ScalarComplexField, *, title: str,
                 log: bool = False) -> None:
    a = np.abs(fld.values)
    if fld.excluded is not None:
        a = np.where(fld.excluded, np.nan, a)
    if a.ndim == 3:
        a = a[:, :, a.shape[2] // 2]
    if a.ndim == 1:
        x = fld.grid.axes()[0]
        fig, ax = plt.subplots(figsize=(6.0, 3.2), dpi=120)
        ax.plot(x, a, linewidth=1.4)
        if log:
            ax.set_yscale("log")
        ax.set_xlabel("x")
        ax.set_ylabel("amplitude")
    else:
        (x0, x1), (y0, y1) = fld.grid.extents[0], fld.grid.extents[1]
        data = np.log10(np.maximum(a, 1e-6 * np.nanmax(a))) if log else a
        fig, ax = plt.subplots(figsize=(5.4, 4.6), dpi=120)
        im = ax.imshow(data.T, origin="lower", extent=(x0, x1, y0, y1),
                       aspect="equal", cmap="viridis")
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_trajectories(path: str, times, paths: np.ndarray, *, title: str) -> None:
    """paths has shape (n_times, n_paths) in 1D or (n_times, n_paths, 2) in 2D."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    if paths.ndim == 2 or paths.shape[-1] == 1:
        flat = paths if paths.ndim == 2 else paths[:, :, 0]
        ax.plot(times, flat, linewidth=0.9)
        ax.set_xlabel("t")
        ax.set_ylabel("z")
    else:
        ax.plot(paths[:, :, 0], paths[:, :, 1], linewidth=0.9)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal")
    ax.set_title(title)
    ax.grid(True, alpha=0.25)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
