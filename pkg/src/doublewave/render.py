"""Raster heatmaps of snapshot quantities as portable pixmaps.

Binary PPM (P6) carries a grayscale ramp with masked or undefined pixels in
magenta; a .pgm path selects binary PGM (P5) where masked pixels are 0.
The map is linear by default: pixel = 255 * (q - min) / (max - min) over
finite unmasked cells. The log map applies log10 first, with a floor at
1e-6 of the maximum. 3D snapshots are rendered as the mid-plane along the
last axis; 1D snapshots as a 32-row strip.
"""
from __future__ import annotations

import numpy as np

from .fields import ScalarComplexField, StencilConfig, gradient, laplacian

QUANTITIES = ("amplitude", "phase_gradient_mag", "quantum_potential")

MASK_RGB = (255, 0, 255)
LOG_FLOOR_FRACTION = 1e-6


def extract_quantity(fld: ScalarComplexField, quantity: str, *,
                     omega0: float = 1.0) -> np.ndarray:
    """Real scalar panel for rendering; undefined cells come back NaN."""
    if quantity not in QUANTITIES:
        raise ValueError("unknown quantity %r (choose from %s)"
                         % (quantity, ", ".join(QUANTITIES)))
    a = np.abs(fld.values)
    if quantity == "amplitude":
        out = a.copy()
    elif quantity == "phase_gradient_mag":
        floor = a.max() * 1e-8
        denom = np.maximum(a * a, floor * floor)
        g = gradient(fld, StencilConfig())
        ds = np.stack([np.imag(np.conj(fld.values) * g[i]) / denom
                       for i in range(fld.grid.ndim)])
        out = np.sqrt(np.sum(ds * ds, axis=0))
        out[a <= floor] = np.nan
    else:
        floor = a.max() * 1e-8
        amp = fld.with_values(a.astype(np.complex128))
        lap = laplacian(amp, StencilConfig())
        out = -np.real(lap.values) / (2.0 * omega0 * np.maximum(a, floor))
        out[a <= floor] = np.nan
    if fld.excluded is not None:
        out = out.copy()
        out[fld.excluded] = np.nan
    return out


def _as_panel(q: np.ndarray) -> np.ndarray:
    if q.ndim == 1:
        return np.tile(q[None, :], (32, 1))
    if q.ndim == 2:
        return q.T[::-1, :]  # x horizontal, y upward
    if q.ndim == 3:
        return q[:, :, q.shape[2] // 2].T[::-1, :]
    raise ValueError("cannot render %d-dimensional data" % q.ndim)


def normalize_panel(panel: np.ndarray, scale: str = "linear") -> np.ndarray:
    """Map finite values to [0, 1]; NaN cells stay NaN."""
    if scale not in ("linear", "log"):
        raise ValueError("scale must be linear or log")
    out = panel.astype(float).copy()
    finite = np.isfinite(out)
    if not np.any(finite):
        return out
    if scale == "log":
        top = np.max(np.abs(out[finite]))
        if top <= 0:
            out[finite] = 0.0
            return out
        out[finite] = np.log10(np.maximum(np.abs(out[finite]),
                                          LOG_FLOOR_FRACTION * top))
    lo = np.min(out[finite])
    hi = np.max(out[finite])
    if hi > lo:
        out[finite] = (out[finite] - lo) / (hi - lo)
    else:
        out[finite] = 0.5
    return out


def write_pixmap(path: str, panel01: np.ndarray) -> None:
    """Write a normalized panel (NaN = masked) as P6 PPM or P5 PGM by extension."""
    h, w = panel01.shape
    level = np.zeros((h, w), dtype=np.uint8)
    finite = np.isfinite(panel01)
    level[finite] = np.clip(np.round(255.0 * panel01[finite]), 0, 255).astype(np.uint8)
    if str(path).endswith(".pgm"):
        head = ("P5\n%d %d\n255\n" % (w, h)).encode("ascii")
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(level.tobytes())
        return
    rgb = np.stack([level, level, level], axis=-1)
    rgb[~finite] = MASK_RGB
    head = ("P6\n%d %d\n255\n" % (w, h)).encode("ascii")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(rgb).tobytes())


def render_field(fld: ScalarComplexField, quantity: str, out_path: str, *,
                 scale: str = "linear", omega0: float = 1.0) -> None:
    q = extract_quantity(fld, quantity, omega0=omega0)
    write_pixmap(out_path, normalize_panel(_as_panel(q), scale))
