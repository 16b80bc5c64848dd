"""Polar (amplitude/phase-gradient) decomposition and the derived flow fields.

Phase is never unwrapped: every phase derivative is the bilinear form
Im(conj(psi) * d psi) / |psi|^2, which is single-valued and gauge-covariant.

Regimes:
  "relativistic"      stored field is the full wave; ds_t is its phase rate.
  "nonrelativistic"   stored field is the envelope; the carrier exp(-i omega0 t)
                      is implicit and ds_t below includes the -omega0 carrier term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .fields import (
    FourPotential,
    GridSpec,
    ScalarComplexField,
    StencilConfig,
    dilate_mask,
    gradient,
    laplacian,
)

REGIMES = ("relativistic", "nonrelativistic")


@dataclass(frozen=True)
class PolarFields:
    """Amplitude and four-gradient of phase on the grid at one instant."""

    grid: GridSpec
    regime: str
    omega0: float
    amplitude: np.ndarray
    ds_x: np.ndarray                     # shape (ndim, *grid.shape)
    ds_t: np.ndarray | None = None       # carrier included
    valid: np.ndarray | None = None      # True where amplitude trustworthy
    amplitude_before: np.ndarray | None = None
    amplitude_after: np.ndarray | None = None
    slice_dt: float | None = None
    time_label: float = 0.0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError("regime must be one of %s" % (REGIMES,))

    def valid_mask(self) -> np.ndarray:
        if self.valid is None:
            return np.ones(self.grid.shape, dtype=bool)
        return self.valid

    def slow_ds_t(self) -> np.ndarray:
        """Envelope phase rate with the carrier removed (nonrelativistic only)."""
        if self.ds_t is None:
            raise ValueError("no time slices were provided for ds_t")
        if self.regime != "nonrelativistic":
            raise ValueError("slow phase rate is a nonrelativistic notion")
        return self.ds_t + self.omega0


@dataclass(frozen=True)
class FlowFields:
    """Velocity fields and current derived from a polar decomposition."""

    grid: GridSpec
    regime: str
    v3: np.ndarray                       # (ndim, *shape)
    v4: np.ndarray | None                # (1+ndim, *shape), unit timelike
    current: np.ndarray | None           # (1+ndim, *shape)
    timelike: np.ndarray | None
    valid: np.ndarray
    time_label: float = 0.0


def _bilinear_phase_derivative(psi, dpsi, denom):
    return np.imag(np.conj(psi) * dpsi) / denom


def decompose(
    current: ScalarComplexField,
    before: ScalarComplexField | None = None,
    after: ScalarComplexField | None = None,
    *,
    regime: str = "nonrelativistic",
    omega0: float = 1.0,
    floor_frac: float = 1e-8,
    cfg: StencilConfig = StencilConfig(),
) -> PolarFields:
    """Split a sampled wave into amplitude and phase four-gradient.

    Passing equally spaced before/after slices enables ds_t and the amplitude
    time stack (needed for box(a)/a and continuity in time). Cells with
    amplitude below floor_frac * max(amplitude), or inside a widened exclusion
    mask, are flagged invalid; phase derivatives there are computed against a
    clamped denominator and must not be trusted.
    """
    psi = current.values
    a = np.abs(psi)
    floor = floor_frac * float(np.max(a))
    valid = a > floor
    excl = dilate_mask(current.excluded, current.grid, cfg.halfwidth())
    if excl is not None:
        valid &= ~excl
    denom = np.maximum(a * a, floor * floor)
    grad_psi = gradient(current, cfg)
    ds_x = np.empty_like(grad_psi, dtype=float)
    for i in range(current.grid.ndim):
        ds_x[i] = _bilinear_phase_derivative(psi, grad_psi[i], denom)
    ds_t = None
    a_b = a_a = None
    slice_dt = None
    if (before is None) != (after is None):
        raise ValueError("provide both time slices or neither")
    if before is not None:
        slice_dt = after.time_label - current.time_label
        back = current.time_label - before.time_label
        if not np.isclose(slice_dt, back, rtol=1e-12, atol=1e-15):
            raise ValueError("time slices must be equally spaced")
        dpsi_dt = (after.values - before.values) / (2.0 * slice_dt)
        ds_t = _bilinear_phase_derivative(psi, dpsi_dt, denom)
        if regime == "nonrelativistic":
            ds_t = ds_t - omega0
        a_b = np.abs(before.values)
        a_a = np.abs(after.values)
    return PolarFields(
        grid=current.grid,
        regime=regime,
        omega0=omega0,
        amplitude=a,
        ds_x=ds_x,
        ds_t=ds_t,
        valid=valid,
        amplitude_before=a_b,
        amplitude_after=a_a,
        slice_dt=slice_dt,
        time_label=current.time_label,
    )


def _amplitude_field(polar: PolarFields) -> ScalarComplexField:
    return ScalarComplexField(
        grid=polar.grid,
        values=polar.amplitude.astype(complex),
        time_label=polar.time_label,
        name="amplitude",
    )


def quantum_potential(polar: PolarFields, cfg: StencilConfig = StencilConfig()) -> np.ndarray:
    """Relativistic: box(a)/a. Nonrelativistic: -lap(a)/(2 m a), m = omega0."""
    a = polar.amplitude
    floor = np.max(a) * 1e-12
    safe = np.maximum(a, floor)
    lap_a = laplacian(_amplitude_field(polar), cfg).values.real
    if polar.regime == "nonrelativistic":
        return -lap_a / (2.0 * polar.omega0 * safe)
    if polar.amplitude_before is None or polar.amplitude_after is None:
        raise ValueError("relativistic quantum potential needs the amplitude time stack")
    att = (polar.amplitude_after - 2 * a + polar.amplitude_before) / polar.slice_dt**2
    return (att - lap_a) / safe


def velocity_fields(polar: PolarFields, pot: FourPotential | None = None,
                    rate_floor: float = 1e-12) -> FlowFields:
    """Guidance velocity, unit four-velocity and current from the phase gradient.

    Relativistic: v3 = -(grad S - e A)/(dS_t + e V), v4 = -w/sqrt(w.w) with
    w = (dS_t + eV, -grad S + eA), current = -(a^2/omega0) w.
    Nonrelativistic: v3 = grad S / m exactly (the envelope guidance law);
    v4 ~ (1, v3) and current ~ (a^2, a^2 v3).
    """
    g = polar.grid
    pot = pot or FourPotential.zero(g)
    e = pot.charge
    a2 = polar.amplitude**2
    valid = polar.valid_mask().copy()
    if polar.regime == "nonrelativistic":
        v3 = polar.ds_x / polar.omega0
        v4 = np.concatenate([np.ones((1,) + g.shape), v3], axis=0)
        cur = np.concatenate([a2[None], a2[None] * v3], axis=0)
        return FlowFields(grid=g, regime=polar.regime, v3=v3, v4=v4, current=cur,
                          timelike=None, valid=valid, time_label=polar.time_label)
    if polar.ds_t is None:
        raise ValueError("relativistic flow needs ds_t (time slices)")
    V = pot.scalar_or_zero()
    A = pot.vector_or_zero()
    w0 = polar.ds_t + e * V
    w_sp = np.stack([-polar.ds_x[i] + e * A[i] for i in range(g.ndim)])
    wsq = w0 * w0 - np.sum(w_sp * w_sp, axis=0)
    timelike = wsq > 0
    valid &= np.abs(w0) > rate_floor
    norm = np.sqrt(np.where(timelike, wsq, 1.0))
    v4 = np.concatenate([(-w0 / norm)[None], -w_sp / norm], axis=0)
    v4[:, ~timelike] = np.nan
    denom = np.where(np.abs(w0) > rate_floor, w0, np.nan)
    v3 = np.stack([-(polar.ds_x[i] - e * A[i]) / denom for i in range(g.ndim)])
    cur = np.concatenate([(-a2 / polar.omega0 * w0)[None],
                          -a2 / polar.omega0 * w_sp], axis=0)
    return FlowFields(grid=g, regime=polar.regime, v3=v3, v4=v4, current=cur,
                      timelike=timelike, valid=valid, time_label=polar.time_label)


def bilinear_current(current: ScalarComplexField, before: ScalarComplexField,
                     after: ScalarComplexField, pot: FourPotential | None = None,
                     omega0: float = 1.0,
                     cfg: StencilConfig = StencilConfig()) -> np.ndarray:
    """Conserved current straight from the wave: (i/2 omega0) psi* D<-> psi.

    Equals -(a^2/omega0)(dS + eA) wherever the polar split is defined; the
    equality is a consistency check between the two routes.
    """
    g = current.grid
    pot = pot or FourPotential.zero(g)
    e = pot.charge
    psi = current.values
    dt = after.time_label - current.time_label
    dpsi_dt = (after.values - before.values) / (2.0 * dt)
    grad_psi = gradient(current, cfg)
    a2 = np.abs(psi) ** 2
    V = pot.scalar_or_zero()
    A = pot.vector_or_zero()
    out = np.empty((1 + g.ndim,) + g.shape)
    out[0] = -(np.imag(np.conj(psi) * dpsi_dt) + e * V * a2) / omega0
    for i in range(g.ndim):
        # contravariant spatial part of -(a^2/omega0)(dS + eA)
        out[1 + i] = (np.imag(np.conj(psi) * grad_psi[i]) - e * A[i] * a2) / omega0
    return out


def hj_residual(polar: PolarFields, pot: FourPotential | None = None,
                cfg: StencilConfig = StencilConfig()) -> np.ndarray:
    """Pointwise Hamilton-Jacobi residual in the regime-matched form.

    Relativistic: (dS+eA).(dS+eA) - omega0^2 - box(a)/a - chi.
    Nonrelativistic: dS_slow/dt + |grad S|^2/(2m) + V_eff + Q, with
    V_eff = e V + chi/(2 m); vanishes on exact envelope solutions.
    """
    g = polar.grid
    pot = pot or FourPotential.zero(g)
    e = pot.charge
    V = pot.scalar_or_zero()
    chi = pot.chi_or_zero()
    A = pot.vector_or_zero()
    q = quantum_potential(polar, cfg)
    if polar.regime == "nonrelativistic":
        m = polar.omega0
        kinetic = sum(polar.ds_x[i] ** 2 for i in range(g.ndim)) / (2.0 * m)
        v_eff = e * V + chi / (2.0 * m)
        return polar.slow_ds_t() + kinetic + v_eff + q
    if polar.ds_t is None:
        raise ValueError("relativistic HJ residual needs ds_t")
    w0 = polar.ds_t + e * V
    wsq = w0 * w0 - sum((polar.ds_x[i] - e * A[i]) ** 2 for i in range(g.ndim))
    return wsq - polar.omega0**2 - q - chi


def continuity_residual(
    polar: PolarFields,
    pot: FourPotential | None = None,
    *,
    before: PolarFields | None = None,
    after: PolarFields | None = None,
    cfg: StencilConfig = StencilConfig(),
) -> tuple[np.ndarray, float]:
    """Pointwise continuity residual and its volume integral.

    Nonrelativistic: d(a^2)/dt + div(a^2 grad S / m), self-contained given the
    amplitude time stack. Relativistic: d(a^2 w0)/dt + div(a^2 w_spatial) and
    needs neighbouring polar slices for the time derivative of a^2 w0.
    """
    g = polar.grid
    pot = pot or FourPotential.zero(g)
    e = pot.charge

    def div(vec):
        acc = np.zeros(g.shape)
        for i, h in enumerate(g.spacing):
            comp = ScalarComplexField(grid=g, values=vec[i].astype(complex),
                                      time_label=polar.time_label)
            acc += gradient(comp, cfg)[i].real
        return acc

    if polar.regime == "nonrelativistic":
        if polar.amplitude_before is None or polar.amplitude_after is None:
            raise ValueError("continuity needs the amplitude time stack")
        da2_dt = (polar.amplitude_after**2 - polar.amplitude_before**2) / (2 * polar.slice_dt)
        flux = polar.amplitude**2 * polar.ds_x / polar.omega0
        res = da2_dt + div(flux)
    else:
        if before is None or after is None:
            raise ValueError("relativistic continuity needs neighbouring polar slices")
        V = pot.scalar_or_zero()

        def dens(p):
            return p.amplitude**2 * (p.ds_t + e * V)

        dt = after.time_label - polar.time_label
        da2w0_dt = (dens(after) - dens(before)) / (2 * dt)
        A = pot.vector_or_zero()
        flux = np.stack([
            polar.amplitude**2 * (-polar.ds_x[i] + e * A[i]) for i in range(g.ndim)
        ])
        res = da2w0_dt + div(flux)
    integral = float(np.sum(res) * g.cell_volume())
    return res, integral


def make_circle_loop(center, radius: float, segments: int = 256) -> np.ndarray:
    th = np.linspace(0.0, 2.0 * math.pi, segments, endpoint=False)
    cx, cy = center
    return np.stack([cx + radius * np.cos(th), cy + radius * np.sin(th)], axis=1)


def circulation(polar: PolarFields, loop: np.ndarray) -> float:
    """Line integral of the interpolated phase gradient around a closed polyline.

    Midpoint rule per segment. Raises if the loop touches cells where the
    decomposition is invalid (amplitude floor or exclusion).
    """
    g = polar.grid
    axes = g.axes()
    interps = [
        RegularGridInterpolator(axes, polar.ds_x[i], method="linear", bounds_error=True)
        for i in range(g.ndim)
    ]
    ok = RegularGridInterpolator(axes, polar.valid_mask().astype(float),
                                 method="linear", bounds_error=True)
    pts = np.asarray(loop, dtype=float)
    nxt = np.roll(pts, -1, axis=0)
    mids = 0.5 * (pts + nxt)
    if np.any(ok(mids) < 0.999999):
        raise ValueError("loop crosses a masked or floored region")
    deltas = nxt - pts
    total = 0.0
    for i in range(g.ndim):
        total += float(np.sum(interps[i](mids) * deltas[:, i]))
    return total
