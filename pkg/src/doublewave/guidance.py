"""Guided point dynamics inside a decomposed wave: dz/dt = v(t, z).

Velocity and phase-gradient fields are multilinear in space and linear in
time between saved slices. Integration is classical fixed-step RK4,
vectorized over whole ensembles; a particle that leaves the domain or touches
an excluded region is frozen and flagged rather than extrapolated.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .fields import FourPotential, GridSpec
from .madelung import FlowFields, PolarFields, velocity_fields

STATUS_COMPLETED = "completed"
STATUS_LEFT_DOMAIN = "left_domain"
STATUS_MASKED = "masked_region"

_CHUNK = 1024  # fixed ensemble block size so results never depend on thread count


class GriddedFlow:
    """Time series of decomposed slices, sampled continuously in (t, x)."""

    def __init__(self, polars: list[PolarFields], pot: FourPotential | None = None,
                 margin_cells: float = 0.5):
        if len(polars) < 1:
            raise ValueError("need at least one slice")
        self.grid = polars[0].grid
        self.regime = polars[0].regime
        self.omega0 = polars[0].omega0
        self.times = np.array([p.time_label for p in polars], dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("slices must be strictly time-ordered")
        axes = self.grid.axes()

        def rgi(arr):
            return RegularGridInterpolator(axes, arr, method="linear", bounds_error=False,
                                           fill_value=np.nan)

        self._vel = []
        self._ds_t = []
        self._ds_x = []
        self._amp = []
        self._ok = []
        for p in polars:
            flow: FlowFields = velocity_fields(p, pot)
            self._vel.append([rgi(flow.v3[i]) for i in range(self.grid.ndim)])
            self._ds_x.append([rgi(p.ds_x[i]) for i in range(self.grid.ndim)])
            self._ds_t.append(rgi(p.ds_t) if p.ds_t is not None else None)
            self._amp.append(rgi(p.amplitude))
            self._ok.append(rgi(p.valid_mask().astype(float)))
        lo = np.array([e[0] for e in self.grid.extents])
        hi = np.array([e[1] for e in self.grid.extents])
        pad = margin_cells * np.array(self.grid.spacing)
        self._lo, self._hi = lo + pad, hi - pad
        self.t_min = float(self.times[0])
        self.t_max = float(self.times[-1])

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    def in_domain(self, pts: np.ndarray) -> np.ndarray:
        return np.all((pts >= self._lo) & (pts <= self._hi), axis=-1)

    def usable(self, t: float, pts: np.ndarray) -> np.ndarray:
        ok = self.in_domain(pts)
        frac = self._blend(self._ok, t, np.atleast_2d(pts))
        return ok & (frac > 0.999999)

    def _bracket(self, t: float) -> tuple[int, float]:
        eps = 1e-9 * max(1.0, abs(self.t_max - self.t_min))
        if t < self.t_min - eps or t > self.t_max + eps:
            raise ValueError("time %g outside the flow series [%g, %g]"
                             % (t, self.t_min, self.t_max))
        t = min(max(t, self.t_min), self.t_max)
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        k = min(max(k, 0), len(self.times) - 2) if len(self.times) > 1 else 0
        if len(self.times) == 1:
            return 0, 0.0
        th = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return k, float(th)

    def _blend(self, bank, t, pts):
        clip = np.clip(pts, self._lo, self._hi)
        if len(self.times) == 1:
            return bank[0](clip)
        k, th = self._bracket(t)
        return (1 - th) * bank[k](clip) + th * bank[k + 1](clip)

    def velocity(self, t: float, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.empty_like(pts, dtype=float)
        for i in range(self.ndim):
            out[:, i] = self._blend([v[i] for v in self._vel], t, pts)
        return out

    def phase_rate(self, t: float, pts: np.ndarray) -> np.ndarray:
        if self._ds_t[0] is None:
            raise ValueError("series carries no phase time derivative")
        return self._blend(self._ds_t, t, np.atleast_2d(pts))

    def phase_gradient(self, t: float, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.empty_like(pts, dtype=float)
        for i in range(self.ndim):
            out[:, i] = self._blend([g[i] for g in self._ds_x], t, pts)
        return out

    def amplitude(self, t: float, pts: np.ndarray) -> np.ndarray:
        return self._blend(self._amp, t, np.atleast_2d(pts))


class AnalyticFlow:
    """Closed-form counterpart of GriddedFlow for oracle runs.

    Supply callables of (t, pts[n,d]): velocity -> (n,d); optionally
    phase_rate -> (n,), phase_gradient -> (n,d), amplitude -> (n,).
    """

    def __init__(self, ndim: int, velocity, phase_rate=None, phase_gradient=None,
                 amplitude=None, t_span=(-math.inf, math.inf)):
        self.ndim = ndim
        self._v = velocity
        self._pr = phase_rate
        self._pg = phase_gradient
        self._a = amplitude
        self.t_min, self.t_max = t_span

    def in_domain(self, pts):
        return np.ones(np.atleast_2d(pts).shape[0], dtype=bool)

    def usable(self, t, pts):
        return self.in_domain(pts)

    def velocity(self, t, pts):
        return np.asarray(self._v(t, np.atleast_2d(pts)), dtype=float)

    def phase_rate(self, t, pts):
        if self._pr is None:
            raise ValueError("no phase rate supplied")
        return np.asarray(self._pr(t, np.atleast_2d(pts)), dtype=float)

    def phase_gradient(self, t, pts):
        if self._pg is None:
            raise ValueError("no phase gradient supplied")
        return np.asarray(self._pg(t, np.atleast_2d(pts)), dtype=float)

    def amplitude(self, t, pts):
        if self._a is None:
            raise ValueError("no amplitude supplied")
        return np.asarray(self._a(t, np.atleast_2d(pts)), dtype=float)


@dataclass
class TrajectoryBundle:
    """Ensemble integration result; recorded paths are optional."""

    t0: float
    t1: float
    dt: float
    start: np.ndarray                 # (n, d)
    end: np.ndarray                   # (n, d)
    tau: np.ndarray                   # (n,)
    phase: np.ndarray                 # (n,) accumulated along each path
    status: list[str]
    record_times: np.ndarray | None = None
    record_path: np.ndarray | None = None        # (m, n, d)
    record_velocity: np.ndarray | None = None    # (m, n, d)
    record_tau: np.ndarray | None = None         # (m, n)
    record_phase: np.ndarray | None = None       # (m, n)

    def truncated_count(self) -> int:
        return sum(1 for s in self.status if s != STATUS_COMPLETED)


@dataclass
class Trajectory:
    """A single guided path with full per-step records."""

    times: np.ndarray
    positions: np.ndarray     # (m, d)
    velocities: np.ndarray    # (m, d)
    tau: np.ndarray           # (m,)
    phase: np.ndarray         # (m,)
    status: str

    def csv_rows(self):
        from .snapshots import format_float
        d = self.positions.shape[1]
        head = ["t"] + ["z%d" % i for i in range(d)] + ["v%d" % i for i in range(d)]
        head += ["tau", "phase"]
        yield ",".join(head)
        for j in range(self.times.size):
            row = [format_float(self.times[j])]
            row += [format_float(v) for v in self.positions[j]]
            row += [format_float(v) for v in self.velocities[j]]
            row += [format_float(self.tau[j]), format_float(self.phase[j])]
            yield ",".join(row)


def _phase_rate_along(flow, t, pts, vel) -> np.ndarray:
    """d(phase)/dt following the motion: dS_t + grad S . v."""
    rate = flow.phase_rate(t, pts)
    grad = flow.phase_gradient(t, pts)
    return rate + np.sum(grad * vel, axis=-1)


def _integrate_block(flow, z0, t0, t1, n_steps, relativistic, track_phase, record_stride):
    n, d = z0.shape
    dt = (t1 - t0) / n_steps
    z = z0.astype(float).copy()
    active = flow.usable(t0, z)
    status = np.zeros(n, dtype=np.int8)
    status[~active] = 1
    tau = np.zeros(n)
    phase = np.zeros(n)
    rec_t, rec_z, rec_v, rec_tau, rec_ph = [], [], [], [], []

    def vel_at(t, pts, ok):
        v = flow.velocity(t, pts)
        v[~ok] = 0.0
        bad = ~np.isfinite(v).all(axis=-1)
        return v, bad

    def snapshot(t):
        v_now, _ = vel_at(t, z, np.ones(n, dtype=bool))
        rec_t.append(t)
        rec_z.append(z.copy())
        rec_v.append(v_now)
        rec_tau.append(tau.copy())
        rec_ph.append(phase.copy())

    if record_stride:
        snapshot(t0)
    for step in range(n_steps):
        t = t0 + step * dt
        ok = active.copy()
        k1, bad = vel_at(t, z, ok)
        if relativistic:
            # a guided point never moves at light speed; freeze instead of clipping
            bad = bad | (np.sum(k1 * k1, axis=-1) >= 1.0)
        p2 = z + 0.5 * dt * k1
        ok2 = ok & flow.usable(t + 0.5 * dt, p2)
        k2, bad2 = vel_at(t + 0.5 * dt, p2, ok2)
        p3 = z + 0.5 * dt * k2
        ok3 = ok2 & flow.usable(t + 0.5 * dt, p3)
        k3, bad3 = vel_at(t + 0.5 * dt, p3, ok3)
        p4 = z + dt * k3
        ok4 = ok3 & flow.usable(t + dt, p4)
        k4, bad4 = vel_at(t + dt, p4, ok4)
        znew = z + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ok_end = ok4 & flow.usable(t + dt, znew)
        fell_off = active & (~ok_end | bad | bad2 | bad3 | bad4)
        if np.any(fell_off):
            escaped = ~(flow.in_domain(p2) & flow.in_domain(p3)
                        & flow.in_domain(p4) & flow.in_domain(znew))
            status[fell_off & escaped] = 1
            status[fell_off & ~escaped] = 2
        move = active & ~fell_off
        if track_phase:
            r0 = _phase_rate_along(flow, t, z, k1)
            r1 = _phase_rate_along(flow, t + dt, znew, k4)
            dphi = 0.5 * (r0 + r1) * dt
            phase[move] += dphi[move]
        if relativistic:
            s0 = np.sqrt(np.clip(1.0 - np.sum(k1 * k1, axis=-1), 0.0, None))
            s1 = np.sqrt(np.clip(1.0 - np.sum(k4 * k4, axis=-1), 0.0, None))
            dta = 0.5 * (s0 + s1) * dt
        else:
            dta = np.full(n, dt)
        tau[move] += dta[move]
        z[move] = znew[move]
        active = move
        if record_stride and ((step + 1) % record_stride == 0 or step == n_steps - 1):
            snapshot(t + dt)
    return z, tau, phase, status, (rec_t, rec_z, rec_v, rec_tau, rec_ph)


def integrate_ensemble(
    flow,
    z0: np.ndarray,
    t0: float,
    t1: float,
    dt: float,
    *,
    relativistic: bool = False,
    track_phase: bool = False,
    record_stride: int = 0,
    threads: int = 1,
) -> TrajectoryBundle:
    """RK4 transport of many seeds through the flow.

    Results are bitwise independent of `threads`: particles are processed in
    fixed blocks of 1024 and every arithmetic path is per-particle.
    """
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    n = z0.shape[0]
    n_steps = max(1, int(round((t1 - t0) / dt)))
    blocks = [(i, min(i + _CHUNK, n)) for i in range(0, n, _CHUNK)]

    def work(b):
        lo, hi = b
        return _integrate_block(flow, z0[lo:hi], t0, t1, n_steps,
                                relativistic, track_phase, record_stride)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    end = np.vstack([r[0] for r in results])
    tau = np.concatenate([r[1] for r in results])
    phase = np.concatenate([r[2] for r in results])
    codes = np.concatenate([r[3] for r in results])
    names = {0: STATUS_COMPLETED, 1: STATUS_LEFT_DOMAIN, 2: STATUS_MASKED}
    status = [names[int(c)] for c in codes]
    bundle = TrajectoryBundle(t0=t0, t1=t1, dt=(t1 - t0) / n_steps, start=z0,
                              end=end, tau=tau, phase=phase, status=status)
    if record_stride:
        rec_t = results[0][4][0]
        bundle.record_times = np.asarray(rec_t)
        bundle.record_path = np.concatenate(
            [np.stack(r[4][1], axis=0) for r in results], axis=1)
        bundle.record_velocity = np.concatenate(
            [np.stack(r[4][2], axis=0) for r in results], axis=1)
        bundle.record_tau = np.concatenate(
            [np.stack(r[4][3], axis=0) for r in results], axis=1)
        bundle.record_phase = np.concatenate(
            [np.stack(r[4][4], axis=0) for r in results], axis=1)
    return bundle


def integrate_trajectory(flow, z0, t0: float, t1: float, dt: float,
                         *, relativistic: bool = False,
                         track_phase: bool = True) -> Trajectory:
    """Single guided path with every step recorded."""
    bundle = integrate_ensemble(flow, np.atleast_2d(z0), t0, t1, dt,
                                relativistic=relativistic, track_phase=track_phase,
                                record_stride=1)
    return Trajectory(
        times=bundle.record_times,
        positions=bundle.record_path[:, 0, :],
        velocities=bundle.record_velocity[:, 0, :],
        tau=bundle.record_tau[:, 0],
        phase=bundle.record_phase[:, 0],
        status=bundle.status[0],
    )


def internal_clock_check(traj: Trajectory, omega0: float) -> dict:
    """Compare the accumulated phase rate against the proper-time clock -omega0."""
    dphi = np.diff(traj.phase)
    dtau = np.diff(traj.tau)
    good = dtau > 0
    rate = dphi[good] / dtau[good]
    dev = np.abs(rate + omega0)
    total = abs((traj.phase[-1] - traj.phase[0]) / (traj.tau[-1] - traj.tau[0]) + omega0)
    return {
        "max_step_deviation": float(np.max(dev)) if dev.size else float("nan"),
        "mean_step_deviation": float(np.mean(dev)) if dev.size else float("nan"),
        "path_deviation": total,
        "steps": int(dev.size),
    }


# ---------------------------------------------------------------------------
# ensembles and equivariance

def sample_ensemble(grid: GridSpec, density: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Inverse-CDF draw of n positions from a gridded density (cellwise constant)."""
    if np.any(density < 0):
        raise ValueError("density must be nonnegative")
    total = float(density.sum())
    if total <= 0:
        raise ValueError("density vanishes")
    rng = np.random.default_rng(seed)
    flat = density.ravel() / total
    cdf = np.cumsum(flat)
    cdf[-1] = 1.0
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="left")
    coords = np.unravel_index(idx, grid.shape)
    h = np.array(grid.spacing)
    lo = np.array([e[0] for e in grid.extents])
    hi = np.array([e[1] for e in grid.extents])
    jitter = rng.random((n, grid.ndim)) - 0.5
    pts = np.stack([lo[i] + coords[i] * h[i] for i in range(grid.ndim)], axis=1)
    pts = pts + jitter * h
    return np.clip(pts, lo, hi)


def density_histogram(grid: GridSpec, density: np.ndarray, edges: np.ndarray,
                      axis: int = 0) -> np.ndarray:
    """Bin the gridded density along one axis (marginalizing the others)."""
    x = grid.axes()[axis]
    w = density.copy()
    for ax in range(grid.ndim - 1, -1, -1):
        if ax != axis:
            w = w.sum(axis=ax)
    q = np.zeros(edges.size - 1)
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, -1, edges.size - 2)
    for i, b in enumerate(which):
        if 0 <= b < q.size and edges[0] <= x[i] <= edges[-1]:
            q[b] += w[i]
    s = q.sum()
    return q / s if s > 0 else q


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def multinomial_tv_floor(q: np.ndarray, n: int) -> float:
    """Expected TV distance of an n-sample multinomial draw from q."""
    return 0.5 * float(np.sum(np.sqrt(2.0 * q * (1.0 - q) / (math.pi * n))))


def equivariance_test(grid: GridSpec, density: np.ndarray, positions: np.ndarray,
                      bins: int = 32, axis: int = 0,
                      window: tuple[float, float] | None = None) -> dict:
    """TV distance between transported points and the wave's own density.

    The histogram window defaults to the region holding essentially all of
    the gridded density (0.0001 to 0.9999 quantiles along the axis).
    """
    if bins > 64:
        raise ValueError("use at most 64 bins")
    x = grid.axes()[axis]
    w = density.copy()
    for ax in range(grid.ndim - 1, -1, -1):
        if ax != axis:
            w = w.sum(axis=ax)
    if window is None:
        cw = np.cumsum(w) / w.sum()
        i0 = int(np.searchsorted(cw, 1e-4))
        i1 = int(np.searchsorted(cw, 1.0 - 1e-4))
        window = (float(x[max(i0 - 1, 0)]), float(x[min(i1 + 1, x.size - 1)]))
    edges = np.linspace(window[0], window[1], bins + 1)
    q = density_histogram(grid, density, edges, axis)
    pos = np.atleast_2d(positions)[:, axis]
    counts, _ = np.histogram(pos, bins=edges)
    kept = int(counts.sum())
    p = counts / kept if kept else counts.astype(float)
    tv = total_variation(p, q)
    floor = multinomial_tv_floor(q, max(kept, 1))
    return {
        "bins": bins,
        "window": [window[0], window[1]],
        "tv_distance": tv,
        "sampling_floor": floor,
        "n_in_window": kept,
        "n_total": int(np.atleast_2d(positions).shape[0]),
    }


def no_crossing_violations(start: np.ndarray, end: np.ndarray) -> int:
    """Count order inversions between 1D start and end positions (0 = no crossing)."""
    s = np.asarray(start).ravel()
    e = np.asarray(end).ravel()
    order = np.argsort(s, kind="stable")
    diffs = np.diff(e[order])
    return int(np.sum(diffs < -1e-12))
