"""Scenario pipelines behind the command line.

Each scenario resolves its parameters from a parsed config (validating
ranges with line-accurate errors), then exposes two entry points: simulate
(produce snapshots, trajectories, ensemble summaries, a manifest) and verify
(run the scenario's check list and write one JSON report per check, plus
figures). Both are deterministic for a fixed config and seed; worker count
never changes any CSV or JSON byte.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import figures
from .analytic import (
    FreeGaussian,
    HarmonicGround,
    MonopoleSpec,
    PlanePhaseWave,
    boost_event,
    boost_phase,
    eval_monopole,
    fit_loglog_order,
    helmholtz_multipole,
    residual_oracle,
)
from .config import Config, ConfigError
from .evolve import (
    NumericalDivergenceError,
    SchrodingerPropagator,
    check_cfl,
    kg_energy,
    kg_step,
    kg_taylor_start,
)
from .fields import (
    Boundary,
    FourPotential,
    GridSpec,
    ScalarComplexField,
    StencilConfig,
    sample,
)
from .guidance import (
    AnalyticFlow,
    GriddedFlow,
    STATUS_COMPLETED,
    equivariance_test,
    integrate_ensemble,
    integrate_trajectory,
    internal_clock_check,
    multinomial_tv_floor,
    no_crossing_violations,
    sample_ensemble,
)
from .madelung import continuity_residual, decompose, quantum_potential
from .reports import write_csv, write_json, write_manifest
from .singular import (
    SingularWaveSpec,
    comoving_helmholtz_construct,
    construct_u,
    f_transport_check,
    make_path,
    perrin_diagnostic,
    transport_integral_check,
    weak_guidance_residual,
)
from .snapshots import write_snapshot

SCENARIO_NAMES = (
    "plane_wave",
    "free_gaussian",
    "double_gaussian_interference",
    "harmonic_oscillator",
    "moving_monopole",
    "comoving_helmholtz",
    "perrin_spreading",
)


class DivergenceAbort(RuntimeError):
    """Numerical blow-up; carries the last good checkpoint path."""

    def __init__(self, message: str, checkpoint: str | None):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass
class RunContext:
    cfg: Config
    config_text: str
    out_dir: str
    seed: int
    threads: int
    outputs: list = field(default_factory=list)

    def path(self, name: str) -> str:
        self.outputs.append(name)
        return os.path.join(self.out_dir, name)


def scenario_name(cfg: Config) -> str:
    name = cfg.get_str("scenario", "name", None)
    if name is None:
        raise ConfigError("missing required key 'name' in section [scenario]", cfg.path)
    if name not in SCENARIO_NAMES:
        cfg.fail("scenario", "name",
                 "unknown scenario %r (choose from %s)" % (name, ", ".join(SCENARIO_NAMES)))
    return name


def _cols(pts: np.ndarray):
    pts = np.atleast_2d(pts)
    return [pts[:, i] for i in range(pts.shape[1])]


def _subluminal(cfg: Config, section: str, key: str, velocity) -> None:
    speed = float(np.linalg.norm(velocity))
    if speed >= 1.0:
        cfg.fail(section, key,
                 "superluminal boost: |velocity| = %g must be < 1" % speed)


def _line_grid(extent, points, dt, boundary) -> GridSpec:
    return GridSpec(extents=((float(extent[0]), float(extent[1])),),
                    points=(int(points),), dt=float(dt), boundary=boundary)


# ---------------------------------------------------------------------------
# plane_wave


def _plane_wave_params(cfg: Config) -> dict:
    omega0 = cfg.get_float("wave", "omega0", 1.0)
    velocity = cfg.get_floats("wave", "velocity", [0.6])
    if omega0 <= 0:
        cfg.fail("wave", "omega0", "omega0 must be positive")
    if not 1 <= len(velocity) <= 3:
        cfg.fail("wave", "velocity", "velocity needs 1 to 3 components")
    _subluminal(cfg, "wave", "velocity", velocity)
    return {
        "omega0": omega0,
        "velocity": tuple(velocity),
        "t_end": cfg.get_float("run", "t_end", 20.0),
        "steps": cfg.get_int("run", "steps", 400),
        "clock_tol": cfg.get_float("tolerances", "clock", 1e-8),
        "dispersion_tol": cfg.get_float("tolerances", "dispersion", 1e-12),
        "line_tol": cfg.get_float("tolerances", "straight_line", 1e-9),
    }


def _plane_wave_flow(p: dict) -> tuple[PlanePhaseWave, AnalyticFlow]:
    wave = PlanePhaseWave(p["omega0"], p["velocity"])
    v = np.asarray(p["velocity"])
    k = wave.wavevector
    omega = wave.omega

    def vel(t, pts):
        return np.broadcast_to(v, np.atleast_2d(pts).shape).copy()

    def rate(t, pts):
        return np.full(np.atleast_2d(pts).shape[0], -omega)

    def grad(t, pts):
        return np.broadcast_to(k, np.atleast_2d(pts).shape).copy()

    def amp(t, pts):
        return np.ones(np.atleast_2d(pts).shape[0])

    return wave, AnalyticFlow(len(v), vel, rate, grad, amp)


def _simulate_plane_wave(ctx: RunContext) -> dict:
    p = _plane_wave_params(ctx.cfg)
    wave, flow = _plane_wave_flow(p)
    d = len(p["velocity"])
    grid = GridSpec(extents=tuple((0.0, 8.0) for _ in range(d)),
                    points=tuple(65 for _ in range(d)),
                    dt=p["t_end"] / p["steps"], boundary=Boundary.PERIODIC)
    for i, t in enumerate((0.0, 0.5 * p["t_end"], p["t_end"])):
        fld = sample(grid, lambda tt, *mesh: wave.values(tt, mesh), t, name="psi")
        write_snapshot(ctx.path("snapshot_%02d.dwf" % i), fld)
    traj = integrate_trajectory(flow, np.zeros(d), 0.0, p["t_end"],
                                p["t_end"] / p["steps"], relativistic=True)
    with open(ctx.path("trajectory_00.csv"), "w", encoding="utf-8", newline="\n") as fh:
        for line in traj.csv_rows():
            fh.write(line + "\n")
    write_json(ctx.path("summary.json"), {
        "scenario": "plane_wave",
        "omega": wave.omega,
        "wavevector": list(wave.wavevector),
        "gamma": wave.gamma,
        "clock_pulsation": wave.clock_pulsation,
        "dispersion_residual": wave.dispersion_residual(),
    })
    return {"snapshots": 3, "trajectories": 1}


def _verify_plane_wave(ctx: RunContext) -> list[dict]:
    p = _plane_wave_params(ctx.cfg)
    wave, flow = _plane_wave_flow(p)
    d = len(p["velocity"])
    checks = []

    residual = wave.dispersion_residual()
    checks.append({
        "check_name": "dispersion",
        "omega": wave.omega,
        "k_magnitude": float(np.linalg.norm(wave.wavevector)),
        "gamma": wave.gamma,
        "residual": residual,
        "pass": bool(residual < p["dispersion_tol"]),
        "tolerances": {"dispersion": p["dispersion_tol"]},
    })

    traj = integrate_trajectory(flow, np.zeros(d), 0.0, p["t_end"],
                                p["t_end"] / p["steps"], relativistic=True)
    clock = internal_clock_check(traj, p["omega0"])
    checks.append({
        "check_name": "internal_clock",
        **clock,
        "pass": bool(clock["max_step_deviation"] < p["clock_tol"]),
        "tolerances": {"clock": p["clock_tol"]},
    })

    v = np.asarray(p["velocity"])
    exact = traj.times[:, None] * v[None, :]
    line_dev = float(np.max(np.abs(traj.positions - exact)))
    checks.append({
        "check_name": "straight_line",
        "max_deviation": line_dev,
        "pass": bool(line_dev < p["line_tol"]),
        "tolerances": {"straight_line": p["line_tol"]},
    })

    # phase is a Lorentz scalar: the boosted rest phase must match k.x - w t
    axes = [np.linspace(0.0, 5.0, 7) for _ in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    direct = wave.phase(1.7, mesh)
    boosted = boost_phase(wave, 1.7, mesh)
    phase_dev = float(np.max(np.abs(direct - boosted)))
    checks.append({
        "check_name": "boost_phase_invariance",
        "max_deviation": phase_dev,
        "pass": bool(phase_dev < 1e-9),
        "tolerances": {"phase": 1e-9},
    })

    figures.save_series(ctx.path("figure_clock.png"), traj.times[1:],
                        {"d(phase)/d(tau)": np.diff(traj.phase) / np.diff(traj.tau)},
                        xlabel="t", ylabel="phase rate",
                        title="internal clock along the guided line")
    return checks


# ---------------------------------------------------------------------------
# nonrelativistic envelope evolutions (shared machinery)


@dataclass
class EvolvedLine:
    grid: GridSpec
    mass: float
    dt: float
    steps: int
    save_steps: list
    fields: dict          # step -> ScalarComplexField
    polars: list          # PolarFields at save steps
    norms: list


def _evolve_line(grid: GridSpec, psi0: ScalarComplexField, mass: float,
                 steps: int, stride: int, potential: np.ndarray | None,
                 checkpoint_path: str | None = None) -> EvolvedLine:
    prop = SchrodingerPropagator(grid, mass=mass, potential=potential)
    saves = list(range(0, steps + 1, stride))
    if saves[-1] != steps:
        saves.append(steps)
    needed = set()
    for s in saves:
        needed.update((s - 1, s, s + 1))
    stash = {0: psi0, -1: prop.reversed().step(psi0)}
    last_good = psi0
    fld = psi0
    try:
        step_index = 0
        for fld in prop.evolve(psi0, steps + 1):
            step_index += 1
            if step_index in needed:
                stash[step_index] = fld
            if step_index % stride == 0:
                last_good = fld
    except NumericalDivergenceError as exc:
        path = None
        if checkpoint_path is not None:
            write_snapshot(checkpoint_path, last_good)
            path = checkpoint_path
        raise DivergenceAbort(str(exc), path) from exc
    cfg = StencilConfig()
    polars = [decompose(stash[s], stash[s - 1], stash[s + 1],
                        regime="nonrelativistic", omega0=mass, cfg=cfg)
              for s in saves]
    norms = [stash[s].norm_squared() for s in saves]
    return EvolvedLine(grid=grid, mass=mass, dt=prop.dt, steps=steps,
                       save_steps=saves, fields={s: stash[s] for s in saves},
                       polars=polars, norms=norms)


def _gaussian_params(cfg: Config) -> dict:
    sigma0 = cfg.get_float("wave", "sigma0", 1.0)
    mass = cfg.get_float("wave", "mass", 1.0)
    if sigma0 <= 0:
        cfg.fail("wave", "sigma0", "sigma0 must be positive")
    if mass <= 0:
        cfg.fail("wave", "mass", "mass must be positive")
    fg = FreeGaussian(dims=1, sigma0=sigma0, mass=mass,
                      center=(cfg.get_float("wave", "center", 0.0),))
    t_end = cfg.get_float("run", "t_end", fg.doubling_time())
    steps = cfg.get_int("run", "steps", 1000)
    stride = cfg.get_int("run", "save_stride", 100)
    traj_factor = cfg.get_int("run", "traj_dt_factor", 5)
    if steps % stride != 0:
        cfg.fail("run", "save_stride", "save_stride must divide steps")
    if stride % traj_factor != 0:
        cfg.fail("run", "traj_dt_factor", "traj_dt_factor must divide save_stride")
    extent = cfg.get_floats("grid", "extent", [-12.0, 12.0])
    points = cfg.get_int("grid", "points", 601)
    return {
        "fg": fg, "mass": mass, "t_end": t_end, "steps": steps, "stride": stride,
        "traj_factor": traj_factor,
        "grid": _line_grid(extent, points, t_end / steps, Boundary.PERIODIC),
        "n_ensemble": cfg.get_int("ensemble", "n", 10000),
        "bins": cfg.get_int("ensemble", "bins", 32),
        "n_paths": cfg.get_int("ensemble", "paths", 9),
        "tv_tol": cfg.get_float("tolerances", "tv", 0.03),
        "norm_tol": cfg.get_float("tolerances", "norm_drift", 1e-8),
        "continuity_tol": cfg.get_float("tolerances", "continuity", 1e-6),
        "streamline_tol": cfg.get_float("tolerances", "streamline", 0.01),
    }


def _transport_ensemble(ctx: RunContext, p: dict, line: EvolvedLine):
    """Sample |psi(0)|^2, push the ensemble to t_end, record at save times."""
    flow = GriddedFlow(line.polars)
    density0 = line.polars[0].amplitude ** 2
    starts = sample_ensemble(line.grid, density0, p["n_ensemble"], ctx.seed)
    traj_dt = line.dt * p["traj_factor"]
    record_stride = p["stride"] // p["traj_factor"]
    bundle = integrate_ensemble(flow, starts, 0.0, p["t_end"], traj_dt,
                                record_stride=record_stride, threads=ctx.threads)
    return flow, bundle


def _tv_series(p: dict, line: EvolvedLine, bundle) -> list[dict]:
    out = []
    for k, polar in enumerate(line.polars):
        pos = bundle.record_path[k]
        out.append(equivariance_test(line.grid, polar.amplitude ** 2, pos,
                                     bins=p["bins"]))
    return out


def _quantile_starts(grid: GridSpec, density: np.ndarray, qs) -> np.ndarray:
    w = density / density.sum()
    cdf = np.cumsum(w)
    x = grid.axes()[0]
    return np.interp(qs, cdf, x)


def _write_trajectories(ctx: RunContext, flow, starts, t_end, dt,
                        prefix: str = "trajectory") -> list:
    trajs = []
    for i, x0 in enumerate(np.atleast_1d(starts)):
        traj = integrate_trajectory(flow, np.atleast_1d(x0), 0.0, t_end, dt)
        trajs.append(traj)
        name = "%s_%02d.csv" % (prefix, i)
        with open(ctx.path(name), "w", encoding="utf-8", newline="\n") as fh:
            for line_text in traj.csv_rows():
                fh.write(line_text + "\n")
    return trajs


def _simulate_free_gaussian(ctx: RunContext) -> dict:
    p = _gaussian_params(ctx.cfg)
    grid = p["grid"]
    fg = p["fg"]
    psi0 = sample(grid, fg.psi, 0.0, name="psi")
    line = _evolve_line(grid, psi0, p["mass"], p["steps"], p["stride"], None,
                        checkpoint_path=os.path.join(ctx.out_dir, "checkpoint_last_good.dwf"))
    for s in line.save_steps:
        write_snapshot(ctx.path("snapshot_%06d.dwf" % s), line.fields[s])
    write_csv(ctx.path("norms.csv"), ["t", "norm"],
              [(s * line.dt, n) for s, n in zip(line.save_steps, line.norms)])
    flow, bundle = _transport_ensemble(ctx, p, line)
    tv = _tv_series(p, line, bundle)
    write_json(ctx.path("ensemble.json"), {
        "n": p["n_ensemble"],
        "seed": ctx.seed,
        "tv_distance_series": [r["tv_distance"] for r in tv],
        "sampling_floor_series": [r["sampling_floor"] for r in tv],
        "truncated_count": bundle.truncated_count(),
    })
    starts = _quantile_starts(grid, line.polars[0].amplitude ** 2,
                              np.linspace(0.1, 0.9, p["n_paths"]))
    _write_trajectories(ctx, flow, starts, p["t_end"], line.dt * p["traj_factor"])
    figures.save_heatmap(ctx.path("figure_final_amplitude.png"),
                         line.fields[line.save_steps[-1]],
                         title="amplitude at t=%.3f" % p["t_end"])
    return {"saves": len(line.save_steps), "truncated": bundle.truncated_count()}


def _verify_free_gaussian(ctx: RunContext) -> list[dict]:
    p = _gaussian_params(ctx.cfg)
    grid = p["grid"]
    fg = p["fg"]
    psi0 = sample(grid, fg.psi, 0.0, name="psi")
    line = _evolve_line(grid, psi0, p["mass"], p["steps"], p["stride"], None)
    checks = []

    drift = max(abs(n / line.norms[0] - 1.0) for n in line.norms)
    checks.append({
        "check_name": "norm_conservation",
        "max_drift": drift,
        "steps": p["steps"],
        "pass": bool(drift < p["norm_tol"]),
        "tolerances": {"norm_drift": p["norm_tol"]},
    })

    worst = 0.0
    for polar in line.polars:
        _, integral = continuity_residual(polar)
        worst = max(worst, abs(integral))
    checks.append({
        "check_name": "continuity",
        "max_integral": worst,
        "pass": bool(worst < p["continuity_tol"]),
        "tolerances": {"continuity": p["continuity_tol"]},
    })

    flow, bundle = _transport_ensemble(ctx, p, line)
    tv = _tv_series(p, line, bundle)
    floors = [r["sampling_floor"] for r in tv]
    tvs = [r["tv_distance"] for r in tv]
    within_floor = all(t <= 3.0 * f for t, f in zip(tvs, floors))
    checks.append({
        "check_name": "equivariance",
        "tv_distance_series": tvs,
        "sampling_floor_series": floors,
        "final_tv": tvs[-1],
        "within_3x_floor": within_floor,
        "truncated_count": bundle.truncated_count(),
        "pass": bool(tvs[-1] <= p["tv_tol"] and within_floor),
        "tolerances": {"tv": p["tv_tol"], "floor_factor": 3.0},
    })

    done = np.array([s == STATUS_COMPLETED for s in bundle.status])
    violations = no_crossing_violations(bundle.start[done, 0], bundle.end[done, 0])
    checks.append({
        "check_name": "no_crossing",
        "violations": violations,
        "pairs": int(np.count_nonzero(done)),
        "pass": bool(violations == 0),
        "tolerances": {"violations": 0},
    })

    starts = _quantile_starts(grid, line.polars[0].amplitude ** 2,
                              np.linspace(0.1, 0.9, p["n_paths"]))
    dilation = fg.sigma(p["t_end"]) / fg.sigma(0.0)
    c = fg.center[0]
    worst_rel = 0.0
    ends = []
    for x0 in starts:
        traj = integrate_trajectory(flow, np.atleast_1d(x0), 0.0, p["t_end"],
                                    line.dt * p["traj_factor"], track_phase=False)
        x_exact = c + (x0 - c) * dilation
        scale = max(abs(x_exact), fg.sigma(p["t_end"]))
        worst_rel = max(worst_rel, abs(traj.positions[-1, 0] - x_exact) / scale)
        ends.append(traj)
    checks.append({
        "check_name": "streamline_dilation",
        "max_rel_error": worst_rel,
        "paths": len(starts),
        "pass": bool(worst_rel < p["streamline_tol"]),
        "tolerances": {"streamline": p["streamline_tol"]},
    })

    ts = [s * line.dt for s in line.save_steps]
    figures.save_series(ctx.path("figure_tv_series.png"), ts,
                        {"tv": tvs, "3x floor": [3 * f for f in floors]},
                        xlabel="t", ylabel="total variation",
                        title="ensemble vs wave density")
    fan = np.stack([t.positions[:, 0] for t in ends], axis=1)
    figures.save_trajectories(ctx.path("figure_streamlines.png"),
                              ends[0].times, fan, title="guided streamlines")
    return checks


# ---------------------------------------------------------------------------
# double_gaussian_interference


def _double_gaussian_params(cfg: Config) -> dict:
    sigma0 = cfg.get_float("wave", "sigma0", 0.7)
    half_sep = 0.5 * cfg.get_float("wave", "separation", 6.0)
    mass = cfg.get_float("wave", "mass", 1.0)
    if sigma0 <= 0:
        cfg.fail("wave", "sigma0", "sigma0 must be positive")
    if half_sep <= 0:
        cfg.fail("wave", "separation", "separation must be positive")
    t_end = cfg.get_float("run", "t_end", 4.1)
    steps = cfg.get_int("run", "steps", 1000)
    stride = cfg.get_int("run", "save_stride", 100)
    traj_factor = cfg.get_int("run", "traj_dt_factor", 5)
    if steps % stride != 0:
        cfg.fail("run", "save_stride", "save_stride must divide steps")
    if stride % traj_factor != 0:
        cfg.fail("run", "traj_dt_factor", "traj_dt_factor must divide save_stride")
    extent = cfg.get_floats("grid", "extent", [-20.0, 20.0])
    points = cfg.get_int("grid", "points", 1001)
    return {
        "lobes": (FreeGaussian(dims=1, sigma0=sigma0, mass=mass, center=(-half_sep,)),
                  FreeGaussian(dims=1, sigma0=sigma0, mass=mass, center=(half_sep,))),
        "mass": mass, "t_end": t_end, "steps": steps, "stride": stride,
        "traj_factor": traj_factor,
        "grid": _line_grid(extent, points, t_end / steps, Boundary.PERIODIC),
        "n_ensemble": cfg.get_int("ensemble", "n", 10000),
        "bins": cfg.get_int("ensemble", "bins", 32),
        "n_paths": cfg.get_int("ensemble", "paths", 9),
        "tv_tol": cfg.get_float("tolerances", "tv", 0.05),
        "norm_tol": cfg.get_float("tolerances", "norm_drift", 1e-8),
        "axis_tol": cfg.get_float("tolerances", "symmetry_axis", 1e-9),
        "closed_form_tol": cfg.get_float("tolerances", "closed_form", 0.03),
    }


def _double_gaussian_initial(p: dict, grid: GridSpec) -> ScalarComplexField:
    ga, gb = p["lobes"]
    raw = sample(grid, lambda t, x: ga.psi(t, x) + gb.psi(t, x), 0.0, name="psi")
    norm = math.sqrt(raw.norm_squared())
    return raw.with_values(raw.values / norm)


def _simulate_double_gaussian(ctx: RunContext) -> dict:
    p = _double_gaussian_params(ctx.cfg)
    grid = p["grid"]
    psi0 = _double_gaussian_initial(p, grid)
    line = _evolve_line(grid, psi0, p["mass"], p["steps"], p["stride"], None,
                        checkpoint_path=os.path.join(ctx.out_dir, "checkpoint_last_good.dwf"))
    for s in line.save_steps:
        write_snapshot(ctx.path("snapshot_%06d.dwf" % s), line.fields[s])
    flow, bundle = _transport_ensemble(ctx, p, line)
    tv = _tv_series(p, line, bundle)
    write_json(ctx.path("ensemble.json"), {
        "n": p["n_ensemble"],
        "seed": ctx.seed,
        "tv_distance_series": [r["tv_distance"] for r in tv],
        "sampling_floor_series": [r["sampling_floor"] for r in tv],
        "truncated_count": bundle.truncated_count(),
    })
    starts = _quantile_starts(grid, line.polars[0].amplitude ** 2,
                              np.linspace(0.05, 0.95, p["n_paths"]))
    _write_trajectories(ctx, flow, starts, p["t_end"], line.dt * p["traj_factor"])
    figures.save_heatmap(ctx.path("figure_final_amplitude.png"),
                         line.fields[line.save_steps[-1]],
                         title="interference at t=%.3f" % p["t_end"])
    return {"saves": len(line.save_steps), "truncated": bundle.truncated_count()}


def _verify_double_gaussian(ctx: RunContext) -> list[dict]:
    p = _double_gaussian_params(ctx.cfg)
    grid = p["grid"]
    psi0 = _double_gaussian_initial(p, grid)
    line = _evolve_line(grid, psi0, p["mass"], p["steps"], p["stride"], None)
    checks = []

    drift = max(abs(n / line.norms[0] - 1.0) for n in line.norms)
    checks.append({
        "check_name": "norm_conservation",
        "max_drift": drift,
        "pass": bool(drift < p["norm_tol"]),
        "tolerances": {"norm_drift": p["norm_tol"]},
    })

    # linearity: the evolved superposition must match the summed closed forms
    ga, gb = p["lobes"]
    final = line.fields[line.save_steps[-1]]
    exact = sample(grid, lambda t, x: ga.psi(t, x) + gb.psi(t, x),
                   p["t_end"], name="psi")
    norm = math.sqrt(exact.norm_squared())
    dev = float(np.max(np.abs(final.values - exact.values / norm)))
    scale = float(np.max(np.abs(exact.values / norm)))
    checks.append({
        "check_name": "closed_form_agreement",
        "max_error": dev,
        "relative": dev / scale,
        "pass": bool(dev / scale < p["closed_form_tol"]),
        "tolerances": {"closed_form": p["closed_form_tol"]},
    })

    flow, bundle = _transport_ensemble(ctx, p, line)
    tv = _tv_series(p, line, bundle)
    tvs = [r["tv_distance"] for r in tv]
    floors = [r["sampling_floor"] for r in tv]
    checks.append({
        "check_name": "equivariance_interference",
        "tv_distance_series": tvs,
        "sampling_floor_series": floors,
        "final_tv": tvs[-1],
        "truncated_count": bundle.truncated_count(),
        "pass": bool(tvs[-1] <= p["tv_tol"]),
        "tolerances": {"tv": p["tv_tol"]},
    })

    done = np.array([s == STATUS_COMPLETED for s in bundle.status])
    violations = no_crossing_violations(bundle.start[done, 0], bundle.end[done, 0])
    checks.append({
        "check_name": "no_crossing",
        "violations": violations,
        "pass": bool(violations == 0),
        "tolerances": {"violations": 0},
    })

    axis = integrate_trajectory(flow, np.zeros(1), 0.0, p["t_end"],
                                line.dt * p["traj_factor"], track_phase=False)
    axis_dev = float(np.max(np.abs(axis.positions[:, 0])))
    checks.append({
        "check_name": "symmetry_axis_pinned",
        "max_excursion": axis_dev,
        "pass": bool(axis_dev < p["axis_tol"]),
        "tolerances": {"symmetry_axis": p["axis_tol"]},
    })

    ts = [s * line.dt for s in line.save_steps]
    figures.save_series(ctx.path("figure_tv_series.png"), ts,
                        {"tv": tvs, "3x floor": [3 * f for f in floors]},
                        xlabel="t", ylabel="total variation",
                        title="interference equivariance")
    return checks


# ---------------------------------------------------------------------------
# harmonic_oscillator


def _harmonic_params(cfg: Config) -> dict:
    omega = cfg.get_float("wave", "omega", 1.0)
    mass = cfg.get_float("wave", "mass", 1.0)
    if omega <= 0:
        cfg.fail("wave", "omega", "omega must be positive")
    if mass <= 0:
        cfg.fail("wave", "mass", "mass must be positive")
    steps = cfg.get_int("run", "steps", 500)
    stride = cfg.get_int("run", "save_stride", 100)
    t_end = cfg.get_float("run", "t_end", 2.0 * math.pi / omega)
    if steps % stride != 0:
        cfg.fail("run", "save_stride", "save_stride must divide steps")
    extent = cfg.get_floats("grid", "extent", [-8.0, 8.0])
    points = cfg.get_int("grid", "points", 1601)
    return {
        "ground": HarmonicGround(omega=omega, mass=mass, dims=1),
        "omega": omega, "mass": mass, "t_end": t_end, "steps": steps,
        "stride": stride, "traj_factor": cfg.get_int("run", "traj_dt_factor", 10),
        "grid": _line_grid(extent, points, t_end / steps, Boundary.DIRICHLET_ZERO),
        "identity_window": cfg.get_float("verify", "identity_window", 3.5),
        "identity_h": cfg.get_float("verify", "identity_h", 0.005),
        "n_ensemble": cfg.get_int("ensemble", "n", 2000),
        "bins": cfg.get_int("ensemble", "bins", 32),
        "identity_tol": cfg.get_float("tolerances", "q_identity", 1e-6),
        "norm_tol": cfg.get_float("tolerances", "norm_drift", 1e-8),
        "stationary_tol": cfg.get_float("tolerances", "stationarity", 1e-3),
    }


def _harmonic_line(p: dict) -> EvolvedLine:
    grid = p["grid"]
    ground = p["ground"]
    psi0 = sample(grid, ground.psi, 0.0, name="psi")
    V = np.real(sample(grid, lambda t, x: ground.potential(x) + 0j, 0.0).values)
    if p["stride"] % p["traj_factor"] != 0:
        raise ConfigError("traj_dt_factor must divide save_stride")
    return _evolve_line(grid, psi0, p["mass"], p["steps"], p["stride"], V)


def _simulate_harmonic(ctx: RunContext) -> dict:
    p = _harmonic_params(ctx.cfg)
    line = _harmonic_line(p)
    for s in line.save_steps:
        write_snapshot(ctx.path("snapshot_%06d.dwf" % s), line.fields[s])
    write_csv(ctx.path("norms.csv"), ["t", "norm"],
              [(s * line.dt, n) for s, n in zip(line.save_steps, line.norms)])
    figures.save_heatmap(ctx.path("figure_final_amplitude.png"),
                         line.fields[line.save_steps[-1]],
                         title="stationary state after one period")
    return {"saves": len(line.save_steps)}


def _verify_harmonic(ctx: RunContext) -> list[dict]:
    p = _harmonic_params(ctx.cfg)
    ground = p["ground"]
    checks = []

    # pointwise energy identity from the analytic amplitude through the
    # finite-difference pipeline (fourth-order stencil, edge band excluded)
    w = p["identity_window"]
    h = p["identity_h"]
    n_half = int(round((w + 0.5) / h))
    fine = _line_grid((-n_half * h, n_half * h), 2 * n_half + 1, 1.0,
                      Boundary.DIRICHLET_ZERO)
    amp = sample(fine, lambda t, x: ground.amplitude(x) + 0j, 0.0, name="amplitude")
    cfg4 = StencilConfig(order=4)
    polar = decompose(amp, regime="nonrelativistic", omega0=p["mass"], cfg=cfg4)
    q = quantum_potential(polar, cfg4)
    x = fine.axes()[0]
    inside = np.abs(x) <= w
    total = q[inside] + np.real(ground.potential(x[inside]))
    identity_dev = float(np.max(np.abs(total - 0.5 * p["omega"])))
    checks.append({
        "check_name": "quantum_potential_identity",
        "max_deviation": identity_dev,
        "expected": 0.5 * p["omega"],
        "window": w,
        "pass": bool(identity_dev < p["identity_tol"]),
        "tolerances": {"q_identity": p["identity_tol"]},
    })

    line = _harmonic_line(p)
    drift = max(abs(n / line.norms[0] - 1.0) for n in line.norms)
    checks.append({
        "check_name": "norm_conservation",
        "max_drift": drift,
        "pass": bool(drift < p["norm_tol"]),
        "tolerances": {"norm_drift": p["norm_tol"]},
    })

    a0 = np.abs(line.fields[0].values)
    aT = np.abs(line.fields[line.save_steps[-1]].values)
    wobble = float(np.max(np.abs(aT - a0)) / np.max(a0))
    checks.append({
        "check_name": "stationarity",
        "max_amplitude_change": wobble,
        "pass": bool(wobble < p["stationary_tol"]),
        "tolerances": {"stationarity": p["stationary_tol"]},
    })

    gp = dict(p)
    gp["n_paths"] = 0
    flow, bundle = _transport_ensemble(ctx, gp, line)
    tv = _tv_series(gp, line, bundle)
    tvs = [r["tv_distance"] for r in tv]
    floors = [r["sampling_floor"] for r in tv]
    ok = all(t <= 3.0 * f for t, f in zip(tvs, floors))
    checks.append({
        "check_name": "static_equivariance",
        "tv_distance_series": tvs,
        "sampling_floor_series": floors,
        "pass": bool(ok),
        "tolerances": {"floor_factor": 3.0},
    })

    figures.save_series(ctx.path("figure_identity.png"), x[inside],
                        {"Q + V": total},
                        xlabel="x", ylabel="energy",
                        title="pointwise ground-state energy")
    return checks


# ---------------------------------------------------------------------------
# moving_monopole


def _monopole_params(cfg: Config) -> dict:
    omega0 = cfg.get_float("wave", "omega0", 1.0)
    velocity = cfg.get_floats("wave", "velocity", [0.3, 0.0, 0.0])
    kind = cfg.get_str("wave", "kind", "kg_simple")
    if omega0 <= 0:
        cfg.fail("wave", "omega0", "omega0 must be positive")
    _subluminal(cfg, "wave", "velocity", velocity)
    velocity = tuple(velocity) + (0.0,) * (3 - len(velocity))
    omega = cfg.get_float("wave", "omega", None)
    try:
        spec = MonopoleSpec(kind=kind, omega0=omega0, omega=omega,
                            velocity=velocity, center=(0.0, 0.0, 0.0))
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.path) from None
    return {
        "spec": spec,
        "omega0": omega0,
        "velocity": velocity,
        "hs": cfg.get_floats("oracle", "h_values", [0.1, 0.08, 0.06, 0.05]),
        "t_eval": cfg.get_float("oracle", "t_eval", 0.3),
        "annulus": cfg.get_floats("oracle", "annulus", [0.5, 2.0]),
        "min_order": cfg.get_float("tolerances", "min_order", 1.8),
        "packet_steps": cfg.get_int("run", "packet_steps", 150),
        "energy_tol": cfg.get_float("tolerances", "energy_drift", 1e-8),
        "reversal_tol": cfg.get_float("tolerances", "reversal", 1e-9),
    }


def _monopole_box(p: dict) -> list:
    # asymmetric box: the singularity drifts toward +x during the sampled slices
    r_hi = p["annulus"][1]
    drift = abs(p["velocity"][0]) * 2.0 * p["t_eval"] + 0.3
    return [(-r_hi - 0.3, r_hi + drift)] + [(-r_hi - 0.3, r_hi + 0.3)] * 2


def _simulate_monopole(ctx: RunContext) -> dict:
    p = _monopole_params(ctx.cfg)
    spec = p["spec"]
    grid = GridSpec(extents=tuple(_monopole_box(p)),
                    points=(49, 47, 47), dt=0.05, boundary=Boundary.PERIODIC)
    r_floor = 0.45 * min(grid.spacing)
    for i, t in enumerate((0.0, p["t_eval"], 2.0 * p["t_eval"])):
        z = np.asarray(spec.center) + np.asarray(spec.velocity) * t
        fld = sample(grid, lambda tt, *mesh: eval_monopole(spec, tt, mesh, r_floor),
                     t, name="u")
        excluded = grid.radius_from(z) < 3.0 * max(grid.spacing)
        fld = ScalarComplexField(grid=grid, values=fld.values, time_label=t,
                                 name="u", excluded=excluded)
        write_snapshot(ctx.path("snapshot_%02d.dwf" % i), fld)
    # radial profile along +x through the singularity at t=0
    rs = np.linspace(0.3, p["annulus"][1], 64)
    vals = eval_monopole(spec, 0.0, [rs, np.zeros_like(rs), np.zeros_like(rs)])
    write_csv(ctx.path("radial_profile.csv"), ["r", "re", "im", "abs"],
              [(r, v.real, v.imag, abs(v)) for r, v in zip(rs, vals)])
    figures.save_series(ctx.path("figure_radial.png"), rs,
                        {"|u|": np.abs(vals), "1/(4 pi r)": 1.0 / (4 * math.pi * rs)},
                        xlabel="r", ylabel="amplitude", title="monopole falloff",
                        logy=True)
    return {"snapshots": 3}


def _verify_monopole(ctx: RunContext) -> list[dict]:
    p = _monopole_params(ctx.cfg)
    spec = p["spec"]
    checks = []

    r_lo, r_hi = p["annulus"]
    t_eval = p["t_eval"]
    vel = np.asarray(spec.velocity)

    def rest_radius(*mesh):
        t0, x0 = boost_event(t_eval, [m - c for m, c in zip(mesh, spec.center)],
                             spec.velocity)
        r0 = np.sqrt(sum(np.square(c) for c in x0))
        return (r0 >= r_lo) & (r0 <= r_hi)

    dt_probe = 0.5 * min(p["hs"])
    sing = [list(np.asarray(spec.center) + vel * (t_eval + k * dt_probe))
            for k in (-1, 0, 1)]
    oracle = residual_oracle(
        lambda tt, *mesh: eval_monopole(spec, tt, mesh, 0.2 * min(p["hs"])),
        "kg", _monopole_box(p), p["hs"],
        t=t_eval, omega=p["omega0"] if spec.omega is None else spec.omega,
        report_mask=rest_radius, singular_points=sing)
    checks.append({
        "check_name": "monopole_residual_order",
        **oracle,
        "pass": bool(oracle["fitted_order"] >= p["min_order"]),
        "tolerances": {"min_order": p["min_order"]},
    })

    wave = PlanePhaseWave(p["omega0"], p["velocity"])
    residual = wave.dispersion_residual()
    checks.append({
        "check_name": "carrier_dispersion",
        "omega": wave.omega,
        "k_magnitude": float(np.linalg.norm(wave.wavevector)),
        "residual": residual,
        "pass": bool(residual < 1e-12),
        "tolerances": {"dispersion": 1e-12},
    })

    # leapfrog health on a smooth packet with the same rest pulsation
    checks.extend(_kg_packet_checks(ctx, p))

    figures.save_loglog(ctx.path("figure_residual_order.png"),
                        oracle["h_values"], {"max |residual|": oracle["residuals"]},
                        xlabel="h", ylabel="residual",
                        title="wave-operator residual vs grid step")
    return checks


def _kg_packet_checks(ctx: RunContext, p: dict):
    grid = GridSpec(extents=((-2.4, 2.4),) * 3, points=(33,) * 3, dt=0.04,
                    boundary=Boundary.PERIODIC)
    omega_rest = p["omega0"]
    dt = grid.dt
    check_cfl(grid, dt, omega_rest)
    kvec = np.array([0.5, 0.0, 0.0])
    omega_k = math.sqrt(float(kvec @ kvec) + omega_rest**2)

    def packet(t, x, y, z):
        env = np.exp(-(x * x + y * y + z * z) / (2 * 0.8**2))
        return env * np.exp(1j * (kvec[0] * x - omega_k * t))

    u0 = sample(grid, packet, 0.0, name="u")
    dudt0 = -1j * omega_k * u0.values
    state = kg_taylor_start(u0, dudt0, omega_rest, None, StencilConfig(), dt)
    e0 = kg_energy(state)
    guard = 1e3 * float(np.max(np.abs(u0.values)))
    worst = 0.0
    last_good = u0
    for _ in range(p["packet_steps"]):
        state = kg_step(state)
        peak = float(np.max(np.abs(state.current.values)))
        if not math.isfinite(peak) or peak > guard:
            path = os.path.join(ctx.out_dir, "checkpoint_last_good.dwf")
            write_snapshot(path, last_good)
            raise DivergenceAbort("leapfrog amplitude blew past %g" % guard, path)
        last_good = state.current
        worst = max(worst, abs(kg_energy(state) / e0 - 1.0))
    checks = [{
        "check_name": "leapfrog_energy",
        "max_drift": worst,
        "steps": p["packet_steps"],
        "pass": bool(worst < p["energy_tol"]),
        "tolerances": {"energy_drift": p["energy_tol"]},
    }]
    back = state.reversed()
    for _ in range(p["packet_steps"] - 1):
        back = kg_step(back)
    rev_err = float(np.max(np.abs(back.current.values - u0.values)))
    checks.append({
        "check_name": "leapfrog_reversal",
        "max_error": rev_err,
        "pass": bool(rev_err < p["reversal_tol"]),
        "tolerances": {"reversal": p["reversal_tol"]},
    })
    return checks


# ---------------------------------------------------------------------------
# comoving_helmholtz


def _helmholtz_params(cfg: Config) -> dict:
    sigma = cfg.get_float("construction", "sigma", 4.0)
    mass = cfg.get_float("construction", "mass", 1.0)
    offset = cfg.get_float("construction", "center_offset", 5.0)
    if sigma <= 0:
        cfg.fail("construction", "sigma", "sigma must be positive")
    if mass <= 0:
        cfg.fail("construction", "mass", "mass must be positive")
    return {
        "fg": FreeGaussian(dims=3, sigma0=sigma, mass=mass, center=(0.0, 0.0, 0.0)),
        "mass": mass,
        "offset": offset,
        "omega_rest": cfg.get_float("construction", "omega_rest", mass),
        "t_eval": cfg.get_float("construction", "t_eval", 0.5),
        "r_inner": cfg.get_float("construction", "r_inner", 0.1),
        "r_outer": cfg.get_float("construction", "r_outer", 0.4),
        "n_radii": cfg.get_int("construction", "n_radii", 6),
        "n_directions": cfg.get_int("construction", "n_directions", 64),
        "residual_fraction": cfg.get_float("tolerances", "residual_fraction", 0.05),
        "rigidity_limit": cfg.get_float("tolerances", "rigidity_limit", 0.1),
        "wobble": cfg.get_float("verify", "wobble_acceleration", 0.5),
    }


def _helmholtz_setup(p: dict):
    fg = p["fg"]
    mass = p["mass"]
    z0 = np.array([p["offset"], 0.0, 0.0])

    def beta(t, x):
        return float(fg.amplitude(t, x[0], x[1], x[2]))

    def phi(t, x):
        return float(fg.slow_phase(t, x[0], x[1], x[2])) - mass * t

    def z_of(t):
        return z0 * (fg.sigma(t) / fg.sigma(0.0))

    dtp = 1e-4

    def zdot(t):
        return (z_of(t + dtp) - z_of(t - dtp)) / (2 * dtp)

    def zddot(t):
        return (z_of(t + dtp) - 2 * z_of(t) + z_of(t - dtp)) / dtp**2

    return beta, phi, make_path(z_of, zdot, zddot)


def _simulate_helmholtz(ctx: RunContext) -> dict:
    p = _helmholtz_params(ctx.cfg)
    beta, phi, path = _helmholtz_setup(p)
    frame, report = comoving_helmholtz_construct(
        beta, phi, None, p["omega_rest"], path, p["t_eval"],
        r_inner=p["r_inner"], r_outer=p["r_outer"], n_radii=p["n_radii"],
        n_directions=p["n_directions"],
        residual_fraction=p["residual_fraction"],
        rigidity_limit=p["rigidity_limit"])
    write_json(ctx.path("construction.json"), report)
    rs = np.linspace(p["r_inner"], 2.0 * p["r_outer"], 64)
    gx = [float(helmholtz_multipole(frame.B, frame.A_vec,
                                    np.array([[r, 0.0, 0.0]]))[0]) for r in rs]
    gy = [float(helmholtz_multipole(frame.B, frame.A_vec,
                                    np.array([[0.0, r, 0.0]]))[0]) for r in rs]
    write_csv(ctx.path("frozen_profile.csv"), ["r", "g_along_x", "g_along_y"],
              list(zip(rs, gx, gy)))
    figures.save_series(ctx.path("figure_profile.png"), rs,
                        {"along x": gx, "along y": gy},
                        xlabel="r'", ylabel="frozen factor",
                        title="comoving frozen profile (%s branch)" % frame.branch,
                        logy=True)
    return {"branch": frame.branch, "rigidity_ratio": frame.rigidity_ratio}


def _verify_helmholtz(ctx: RunContext) -> list[dict]:
    p = _helmholtz_params(ctx.cfg)
    beta, phi, path = _helmholtz_setup(p)
    checks = []
    frame, report = comoving_helmholtz_construct(
        beta, phi, None, p["omega_rest"], path, p["t_eval"],
        r_inner=p["r_inner"], r_outer=p["r_outer"], n_radii=p["n_radii"],
        n_directions=p["n_directions"],
        residual_fraction=p["residual_fraction"],
        rigidity_limit=p["rigidity_limit"])
    checks.append(report)

    wobble = make_path(path.z, path.zdot,
                       lambda t: np.array([p["wobble"], 0.0, 0.0]))
    _, guard_report = comoving_helmholtz_construct(
        beta, phi, None, p["omega_rest"], wobble, p["t_eval"],
        r_inner=p["r_inner"], r_outer=p["r_outer"], n_radii=p["n_radii"],
        n_directions=p["n_directions"],
        residual_fraction=p["residual_fraction"],
        rigidity_limit=p["rigidity_limit"])
    checks.append({
        "check_name": "rigidity_guard",
        "status": guard_report["status"],
        "rigidity_ratio": guard_report["rigidity_ratio"],
        "pass": bool(guard_report["status"] == "invalid_rigidity"),
        "tolerances": {"rigidity_limit": p["rigidity_limit"]},
    })
    return checks


# ---------------------------------------------------------------------------
# perrin_spreading


def _perrin_params(cfg: Config) -> dict:
    sigma0 = cfg.get_float("wave", "sigma0", 1.0)
    mass = cfg.get_float("wave", "mass", 1.0)
    if sigma0 <= 0:
        cfg.fail("wave", "sigma0", "sigma0 must be positive")
    fg = FreeGaussian(dims=2, sigma0=sigma0, mass=mass, center=(0.0, 0.0))
    extent = cfg.get_floats("grid", "extent", [-4.5, 4.5])
    points = cfg.get_int("grid", "points", 201)
    grid = GridSpec(extents=((extent[0], extent[1]),) * 2,
                    points=(points,) * 2, dt=0.01, boundary=Boundary.DIRICHLET_ZERO)
    # the shell check differentiates a 1/R envelope; it gets its own, finer
    # sampling so the exclusion radius spans many cells there
    fine_points = cfg.get_int("singular", "guidance_points", 4 * (points - 1) + 1)
    fine_grid = GridSpec(extents=grid.extents, points=(fine_points,) * 2,
                         dt=0.01, boundary=Boundary.DIRICHLET_ZERO)
    z_birth = cfg.get_floats("singular", "z0", [1.0, 0.0])
    eps = cfg.get_float("singular", "epsilon", 3.0 * max(grid.spacing))
    spec = SingularWaveSpec(
        order=cfg.get_int("singular", "order", 1),
        normalization=cfg.get_float("singular", "normalization", 1.0),
        envelope="flow_transported",
        omega_rest=cfg.get_float("singular", "omega_rest", mass),
        exclusion_radius=eps)
    return {
        "fg": fg, "mass": mass, "grid": grid, "fine_grid": fine_grid, "spec": spec,
        "z0": np.asarray(z_birth, dtype=float),
        "t_end": cfg.get_float("run", "t_end", fg.doubling_time()),
        "slice_dt": cfg.get_float("run", "slice_dt", 0.01),
        "n_times": cfg.get_int("run", "samples", 33),
        "quad_n": cfg.get_int("verify", "quadrature_samples", 64),
        "ring_radius": cfg.get_float("verify", "ring_radius", 0.5),
        "ring_count": cfg.get_int("verify", "ring_count", 5),
        "intercept_frac": cfg.get_float("tolerances", "intercept_fraction", 0.02),
        "min_power": cfg.get_float("tolerances", "min_power", 0.8),
        "control_frac": cfg.get_float("tolerances", "negative_control", 0.10),
        "transport_tol": cfg.get_float("tolerances", "transport", 0.01),
        "transport_order": cfg.get_float("tolerances", "transport_order", 1.5),
        "f_tol": cfg.get_float("tolerances", "f_drift", 0.01),
        "decay_gate": cfg.get_float("tolerances", "amplitude_decay", 0.51),
        "violation_min": cfg.get_float("tolerances", "violation_min", 0.2),
        "perrin_tol": cfg.get_float("tolerances", "perrin", 0.05),
    }


def _perrin_handles(p: dict):
    fg: FreeGaussian = p["fg"]
    mass = p["mass"]
    z0 = p["z0"]
    order = p["spec"].order
    C = p["spec"].normalization

    def phase(t, pts):
        return fg.slow_phase(t, *_cols(pts)) - mass * t

    def amp(t, pts):
        return fg.amplitude(t, *_cols(pts))

    def pullback(t, pts):
        return fg.pullback(t, np.atleast_2d(pts))

    def z_of(t):
        return z0 * (fg.sigma(t) / fg.sigma(0.0))

    def zdot_of(t):
        v = fg.velocity(t, *[np.atleast_1d(c) for c in z_of(t)])
        return np.array([float(vi[0]) for vi in v])

    def f_transported(t, pts):
        back = pullback(t, pts)
        r0 = np.linalg.norm(back - z0, axis=1)
        r0 = np.maximum(r0, 1e-9)
        return C * np.asarray(amp(t, pts)) / r0**order

    def growth_rate(t, pts):
        # -div(grad S)/m for the isotropic spreading envelope
        n = np.atleast_2d(pts).shape[0]
        tau = fg.tau(t)
        rate = -fg.dims * tau / (2.0 * mass * fg.sigma0**2 * (1.0 + tau * tau))
        return np.full(n, rate)

    return phase, amp, pullback, z_of, zdot_of, f_transported, growth_rate


def _perrin_slices(p: dict, grid: GridSpec, phase, amp, pullback, z_of, t: float):
    dt = p["slice_dt"]
    out = []
    for tt in (t - dt, t, t + dt):
        out.append(construct_u(p["spec"], grid, tt, z_of(tt), phase_eval=phase,
                               amp_eval=amp, pullback=pullback, z0=p["z0"]))
    return out


def _simulate_perrin(ctx: RunContext) -> dict:
    p = _perrin_params(ctx.cfg)
    phase, amp, pullback, z_of, zdot_of, f_tr, rate = _perrin_handles(p)
    times = np.linspace(0.0, p["t_end"], 3)
    for i, t in enumerate(times):
        u = construct_u(p["spec"], p["grid"], t, z_of(t), phase_eval=phase,
                        amp_eval=amp, pullback=pullback, z0=p["z0"])
        write_snapshot(ctx.path("snapshot_%02d.dwf" % i), u)
        if i == len(times) - 1:
            figures.save_heatmap(ctx.path("figure_u_amplitude.png"), u,
                                 title="singular wave at t=%.3f" % t, log=True)
    ts = np.linspace(0.0, p["t_end"], p["n_times"])
    rows = []
    for t in ts:
        z = z_of(t)
        v = zdot_of(t)
        phi = float(phase(t, z[None, :])[0])
        rows.append((t, z[0], z[1], v[0], v[1], t, phi))
    write_csv(ctx.path("trajectory_00.csv"),
              ["t", "z0", "z1", "v0", "v1", "tau", "phase"], rows)
    return {"snapshots": len(times)}


def _verify_perrin(ctx: RunContext) -> list[dict]:
    p = _perrin_params(ctx.cfg)
    fg: FreeGaussian = p["fg"]
    phase, amp, pullback, z_of, zdot_of, f_tr, rate = _perrin_handles(p)
    checks = []
    t_end = p["t_end"]
    mass = p["mass"]

    # near-field guidance on shells, singularity riding the flow
    prev_u, now_u, next_u = _perrin_slices(p, p["fine_grid"], phase, amp,
                                           pullback, z_of, t_end)
    z = z_of(t_end)
    zdot = zdot_of(t_end)
    wg = weak_guidance_residual(prev_u, now_u, next_u, z, zdot,
                                regime="nonrelativistic", omega0=mass,
                                epsilon=p["spec"].exclusion_radius,
                                min_power=p["min_power"],
                                intercept_fraction=p["intercept_frac"])
    checks.append(wg)

    # deliberate slip: the detector must resolve the injected offset
    slip = 0.1 * float(np.linalg.norm(zdot))
    wg_neg = weak_guidance_residual(prev_u, now_u, next_u, z, 0.9 * zdot,
                                    regime="nonrelativistic", omega0=mass,
                                    epsilon=p["spec"].exclusion_radius,
                                    min_power=p["min_power"],
                                    intercept_fraction=p["intercept_frac"],
                                    reference_speed=float(np.linalg.norm(zdot)))
    detected = abs(wg_neg["intercept"] - slip) <= p["control_frac"] * slip
    checks.append({
        "check_name": "weak_guidance_negative_control",
        "injected_slip": slip,
        "intercept": wg_neg["intercept"],
        "fitted_exponent": wg_neg["fitted_exponent"],
        "pass": bool(detected),
        "tolerances": {"negative_control": p["control_frac"]},
    })

    # streamline transport integral, three quadrature resolutions
    x_start = np.array([0.6, 0.9])
    mismatches = []
    dts = []
    base = None
    for nq in (p["quad_n"] // 2, p["quad_n"], 2 * p["quad_n"]):
        ts = np.linspace(0.0, t_end, nq + 1)
        path = np.stack([x_start * (fg.sigma(t) / fg.sigma(0.0)) for t in ts])
        rep = transport_integral_check(ts, path, f_tr, rate,
                                       rel_tol=p["transport_tol"])
        mismatches.append(rep["max_rel_mismatch"])
        dts.append(t_end / nq)
        if nq == p["quad_n"]:
            base = rep
    order = fit_loglog_order(dts, mismatches)
    base["check_name"] = "transport_integral"
    base["refinement_mismatches"] = mismatches
    base["refinement_dts"] = dts
    base["refinement_order"] = None if math.isnan(order) else float(order)
    base["pass"] = bool(base["pass"] and (math.isnan(order)
                                          or order >= p["transport_order"]))
    base["tolerances"]["min_order"] = p["transport_order"]
    checks.append(base)

    # F = f/a preservation along flow lines, f interpolated from gridded u;
    # the ring includes the along-drift direction, where the no-harmony
    # control drifts hardest
    ts = np.linspace(0.0, t_end, p["n_times"])
    angles = 2.0 * math.pi * np.arange(p["ring_count"]) / p["ring_count"]
    ring = p["ring_radius"] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    paths = np.stack([ring * (fg.sigma(t) / fg.sigma(0.0)) for t in ts])
    u_interp = _gridded_amplitude_series(p, phase, amp, pullback, z_of, ts)
    rep_f = f_transport_check(ts, paths, u_interp,
                              lambda t, pts: np.asarray(amp(t, pts)),
                              rel_tol=p["f_tol"],
                              min_amplitude_decay=p["decay_gate"])
    rep_f["check_name"] = "f_transport"
    checks.append(rep_f)

    # no phase harmony: a resting carrier phase makes u-lines static points,
    # and F along them must visibly drift
    def flat_phase(t, pts):
        return np.full(np.atleast_2d(pts).shape[0], -p["spec"].omega_rest * t)

    u_neg = _gridded_amplitude_series(p, flat_phase, amp, pullback, z_of, ts)
    static_paths = np.broadcast_to(ring, (ts.size,) + ring.shape).copy()
    rep_neg = f_transport_check(ts, static_paths, u_neg,
                                lambda t, pts: np.asarray(amp(t, pts)),
                                rel_tol=p["f_tol"])
    checks.append({
        "check_name": "f_transport_negative_control",
        "max_rel_drift": rep_neg["max_rel_drift"],
        "violation": rep_neg["violation"],
        "pass": bool(rep_neg["violation"]
                     and rep_neg["max_rel_drift"] > p["violation_min"]),
        "tolerances": {"violation_min": p["violation_min"]},
    })

    # fixed-offset decay next to the moving singularity (pointwise lock)
    delta = 2.0 * p["spec"].exclusion_radius
    order = p["spec"].order
    C = p["spec"].normalization

    def f_locked(t, pts):
        pts = np.atleast_2d(pts)
        r = np.linalg.norm(pts - z_of(t), axis=1)
        return C * np.asarray(amp(t, pts)) / np.maximum(r, 1e-9)**order

    zs = np.stack([z_of(t) for t in ts])
    perrin = perrin_diagnostic(ts, zs, f_locked,
                               lambda t, pts: np.asarray(amp(t, pts)),
                               offset=delta, direction=np.array([0.0, 1.0]))
    final_f = perrin["amplitude_ratio_series"][-1]
    decay_2d = (fg.sigma(0.0) / fg.sigma(t_end)) ** (fg.dims / 2.0)
    perrin["expected_final_ratio"] = decay_2d
    perrin["pass"] = bool(abs(final_f - decay_2d) <= p["perrin_tol"]
                          and perrin["max_gap"] <= p["perrin_tol"])
    perrin["tolerances"] = {"perrin": p["perrin_tol"]}
    checks.append(perrin)

    figures.save_loglog(ctx.path("figure_shells.png"), wg["shells"],
                        {"max |(v_u - zdot).Rhat|": wg["residuals"]},
                        xlabel="shell radius", ylabel="projected slip",
                        title="near-field guidance law")
    figures.save_series(ctx.path("figure_f_drift.png"), ts,
                        {"max drift": rep_f["residuals"],
                         "no harmony": rep_neg["residuals"]},
                        xlabel="t", ylabel="|F - F0|/F0",
                        title="amplitude-ratio transport", logy=True)
    figures.save_series(ctx.path("figure_perrin.png"), ts,
                        {"near-field ratio": perrin["amplitude_ratio_series"],
                         "carrier ratio": perrin["carrier_ratio_series"]},
                        xlabel="t", ylabel="ratio to birth value",
                        title="fixed-offset amplitude decay")
    return checks


def _gridded_amplitude_series(p: dict, phase, amp, pullback, z_of, ts):
    """|u| interpolators at each sample time; lookup is exact on ts."""
    from scipy.interpolate import RegularGridInterpolator

    grid = p["grid"]
    axes = grid.axes()
    interps = []
    for t in ts:
        u = construct_u(p["spec"], grid, t, z_of(t), phase_eval=phase,
                        amp_eval=amp, pullback=pullback, z0=p["z0"])
        interps.append(RegularGridInterpolator(axes, np.abs(u.values),
                                               method="linear"))
    ts_arr = np.asarray(ts)

    def f_eval(t, pts):
        j = int(np.argmin(np.abs(ts_arr - t)))
        if abs(ts_arr[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError("amplitude series sampled off its time knots")
        return interps[j](np.atleast_2d(pts))

    return f_eval


# ---------------------------------------------------------------------------
# dispatch


_SIMULATE = {
    "plane_wave": _simulate_plane_wave,
    "free_gaussian": _simulate_free_gaussian,
    "double_gaussian_interference": _simulate_double_gaussian,
    "harmonic_oscillator": _simulate_harmonic,
    "moving_monopole": _simulate_monopole,
    "comoving_helmholtz": _simulate_helmholtz,
    "perrin_spreading": _simulate_perrin,
}

_VERIFY = {
    "plane_wave": _verify_plane_wave,
    "free_gaussian": _verify_free_gaussian,
    "double_gaussian_interference": _verify_double_gaussian,
    "harmonic_oscillator": _verify_harmonic,
    "moving_monopole": _verify_monopole,
    "comoving_helmholtz": _verify_helmholtz,
    "perrin_spreading": _verify_perrin,
}


def simulate_scenario(ctx: RunContext) -> dict:
    name = scenario_name(ctx.cfg)
    os.makedirs(ctx.out_dir, exist_ok=True)
    summary = _SIMULATE[name](ctx)
    write_manifest(ctx.out_dir, name, ctx.config_text, ctx.seed,
                   ctx.outputs, extra={"mode": "simulate", "summary": summary})
    return summary


def verify_scenario(ctx: RunContext) -> tuple[list[dict], bool]:
    name = scenario_name(ctx.cfg)
    os.makedirs(ctx.out_dir, exist_ok=True)
    checks = _VERIFY[name](ctx)
    for c in checks:
        write_json(os.path.join(ctx.out_dir, "verify_%s.json" % c["check_name"]),
                   c)
        ctx.outputs.append("verify_%s.json" % c["check_name"])
    all_pass = all(bool(c.get("pass", False)) for c in checks)
    write_json(os.path.join(ctx.out_dir, "verify_summary.json"), {
        "scenario": name,
        "all_pass": all_pass,
        "checks": [{"check_name": c["check_name"], "pass": bool(c.get("pass", False))}
                   for c in checks],
    })
    ctx.outputs.append("verify_summary.json")
    write_manifest(ctx.out_dir, name, ctx.config_text, ctx.seed,
                   ctx.outputs, extra={"mode": "verify"})
    return checks, all_pass
