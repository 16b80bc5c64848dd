"""Closed-form solution catalog and finite-difference residual oracles.

Moving solutions are always evaluated by Lorentz-boosting the event into the
rest frame and applying the rest-frame formula there, never by transforming
the formula itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fields import (
    Boundary,
    FourPotential,
    GridSpec,
    ScalarComplexField,
    StencilConfig,
    dalembertian,
    gradient,
)

FOUR_PI = 4.0 * math.pi

MONOPOLE_KINDS = (
    "dalembert_timesym",
    "kg_simple",
    "kg_constrained_oscillatory",
    "kg_constrained_evanescent",
)


# ---------------------------------------------------------------------------
# boosts

def gamma_factor(velocity: Sequence[float]) -> float:
    v2 = float(np.dot(velocity, velocity))
    if v2 >= 1.0:
        raise ValueError("|v| must be < 1 (units c = 1)")
    return 1.0 / math.sqrt(1.0 - v2)


def boost_event(t, xs: Sequence[np.ndarray], velocity: Sequence[float]):
    """Lab event(s) -> rest-frame (t0, [x0 components]) for a frame moving at `velocity`.

    Accepts scalars or broadcastable arrays for t and the coordinates.
    """
    v = np.asarray(velocity, dtype=float)
    ndim = len(xs)
    if v.shape != (ndim,):
        raise ValueError("velocity rank does not match coordinates")
    g = gamma_factor(v)
    speed = math.sqrt(float(v @ v))
    t = np.asarray(t, dtype=float)
    if speed == 0.0:
        return t, [np.asarray(x, dtype=float) for x in xs]
    vhat = v / speed
    par = sum(x * vh for x, vh in zip(xs, vhat))
    t0 = g * (t - speed * par)
    par0 = g * (par - speed * t)
    x0 = [x - par * vh + par0 * vh for x, vh in zip(xs, vhat)]
    return t0, x0


@dataclass(frozen=True)
class MonopoleSpec:
    """A singular spherical solution, possibly boosted along a worldline z0 + v t."""

    kind: str
    omega0: float
    omega: float | None = None
    velocity: tuple[float, ...] = (0.0, 0.0, 0.0)
    center: tuple[float, ...] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in MONOPOLE_KINDS:
            raise ValueError("unknown monopole kind %r" % (self.kind,))
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.kind == "kg_constrained_oscillatory":
            if self.omega is None or self.omega < self.omega0:
                raise ValueError("oscillatory branch needs omega >= omega0")
        if self.kind == "kg_constrained_evanescent":
            if self.omega is None or self.omega > self.omega0:
                raise ValueError("evanescent branch needs omega <= omega0")
        if len(self.velocity) != len(self.center):
            raise ValueError("velocity/center rank mismatch")
        gamma_factor(self.velocity)  # validates |v| < 1


def _rest_profile(spec: MonopoleSpec, t0: np.ndarray, r0: np.ndarray) -> np.ndarray:
    w0 = spec.omega0
    if spec.kind == "dalembert_timesym":
        return np.exp(-1j * w0 * t0) * np.cos(w0 * r0) / (FOUR_PI * r0)
    if spec.kind == "kg_simple":
        return np.exp(-1j * w0 * t0) / (FOUR_PI * r0)
    w = float(spec.omega)
    if spec.kind == "kg_constrained_oscillatory":
        kr = math.sqrt(w * w - w0 * w0)
        return np.exp(-1j * w * t0) * np.cos(kr * r0) / (FOUR_PI * r0)
    kr = math.sqrt(w0 * w0 - w * w)
    return np.exp(-1j * w * t0) * np.exp(-kr * r0) / (FOUR_PI * r0)


def eval_monopole(spec: MonopoleSpec, t, xs: Sequence[np.ndarray],
                  r_floor: float = 0.0) -> np.ndarray:
    """Evaluate the monopole at lab event(s). r_floor > 0 clamps the core radius."""
    rel = [np.asarray(x, dtype=float) - c for x, c in zip(xs, spec.center)]
    t0, x0 = boost_event(t, rel, spec.velocity)
    r0 = np.sqrt(sum(np.square(c) for c in x0))
    if r_floor > 0.0:
        r0 = np.maximum(r0, r_floor)
    elif np.any(r0 == 0.0):
        raise ValueError("monopole evaluated on its singular worldline")
    return _rest_profile(spec, np.broadcast_to(t0, r0.shape), r0)


# ---------------------------------------------------------------------------
# plane phase waves

@dataclass(frozen=True)
class PlanePhaseWave:
    """Superluminal-phase plane wave locked to a subluminal particle velocity."""

    omega0: float
    velocity: tuple[float, ...]

    @property
    def gamma(self) -> float:
        return gamma_factor(self.velocity)

    @property
    def omega(self) -> float:
        return self.gamma * self.omega0

    @property
    def wavevector(self) -> np.ndarray:
        return self.omega * np.asarray(self.velocity, dtype=float)

    @property
    def clock_pulsation(self) -> float:
        """Pulsation seen along the guided worldline, omega0 / gamma."""
        return self.omega0 / self.gamma

    def phase(self, t, xs: Sequence[np.ndarray]) -> np.ndarray:
        k = self.wavevector
        acc = -self.omega * np.asarray(t, dtype=float)
        for ki, x in zip(k, xs):
            acc = acc + ki * np.asarray(x, dtype=float)
        return acc

    def dispersion_residual(self) -> float:
        k = self.wavevector
        return float(self.omega**2 - k @ k - self.omega0**2)

    def values(self, t, xs: Sequence[np.ndarray]) -> np.ndarray:
        return np.exp(1j * self.phase(t, xs))


def boost_phase(wave: PlanePhaseWave, t, xs: Sequence[np.ndarray]) -> np.ndarray:
    """Phase of the wave expressed in the rest frame, -omega0 * t0.

    Lorentz invariance of the phase: this must agree with wave.phase at the
    same lab event.
    """
    t0, _ = boost_event(t, xs, wave.velocity)
    return -wave.omega0 * np.asarray(t0)


# ---------------------------------------------------------------------------
# convergence fits

def fit_loglog_order(h_values: Sequence[float], residuals: Sequence[float]) -> float:
    """Least-squares slope of log(residual) against log(h)."""
    h = np.asarray(h_values, dtype=float)
    r = np.asarray(residuals, dtype=float)
    if np.any(r <= 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(h), np.log(r), 1)
    return float(slope)


def fit_power_and_intercept(radii: Sequence[float], values: Sequence[float]):
    """(fitted log-log power, linear-in-R extrapolated intercept at R=0)."""
    rr = np.asarray(radii, dtype=float)
    vv = np.asarray(values, dtype=float)
    power = fit_loglog_order(rr, np.abs(vv))
    slope_lin, intercept = np.polyfit(rr, vv, 1)
    return float(power), float(intercept)


# ---------------------------------------------------------------------------
# residual oracle

def _covariant_residual_terms(before, current, after, pot: FourPotential,
                              omega: float, cfg: StencilConfig):
    """(d+ieA)(d+ieA)u + (chi + omega^2)u for static potentials, discretized."""
    box = dalembertian(before, current, after, cfg)
    vals = box.values + (pot.chi_or_zero() + omega * omega) * current.values
    e = pot.charge
    if e != 0.0 and not pot.is_zero():
        g = current.grid
        V = pot.scalar_or_zero()
        A = pot.vector_or_zero()
        dt = after.time_label - current.time_label
        du_dt = (after.values - before.values) / (2 * dt)
        grad_u = gradient(current, cfg)
        a_dot_grad = sum(A[i] * grad_u[i] for i in range(g.ndim))
        div_a = np.zeros(g.shape)
        for i in range(g.ndim):
            div_a += gradient(
                ScalarComplexField(grid=g, values=A[i].astype(complex)), cfg
            )[i].real
        vals = vals + 1j * e * div_a * current.values
        vals = vals + 2j * e * (V * du_dt + a_dot_grad)
        vals = vals - e * e * (V * V - sum(Ai * Ai for Ai in A)) * current.values
    return ScalarComplexField(grid=current.grid, values=vals,
                              time_label=current.time_label,
                              name=current.name + "_res", excluded=box.excluded)


def residual_oracle(
    solution: Callable[..., np.ndarray],
    operator: str,
    box: Sequence[tuple[float, float]],
    h_values: Sequence[float],
    *,
    t: float = 0.3,
    omega: float | None = None,
    pot_builder: Callable[[GridSpec], FourPotential] | None = None,
    report_mask: Callable[..., np.ndarray] | None = None,
    singular_points: Sequence[Sequence[float]] = (),
    dt_ratio: float = 0.5,
    stencil_order: int = 2,
) -> dict:
    """Shrinking-h residual study of a discrete operator against a closed form.

    solution(t, *mesh) is sampled on three time slices (dt = dt_ratio * h) and
    run through the requested operator; the max |residual| is recorded per h
    and a convergence order fitted. report_mask(*mesh) restricts where the
    residual counts (e.g. an annulus); edges and declared singular
    neighborhoods are always dropped.
    """
    if operator not in ("dalembert", "kg", "kg_gauged"):
        raise ValueError("unknown operator %r" % operator)
    if operator in ("kg", "kg_gauged") and omega is None:
        raise ValueError("operator %r needs omega" % operator)
    cfg = StencilConfig(order=stencil_order)
    residuals = []
    actual_h = []
    for h in h_values:
        points = tuple(max(8, int(round((hi - lo) / h)) + 1) for lo, hi in box)
        grid = GridSpec(extents=tuple(box), points=points, dt=1.0,
                        boundary=Boundary.PERIODIC)
        hs = grid.spacing
        dt = dt_ratio * min(hs)
        mesh = grid.meshgrid()
        # clamping near the core is the caller's job (bake r_floor into `solution`);
        # here we only refuse report regions that touch a singular worldline
        for p in singular_points:
            d = np.sqrt(sum((m - c) ** 2 for m, c in zip(mesh, p)))
            if report_mask is not None:
                inside = report_mask(*mesh)
                if np.any(inside & (d < 2 * max(hs))):
                    raise ValueError("report region touches a singular point")

        def snap(tt):
            vals = np.asarray(solution(tt, *mesh), dtype=complex)
            return ScalarComplexField(grid=grid, values=vals, time_label=tt)

        before, cur, after = snap(t - dt), snap(t), snap(t + dt)
        if operator == "dalembert":
            res = dalembertian(before, cur, after, cfg).values
        elif operator == "kg":
            res = dalembertian(before, cur, after, cfg).values + omega * omega * cur.values
        else:
            pot = pot_builder(grid) if pot_builder else FourPotential.zero(grid)
            res = _covariant_residual_terms(before, cur, after, pot, omega, cfg).values
        keep = np.ones(grid.shape, dtype=bool)
        if report_mask is not None:
            keep &= np.asarray(report_mask(*mesh), dtype=bool)
        # drop the wrap-contaminated edge band
        pad = cfg.halfwidth()
        for axis in range(grid.ndim):
            sl = [slice(None)] * grid.ndim
            sl[axis] = slice(0, pad)
            keep[tuple(sl)] = False
            sl[axis] = slice(-pad, None)
            keep[tuple(sl)] = False
        for p in singular_points:
            d = np.sqrt(sum((m - c) ** 2 for m, c in zip(mesh, p)))
            keep &= d > (2 + pad) * max(hs)
        if not np.any(keep):
            raise ValueError("empty report region at h=%g" % h)
        residuals.append(float(np.max(np.abs(res[keep]))))
        actual_h.append(float(np.mean(hs)))
    return {
        "operator": operator,
        "h_values": actual_h,
        "residuals": residuals,
        "fitted_order": fit_loglog_order(actual_h, residuals),
    }


# ---------------------------------------------------------------------------
# comoving Helmholtz radial profile

def helmholtz_radial(s: float, r) -> np.ndarray:
    """Monopole radial profile H(r) with r*H -> 1 as r -> 0.

    s >= 0: cos(sqrt(s) r)/r (oscillatory); s < 0: exp(-sqrt(-s) r)/r
    (evanescent). The two branches meet continuously at s = 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radial profile needs r > 0")
    if s >= 0:
        return np.cos(math.sqrt(s) * r) / r
    return np.exp(-math.sqrt(-s) * r) / r


def helmholtz_multipole(B: float, A_vec: Sequence[float], x_prime: np.ndarray) -> np.ndarray:
    """Comoving profile G'(x') = H(|x'|) * exp(-A . x') for drift vector A."""
    A = np.asarray(A_vec, dtype=float)
    xp = np.atleast_2d(np.asarray(x_prime, dtype=float))
    r = np.sqrt(np.sum(xp * xp, axis=-1))
    s = B - float(A @ A)
    return helmholtz_radial(s, r) * np.exp(-xp @ A)


# ---------------------------------------------------------------------------
# nonrelativistic wavepackets (oracle catalog for the envelope field tests)

@dataclass(frozen=True)
class FreeGaussian:
    """Freely spreading Gaussian envelope, any of 1-3 dimensions.

    Carrier convention: the full phase is -omega0*t + slow_phase with
    omega0 = mass. sigma(t) = sigma0 * sqrt(1 + tau^2), tau = t/(2 m sigma0^2).
    """

    dims: int
    sigma0: float = 1.0
    mass: float = 1.0
    center: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.center:
            object.__setattr__(self, "center", (0.0,) * self.dims)
        if len(self.center) != self.dims:
            raise ValueError("center rank mismatch")

    def tau(self, t: float) -> float:
        return t / (2.0 * self.mass * self.sigma0**2)

    def sigma(self, t: float) -> float:
        return self.sigma0 * math.sqrt(1.0 + self.tau(t) ** 2)

    def doubling_time(self) -> float:
        """Time at which sigma = 2 sigma0."""
        return 2.0 * math.sqrt(3.0) * self.mass * self.sigma0**2

    def _r2(self, xs):
        return sum((np.asarray(x) - c) ** 2 for x, c in zip(xs, self.center))

    def psi(self, t: float, *xs) -> np.ndarray:
        b = 1.0 + 1j * self.tau(t)
        norm = (2.0 * math.pi * self.sigma0**2) ** (-self.dims / 4.0)
        return norm * b ** (-self.dims / 2.0) * np.exp(-self._r2(xs) / (4.0 * self.sigma0**2 * b))

    def amplitude(self, t: float, *xs) -> np.ndarray:
        st = self.sigma(t)
        norm = (2.0 * math.pi * self.sigma0**2) ** (-self.dims / 4.0)
        return norm * (self.sigma0 / st) ** (self.dims / 2.0) * np.exp(-self._r2(xs) / (4.0 * st * st))

    def slow_phase(self, t: float, *xs) -> np.ndarray:
        tt = self.tau(t)
        return self._r2(xs) * tt / (4.0 * self.sigma0**2 * (1 + tt * tt)) - 0.5 * self.dims * math.atan(tt)

    def grad_phase(self, t: float, *xs) -> list[np.ndarray]:
        tt = self.tau(t)
        coef = tt / (2.0 * self.sigma0**2 * (1 + tt * tt))
        return [coef * (np.asarray(x) - c) for x, c in zip(xs, self.center)]

    def dt_slow_phase(self, t: float, *xs) -> np.ndarray:
        tt = self.tau(t)
        dtau = 1.0 / (2.0 * self.mass * self.sigma0**2)
        dcoef = (1 - tt * tt) / (1 + tt * tt) ** 2
        return dtau * (
            self._r2(xs) * dcoef / (4.0 * self.sigma0**2)
            - 0.5 * self.dims / (1 + tt * tt)
        )

    def velocity(self, t: float, *xs) -> list[np.ndarray]:
        """Guidance velocity grad(S)/m, equal to x * sigma'/sigma componentwise."""
        return [g / self.mass for g in self.grad_phase(t, *xs)]

    def flow_factor(self, t: float, t0: float = 0.0) -> float:
        """Streamline dilation sigma(t)/sigma(t0); x(t) = center + factor*(x(t0)-center)."""
        return self.sigma(t) / self.sigma(t0)

    def pullback(self, t: float, points: np.ndarray, t0: float = 0.0) -> np.ndarray:
        """Map positions at time t back along the flow to time t0 (closed form)."""
        c = np.asarray(self.center)
        return c + (np.atleast_2d(points) - c) / self.flow_factor(t, t0)


@dataclass(frozen=True)
class HarmonicGround:
    """Ground state of an isotropic harmonic trap, envelope convention."""

    omega: float = 1.0
    mass: float = 1.0
    dims: int = 1

    @property
    def energy(self) -> float:
        return 0.5 * self.dims * self.omega

    def width(self) -> float:
        return 1.0 / math.sqrt(2.0 * self.mass * self.omega)

    def amplitude(self, *xs) -> np.ndarray:
        r2 = sum(np.asarray(x) ** 2 for x in xs)
        norm = (self.mass * self.omega / math.pi) ** (self.dims / 4.0)
        return norm * np.exp(-0.5 * self.mass * self.omega * r2)

    def psi(self, t: float, *xs) -> np.ndarray:
        return self.amplitude(*xs) * np.exp(-1j * self.energy * t)

    def potential(self, *xs) -> np.ndarray:
        r2 = sum(np.asarray(x) ** 2 for x in xs)
        return 0.5 * self.mass * self.omega**2 * r2


def vortex_state(w: float = 1.0):
    """psi = (x + i y) exp(-(x^2+y^2)/(2 w^2)): unit circulation around the core."""

    def fn(t, x, y):
        return (x + 1j * y) * np.exp(-(x * x + y * y) / (2.0 * w * w))

    return fn
