"""Uniform grids, complex scalar fields, external potentials and stencil operators.

Natural units throughout: hbar = c = 1, so a particle of mass m has rest
pulsation omega0 = m. Grids are uniform per axis; fields live on the nodes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator


class Boundary(enum.Enum):
    PERIODIC = "periodic"
    ABSORBING_MASK = "absorbing_mask"
    DIRICHLET_ZERO = "dirichlet_zero"


class OutOfDomainError(ValueError):
    """Interpolation point left the grid interior."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform spatial grid plus the evolution time step.

    extents are inclusive per-axis (min, max) node ranges; with the periodic
    boundary the implied period is points*h, i.e. one spacing past the last
    node wraps to the first.
    """

    extents: tuple[tuple[float, float], ...]
    points: tuple[int, ...]
    dt: float
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if not 1 <= len(self.extents) <= 3:
            raise ValueError("spatial_dims must be 1, 2 or 3")
        if len(self.points) != len(self.extents):
            raise ValueError("points and extents rank mismatch")
        for n in self.points:
            if n < 8:
                raise ValueError("need at least 8 points per axis")
        for lo, hi in self.extents:
            if not hi > lo:
                raise ValueError("empty extent")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def ndim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.extents, self.points))

    @property
    def periods(self) -> tuple[float, ...]:
        return tuple(n * h for n, h in zip(self.points, self.spacing))

    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.linspace(lo, hi, n) for (lo, hi), n in zip(self.extents, self.points)
        )

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def cell_volume(self) -> float:
        out = 1.0
        for h in self.spacing:
            out *= h
        return out

    def cfl_limit(self) -> float:
        """Largest stable dt for the explicit second-order wave update."""
        return min(self.spacing) / np.sqrt(self.ndim)

    def radius_from(self, center: Sequence[float]) -> np.ndarray:
        mesh = self.meshgrid()
        r2 = np.zeros(self.shape)
        for x, c in zip(mesh, center):
            r2 += (x - c) ** 2
        return np.sqrt(r2)


@dataclass(frozen=True)
class StencilConfig:
    """Finite-difference order and the singular exclusion radius."""

    order: int = 2
    exclusion_radius: float = 0.0

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ValueError("stencil order must be 2 or 4")
        if self.exclusion_radius < 0:
            raise ValueError("exclusion radius must be nonnegative")

    def halfwidth(self) -> int:
        return self.order // 2

    def check_exclusion(self, grid: GridSpec) -> None:
        """A live singularity mask requires exclusion >= two cells."""
        if self.exclusion_radius and self.exclusion_radius < 2 * max(grid.spacing):
            raise ValueError(
                "exclusion radius %.3g below twice the largest spacing %.3g"
                % (self.exclusion_radius, max(grid.spacing))
            )


@dataclass(frozen=True)
class ScalarComplexField:
    """Complex scalar samples on a grid at one instant.

    `excluded` marks nodes inside a declared singular core; operators widen it
    by their stencil reach so downstream consumers never trust contaminated
    cells. Values are kept finite everywhere (clamped inside the core).
    """

    grid: GridSpec
    values: np.ndarray
    time_label: float = 0.0
    name: str = "field"
    excluded: np.ndarray | None = None

    def __post_init__(self):
        if tuple(self.values.shape) != self.grid.shape:
            raise ValueError("values shape does not match grid")
        if self.excluded is not None and tuple(self.excluded.shape) != self.grid.shape:
            raise ValueError("exclusion mask shape does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite (clamp singular cores)")

    def with_values(self, values: np.ndarray, time_label: float | None = None) -> "ScalarComplexField":
        t = self.time_label if time_label is None else time_label
        return replace(self, values=values, time_label=t)

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume())


@dataclass(frozen=True)
class FourPotential:
    """External scalar potential V, vector potential A, scalar coupling chi, charge e.

    None components mean identically zero. Arrays live on the grid nodes.
    """

    grid: GridSpec
    scalar: np.ndarray | None = None
    vector: tuple[np.ndarray, ...] | None = None
    chi: np.ndarray | None = None
    charge: float = 0.0

    def __post_init__(self):
        for arr in self._all_arrays():
            if tuple(arr.shape) != self.grid.shape:
                raise ValueError("potential component shape does not match grid")

    def _all_arrays(self):
        out = []
        if self.scalar is not None:
            out.append(self.scalar)
        if self.vector is not None:
            out.extend(self.vector)
        if self.chi is not None:
            out.append(self.chi)
        return out

    @classmethod
    def zero(cls, grid: GridSpec) -> "FourPotential":
        return cls(grid=grid)

    def scalar_or_zero(self) -> np.ndarray:
        return np.zeros(self.grid.shape) if self.scalar is None else self.scalar

    def chi_or_zero(self) -> np.ndarray:
        return np.zeros(self.grid.shape) if self.chi is None else self.chi

    def vector_or_zero(self) -> tuple[np.ndarray, ...]:
        if self.vector is None:
            return tuple(np.zeros(self.grid.shape) for _ in range(self.grid.ndim))
        return self.vector

    def is_zero(self) -> bool:
        return self.scalar is None and self.vector is None and self.chi is None


# ---------------------------------------------------------------------------
# stencil machinery

def _shift(values: np.ndarray, axis: int, offset: int, boundary: Boundary) -> np.ndarray:
    """values sampled at node index i+offset along axis, honoring the boundary."""
    if boundary is Boundary.PERIODIC:
        return np.roll(values, -offset, axis=axis)
    # zero ghosts for dirichlet and the absorbing band
    out = np.zeros_like(values)
    n = values.shape[axis]
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    if offset > 0:
        src[axis] = slice(offset, n)
        dst[axis] = slice(0, n - offset)
    else:
        src[axis] = slice(0, n + offset)
        dst[axis] = slice(-offset, n)
    out[tuple(dst)] = values[tuple(src)]
    return out


def _axis_derivative(values, axis, h, boundary, order):
    if order == 2:
        return (_shift(values, axis, 1, boundary) - _shift(values, axis, -1, boundary)) / (2 * h)
    return (
        -_shift(values, axis, 2, boundary)
        + 8 * _shift(values, axis, 1, boundary)
        - 8 * _shift(values, axis, -1, boundary)
        + _shift(values, axis, -2, boundary)
    ) / (12 * h)


def _axis_second(values, axis, h, boundary, order):
    if order == 2:
        return (
            _shift(values, axis, 1, boundary) - 2 * values + _shift(values, axis, -1, boundary)
        ) / (h * h)
    return (
        -_shift(values, axis, 2, boundary)
        + 16 * _shift(values, axis, 1, boundary)
        - 30 * values
        + 16 * _shift(values, axis, -1, boundary)
        - _shift(values, axis, -2, boundary)
    ) / (12 * h * h)


def dilate_mask(mask: np.ndarray | None, grid: GridSpec, cells: int) -> np.ndarray | None:
    """Widen an exclusion mask by `cells` nodes along every axis."""
    if mask is None:
        return None
    out = mask.copy()
    for axis in range(grid.ndim):
        for off in range(1, cells + 1):
            out |= _shift(mask, axis, off, grid.boundary).astype(bool)
            out |= _shift(mask, axis, -off, grid.boundary).astype(bool)
    return out


def gradient(fld: ScalarComplexField, cfg: StencilConfig = StencilConfig()) -> np.ndarray:
    """Central-difference spatial gradient, shape (ndim, *grid.shape)."""
    g = fld.grid
    out = np.empty((g.ndim,) + g.shape, dtype=fld.values.dtype)
    for axis, h in enumerate(g.spacing):
        out[axis] = _axis_derivative(fld.values, axis, h, g.boundary, cfg.order)
    return out


def laplacian(fld: ScalarComplexField, cfg: StencilConfig = StencilConfig()) -> ScalarComplexField:
    g = fld.grid
    acc = np.zeros_like(fld.values)
    for axis, h in enumerate(g.spacing):
        acc += _axis_second(fld.values, axis, h, g.boundary, cfg.order)
    return ScalarComplexField(
        grid=g,
        values=acc,
        time_label=fld.time_label,
        name=fld.name + "_lap",
        excluded=dilate_mask(fld.excluded, g, cfg.halfwidth()),
    )


def dalembertian(
    before: ScalarComplexField,
    current: ScalarComplexField,
    after: ScalarComplexField,
    cfg: StencilConfig = StencilConfig(),
) -> ScalarComplexField:
    """d'Alembert operator from three consecutive time slices.

    Signature (+,-,-,-): box f = d^2f/dt^2 - Laplacian(f), evaluated at the
    middle slice. The time derivative is the plain second difference, so the
    overall accuracy is min(dt^2, h^cfg.order).
    """
    g = current.grid
    dt = after.time_label - current.time_label
    dt_back = current.time_label - before.time_label
    if not np.isclose(dt, dt_back, rtol=1e-12, atol=1e-15):
        raise ValueError("time slices must be equally spaced")
    second_t = (after.values - 2 * current.values + before.values) / (dt * dt)
    lap = laplacian(current, cfg)
    mask = lap.excluded
    for f in (before, after):
        extra = dilate_mask(f.excluded, g, cfg.halfwidth())
        if extra is not None:
            mask = extra if mask is None else (mask | extra)
    return ScalarComplexField(
        grid=g,
        values=second_t - lap.values,
        time_label=current.time_label,
        name=current.name + "_box",
        excluded=mask,
    )


# ---------------------------------------------------------------------------
# interpolation

class FieldInterpolator:
    """Multilinear interpolation of a field and (optionally) its gradient.

    Gradient components are finite-differenced once on the grid and then
    interpolated like the values, so gradients are continuous across cells.
    """

    def __init__(self, fld: ScalarComplexField, cfg: StencilConfig = StencilConfig(),
                 with_gradient: bool = True):
        self.grid = fld.grid
        axes = fld.grid.axes()
        self._value = RegularGridInterpolator(axes, fld.values, method="linear",
                                              bounds_error=True)
        self._grads = None
        if with_gradient:
            comps = gradient(fld, cfg)
            self._grads = [
                RegularGridInterpolator(axes, comps[i], method="linear", bounds_error=True)
                for i in range(fld.grid.ndim)
            ]
        self._excl = None
        if fld.excluded is not None:
            self._excl = RegularGridInterpolator(
                axes, fld.excluded.astype(float), method="linear", bounds_error=True
            )

    def _pts(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.grid.ndim:
            raise ValueError("query points have wrong dimension")
        return pts

    def values(self, points: np.ndarray) -> np.ndarray:
        try:
            return self._value(self._pts(points))
        except ValueError as exc:
            raise OutOfDomainError(str(exc)) from None

    def gradients(self, points: np.ndarray) -> np.ndarray:
        if self._grads is None:
            raise RuntimeError("interpolator built without gradients")
        pts = self._pts(points)
        try:
            return np.stack([g(pts) for g in self._grads], axis=-1)
        except ValueError as exc:
            raise OutOfDomainError(str(exc)) from None

    def touches_exclusion(self, points: np.ndarray) -> np.ndarray:
        if self._excl is None:
            return np.zeros(self._pts(points).shape[0], dtype=bool)
        return self._excl(self._pts(points)) > 0.0


def interpolate(fld: ScalarComplexField, point: Sequence[float],
                cfg: StencilConfig = StencilConfig()) -> tuple[complex, np.ndarray]:
    """Value and gradient of the field at one off-grid point."""
    interp = FieldInterpolator(fld, cfg)
    p = np.asarray(point, dtype=float)[None, :]
    return complex(interp.values(p)[0]), interp.gradients(p)[0]


def absorbing_ramp(grid: GridSpec, fraction: float = 0.1, strength: float = 20.0) -> np.ndarray:
    """Per-step damping factors exp(-gamma*dt) with a cosine^2 ramp.

    gamma rises smoothly from zero at the inner edge of the band (outer
    `fraction` of each axis) to `strength` at the wall.
    """
    gamma = np.zeros(grid.shape)
    for axis, ((lo, hi), x) in enumerate(zip(grid.extents, grid.axes())):
        width = fraction * (hi - lo)
        sl = [None] * grid.ndim
        sl[axis] = slice(None)
        prof = np.zeros_like(x)
        left = x < lo + width
        right = x > hi - width
        prof[left] = np.cos(np.pi / 2 * (x[left] - lo) / width) ** 2
        prof[right] = np.cos(np.pi / 2 * (hi - x[right]) / width) ** 2
        gamma = np.maximum(gamma, strength * prof[tuple(sl)])
    return np.exp(-gamma * grid.dt)


def sample(grid: GridSpec, fn: Callable[..., np.ndarray], t: float = 0.0,
           name: str = "field") -> ScalarComplexField:
    """Sample fn(t, x, y, ...) on the grid nodes."""
    mesh = grid.meshgrid()
    vals = np.asarray(fn(t, *mesh), dtype=complex)
    return ScalarComplexField(grid=grid, values=vals, time_label=t, name=name)
