import numpy as np
import pytest
from numpy.testing import assert_allclose

from doublewave.analytic import FreeGaussian
from doublewave.evolve import (
    NumericalDivergenceError,
    SchrodingerPropagator,
    check_cfl,
    cyclic_thomas_batched,
    diagnostics,
    kg_energy,
    kg_step,
    kg_taylor_start,
    schrodinger_step,
    solve_tridiag_1d,
    thomas_batched,
)
from doublewave.fields import Boundary, GridSpec, StencilConfig, sample


def _dense_tridiag(lower, diag, upper, corner_low=0.0, corner_up=0.0):
    n = diag.shape[0]
    a = np.diag(diag) + np.diag(upper[:-1], 1) + np.diag(lower[1:], -1)
    a[0, n - 1] += corner_low
    a[n - 1, 0] += corner_up
    return a


def _random_system(rng, n, batch=()):
    shape = batch + (n,)
    lower = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    upper = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    diag = (4.0 + rng.standard_normal(shape)
            + 1j * rng.standard_normal(shape))  # diagonally dominant
    rhs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return lower, diag, upper, rhs


# ---------------------------------------------------------------------------
# tridiagonal kernels

def test_thomas_matches_dense_solve():
    rng = np.random.default_rng(7)
    lower, diag, upper, rhs = _random_system(rng, 12)
    got = thomas_batched(lower, diag, upper, rhs)
    want = np.linalg.solve(_dense_tridiag(lower, diag, upper), rhs)
    assert_allclose(got, want, atol=1e-12)


def test_thomas_batches_over_leading_axes():
    rng = np.random.default_rng(8)
    lower, diag, upper, rhs = _random_system(rng, 10, batch=(5,))
    got = thomas_batched(lower, diag, upper, rhs)
    for b in range(5):
        want = np.linalg.solve(_dense_tridiag(lower[b], diag[b], upper[b]),
                               rhs[b])
        assert_allclose(got[b], want, atol=1e-12)


def test_cyclic_thomas_matches_dense_solve():
    rng = np.random.default_rng(9)
    lower, diag, upper, rhs = _random_system(rng, 12)
    cl, cu = 0.7 - 0.2j, -0.4 + 0.5j
    got = cyclic_thomas_batched(lower, diag, upper, rhs, cl, cu)
    want = np.linalg.solve(_dense_tridiag(lower, diag, upper, cl, cu), rhs)
    assert_allclose(got, want, atol=1e-12)


def test_lapack_path_agrees_with_dense_solve():
    rng = np.random.default_rng(10)
    lower, diag, upper, rhs = _random_system(rng, 16)
    got = solve_tridiag_1d(lower, diag, upper, rhs, periodic=False)
    want = np.linalg.solve(_dense_tridiag(lower, diag, upper), rhs)
    assert_allclose(got, want, atol=1e-12)
    corner = 0.3 + 0.1j
    got_p = solve_tridiag_1d(lower, diag, upper, rhs, periodic=True,
                             corner=corner)
    want_p = np.linalg.solve(
        _dense_tridiag(lower, diag, upper, corner, corner), rhs)
    assert_allclose(got_p, want_p, atol=1e-12)


# ---------------------------------------------------------------------------
# envelope stepping

@pytest.fixture(scope="module")
def packet_grid():
    return GridSpec(extents=((-12.0, 12.0),), points=(481,), dt=0.002,
                    boundary=Boundary.PERIODIC)


def _packet(grid, t=0.0):
    fg = FreeGaussian(dims=1, sigma0=1.0, mass=1.0)
    return sample(grid, lambda tq, x: fg.psi(tq, x), t=t)


def test_cayley_step_conserves_the_norm(packet_grid):
    prop = SchrodingerPropagator(packet_grid, mass=1.0)
    fld = _packet(packet_grid)
    n0 = np.sum(np.abs(fld.values) ** 2)
    for fld in prop.evolve(fld, 100):
        pass
    assert abs(np.sum(np.abs(fld.values) ** 2) - n0) / n0 < 1e-12


def test_cayley_step_is_reversible(packet_grid):
    prop = SchrodingerPropagator(packet_grid, mass=1.0)
    fld0 = _packet(packet_grid)
    fld = fld0
    for fld in prop.evolve(fld, 100):
        pass
    for fld in prop.reversed().evolve(fld, 100):
        pass
    assert np.max(np.abs(fld.values - fld0.values)) < 1e-12
    assert fld.time_label == pytest.approx(0.0, abs=1e-12)


def test_free_spreading_tracks_the_closed_form(packet_grid):
    fg = FreeGaussian(dims=1, sigma0=1.0, mass=1.0)
    prop = SchrodingerPropagator(packet_grid, mass=1.0)
    fld = _packet(packet_grid)
    for fld in prop.evolve(fld, 250):
        pass
    want = fg.psi(fld.time_label, packet_grid.axes()[0])
    assert np.max(np.abs(fld.values - want)) < 1e-4


def test_fourth_order_stencil_sharpens_coarse_grids():
    grid = GridSpec(extents=((-12.0, 12.0),), points=(121,), dt=0.001,
                    boundary=Boundary.DIRICHLET_ZERO)
    fg = FreeGaussian(dims=1, sigma0=1.0, mass=1.0)
    errs = {}
    for order in (2, 4):
        prop = SchrodingerPropagator(grid, mass=1.0,
                                     cfg=StencilConfig(order=order))
        fld = sample(grid, lambda t, x: fg.psi(t, x), t=0.0)
        for fld in prop.evolve(fld, 200):
            pass
        want = fg.psi(fld.time_label, grid.axes()[0])
        errs[order] = np.max(np.abs(fld.values - want))
    assert errs[4] < errs[2] / 10


def test_fourth_order_is_limited_to_zero_boundary_lines():
    per = GridSpec(extents=((-1.0, 1.0),), points=(32,), dt=0.001,
                   boundary=Boundary.PERIODIC)
    with pytest.raises(ValueError):
        SchrodingerPropagator(per, cfg=StencilConfig(order=4))


def test_envelope_stepper_rejects_3d_grids():
    g3 = GridSpec(extents=((-1.0, 1.0),) * 3, points=(8, 8, 8), dt=0.001,
                  boundary=Boundary.PERIODIC)
    with pytest.raises(ValueError):
        SchrodingerPropagator(g3)


def test_absorbing_band_drains_an_outgoing_packet():
    grid = GridSpec(extents=((-10.0, 10.0),), points=(401,), dt=0.005,
                    boundary=Boundary.ABSORBING_MASK)
    k = 4.0
    fld = sample(grid, lambda t, x: np.exp(-((x - 4.0) ** 2) + 1j * k * x),
                 t=0.0)
    n0 = np.sum(np.abs(fld.values) ** 2)
    prop = SchrodingerPropagator(grid, mass=1.0)
    for fld in prop.evolve(fld, 600):
        pass
    assert np.sum(np.abs(fld.values) ** 2) < 0.5 * n0


def test_divergence_guard_trips_on_budget_overrun(packet_grid):
    # factor below 1 turns any amplitude ripple into an overrun
    prop = SchrodingerPropagator(packet_grid, mass=1.0)
    fld = _packet(packet_grid)
    with pytest.raises(NumericalDivergenceError):
        for fld in prop.evolve(fld, 10, divergence_factor=1e-12):
            pass


def test_single_step_wrapper_matches_the_propagator(packet_grid):
    fld = _packet(packet_grid)
    via_prop = SchrodingerPropagator(packet_grid, mass=1.0).step(fld)
    via_fn = schrodinger_step(fld, mass=1.0)
    assert_allclose(via_fn.values, via_prop.values, atol=1e-15)
    assert via_fn.time_label == pytest.approx(packet_grid.dt)


def test_diagnostics_reports_norm_and_center():
    grid = GridSpec(extents=((-8.0, 8.0),), points=(321,), dt=0.01,
                    boundary=Boundary.PERIODIC)
    fld = sample(grid, lambda t, x: np.pi ** -0.25 * np.exp(
        -0.5 * (x - 1.5) ** 2) + 0j, t=0.0)
    d = diagnostics(fld)
    assert d["norm"] == pytest.approx(1.0, abs=1e-8)
    assert d["center_of_mass"][0] == pytest.approx(1.5, abs=1e-8)
    assert d["time"] == 0.0


# ---------------------------------------------------------------------------
# relativistic leapfrog

@pytest.fixture(scope="module")
def kg_plane_state():
    grid = GridSpec(extents=((-8.0, 8.0),), points=(161,), dt=0.02,
                    boundary=Boundary.PERIODIC)
    k = 2 * np.pi * 3 / 16.0
    om = float(np.sqrt(k * k + 1.0))
    u0 = sample(grid, lambda t, x: np.exp(1j * (k * x - om * t)), t=0.0)
    dudt0 = -1j * om * u0.values
    return kg_taylor_start(u0, dudt0, omega=1.0)


def test_kg_energy_is_a_discrete_invariant(kg_plane_state):
    state = kg_plane_state
    e0 = kg_energy(state)
    for _ in range(200):
        state = kg_step(state)
    assert abs(kg_energy(state) - e0) / abs(e0) < 1e-12


def test_kg_leapfrog_reverses_exactly(kg_plane_state):
    state = kg_plane_state
    ref = state.current.values.copy()
    for _ in range(100):
        state = kg_step(state)
    # the slice swap puts `current` one step behind, hence n - 1 returns
    state = state.reversed()
    for _ in range(99):
        state = kg_step(state)
    assert state.current.time_label == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(state.current.values - ref)) < 1e-12


def test_taylor_start_error_shrinks_at_second_order():
    grid = GridSpec(extents=((-8.0, 8.0),), points=(161,), dt=0.02,
                    boundary=Boundary.PERIODIC)
    k = 2 * np.pi * 3 / 16.0
    om = float(np.sqrt(k * k + 1.0))
    u0 = sample(grid, lambda t, x: np.exp(1j * (k * x - om * t)), t=0.0)
    dudt0 = -1j * om * u0.values
    errs = []
    for dt in (0.04, 0.02):
        state = kg_taylor_start(u0, dudt0, omega=1.0, dt=dt)
        want = np.exp(1j * (k * grid.axes()[0] + om * dt))
        errs.append(np.max(np.abs(state.previous.values - want)))
    assert errs[0] / errs[1] > 3.5


def test_check_cfl_rejects_oversized_steps():
    grid = GridSpec(extents=((-1.0, 1.0),), points=(101,), dt=0.02,
                    boundary=Boundary.PERIODIC)
    with pytest.raises(ValueError):
        check_cfl(grid, dt=0.1)
    check_cfl(grid, dt=0.005)  # comfortably inside the bound


def test_kg_step_pins_zero_boundary_walls():
    grid = GridSpec(extents=((-4.0, 4.0),), points=(81,), dt=0.02,
                    boundary=Boundary.DIRICHLET_ZERO)
    u0 = sample(grid, lambda t, x: np.exp(-x * x) + 0j, t=0.0)
    state = kg_taylor_start(u0, np.zeros(grid.shape, complex), omega=1.0)
    for _ in range(20):
        state = kg_step(state)
    assert state.current.values[0] == 0.0
    assert state.current.values[-1] == 0.0
