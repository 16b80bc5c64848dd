import numpy as np
import pytest
from numpy.testing import assert_allclose

from doublewave.analytic import FreeGaussian, HarmonicGround, vortex_state
from doublewave.fields import Boundary, FourPotential, GridSpec, sample
from doublewave.madelung import (
    bilinear_current,
    circulation,
    continuity_residual,
    decompose,
    hj_residual,
    make_circle_loop,
    quantum_potential,
    velocity_fields,
)


def _line_grid(points=161, half=4.0):
    return GridSpec(extents=((-half, half),), points=(points,), dt=0.01,
                    boundary=Boundary.PERIODIC)


def _plane_wave_polar(grid, k, om, t=0.3, dt=0.01, regime="relativistic"):
    def snap(tt):
        return sample(grid, lambda tq, x: np.exp(1j * (k * x - om * tq)), t=tt)
    return decompose(snap(t), snap(t - dt), snap(t + dt),
                     regime=regime, omega0=1.0)


# ---------------------------------------------------------------------------
# decompose on closed forms

def test_plane_wave_phase_gradient_matches_discrete_dispersion():
    g = _line_grid()
    k, om, dt = 0.75, 1.25, 0.01
    polar = _plane_wave_polar(g, k, om, dt=dt)
    h = g.spacing[0]
    # the bilinear form against a centered stencil returns sin(k h)/h exactly
    assert polar.ds_x[0][80] == pytest.approx(np.sin(k * h) / h, abs=1e-13)
    assert polar.ds_t[80] == pytest.approx(-np.sin(om * dt) / dt, abs=1e-12)


def test_nonrelativistic_slow_rate_strips_the_carrier():
    g = _line_grid()
    m, k = 1.0, 0.5
    e_kin = k * k / (2 * m)

    def snap(tt):
        return sample(g, lambda tq, x: np.exp(1j * (k * x - e_kin * tq)), t=tt)

    polar = decompose(snap(0.0), snap(-0.01), snap(0.01),
                      regime="nonrelativistic", omega0=m)
    # stored rate carries the carrier, slow_ds_t removes it again
    assert polar.ds_t[80] == pytest.approx(-e_kin - m, abs=1e-6)
    assert polar.slow_ds_t()[80] == pytest.approx(-e_kin, abs=1e-6)


def test_decompose_rejects_a_single_time_slice():
    g = _line_grid(points=64)
    fld = sample(g, lambda t, x: np.exp(1j * x), t=0.0)
    other = sample(g, lambda t, x: np.exp(1j * x), t=0.01)
    with pytest.raises(ValueError):
        decompose(fld, before=other)
    with pytest.raises(ValueError):
        decompose(fld, after=other)


def test_decompose_rejects_uneven_time_slices():
    g = _line_grid(points=64)

    def snap(tt):
        return sample(g, lambda t, x: np.exp(1j * (x - t)), t=tt)

    with pytest.raises(ValueError):
        decompose(snap(0.0), snap(-0.01), snap(0.02))


def test_slow_rate_is_refused_outside_the_envelope_regime():
    g = _line_grid(points=64)
    polar = _plane_wave_polar(g, 0.5, 1.2)
    with pytest.raises(ValueError):
        polar.slow_ds_t()


def test_amplitude_floor_marks_deep_tail_invalid():
    g = _line_grid(points=161, half=8.0)
    fld = sample(g, lambda t, x: np.exp(-x * x) + 0j, t=0.0)
    polar = decompose(fld, floor_frac=1e-4)
    x = g.axes()[0]
    assert not polar.valid_mask()[np.argmax(x > 7.0)]
    assert polar.valid_mask()[np.argmin(np.abs(x))]


# ---------------------------------------------------------------------------
# derived fields

def test_quantum_potential_completes_the_ground_state_energy():
    hg = HarmonicGround(omega=1.0, mass=1.0, dims=1)
    g = GridSpec(extents=((-6.0, 6.0),), points=(241,), dt=1e-3,
                 boundary=Boundary.PERIODIC)

    def snap(tt):
        return sample(g, lambda t, x: hg.psi(t, x), t=tt)

    polar = decompose(snap(0.2), snap(0.2 - 1e-3), snap(0.2 + 1e-3),
                      regime="nonrelativistic", omega0=hg.mass)
    x = g.axes()[0]
    band = np.abs(x) < 3.0
    q = quantum_potential(polar)
    gap = np.abs(q[band] + hg.potential(x)[band] - hg.energy)
    assert np.max(gap) < 5e-3


def test_hj_residual_vanishes_on_the_trap_ground_state():
    hg = HarmonicGround(omega=1.0, mass=1.0, dims=1)
    g = GridSpec(extents=((-6.0, 6.0),), points=(241,), dt=1e-3,
                 boundary=Boundary.PERIODIC)

    def snap(tt):
        return sample(g, lambda t, x: hg.psi(t, x), t=tt)

    polar = decompose(snap(0.2), snap(0.2 - 1e-3), snap(0.2 + 1e-3),
                      regime="nonrelativistic", omega0=hg.mass)
    x = g.axes()[0]
    # feed the trap through the scalar coupling channel: chi/(2m) = V
    pot = FourPotential(grid=g, chi=2.0 * hg.mass * hg.potential(x))
    res = hj_residual(polar, pot)
    assert np.max(np.abs(res[np.abs(x) < 3.0])) < 5e-3


def test_continuity_residual_on_a_spreading_packet():
    fg = FreeGaussian(dims=1, sigma0=1.0, mass=1.0)
    g = GridSpec(extents=((-8.0, 8.0),), points=(321,), dt=1e-3,
                 boundary=Boundary.PERIODIC)
    t, dt = 0.4, 1e-3

    def snap(tt):
        return sample(g, lambda tq, x: fg.psi(tq, x), t=tt)

    polar = decompose(snap(t), snap(t - dt), snap(t + dt),
                      regime="nonrelativistic", omega0=fg.mass)
    res, integral = continuity_residual(polar)
    assert np.max(np.abs(res)) < 2e-4
    assert abs(integral) < 1e-10


def test_continuity_needs_the_time_stack():
    g = _line_grid(points=64)
    fld = sample(g, lambda t, x: np.exp(-x * x) + 0j, t=0.0)
    with pytest.raises(ValueError):
        continuity_residual(decompose(fld))


# ---------------------------------------------------------------------------
# velocity fields and the conserved current

def test_relativistic_velocity_and_unit_four_velocity():
    g = _line_grid()
    k, om = 0.75, 1.25
    flow = velocity_fields(_plane_wave_polar(g, k, om))
    sl = slice(2, -2)  # seam-adjacent nodes see the periodic mismatch
    assert_allclose(flow.v3[0][sl], k / om * np.ones(157), atol=2e-4)
    assert np.all(flow.timelike[sl])
    norm = flow.v4[0][sl] ** 2 - flow.v4[1][sl] ** 2
    assert_allclose(norm, np.ones(157), atol=1e-12)


def test_velocity_is_gauge_covariant():
    g = _line_grid()
    k, om, e, alpha = 0.75, 1.25, 0.5, 0.8
    base = velocity_fields(_plane_wave_polar(g, k, om))
    # same physical wave written in a shifted gauge: S -> S + e alpha x,
    # A -> A + alpha
    pot = FourPotential(grid=g, vector=(alpha * np.ones(g.shape),), charge=e)
    gauged = velocity_fields(_plane_wave_polar(g, k + e * alpha, om), pot)
    sl = slice(2, -2)
    assert np.max(np.abs(gauged.v3[0][sl] - base.v3[0][sl])) < 1e-3


def test_bilinear_current_agrees_with_the_polar_route():
    g = _line_grid()
    k, om = 0.75, 1.25
    t, dt = 0.3, 0.01

    def snap(tt):
        return sample(g, lambda tq, x: np.exp(1j * (k * x - om * tq)), t=tt)

    cur, bef, aft = snap(t), snap(t - dt), snap(t + dt)
    pot = FourPotential(grid=g, scalar=0.3 * np.ones(g.shape),
                        vector=(0.2 * np.ones(g.shape),), charge=0.5)
    direct = bilinear_current(cur, bef, aft, pot, omega0=1.0)
    polar = decompose(cur, bef, aft, regime="relativistic", omega0=1.0)
    via_polar = velocity_fields(polar, pot).current
    assert np.max(np.abs(direct - via_polar)) < 1e-10


def test_nonrelativistic_flow_is_the_envelope_guidance_law():
    g = _line_grid()
    m, k = 2.0, 0.5

    def snap(tt):
        return sample(g, lambda tq, x: np.exp(1j * k * x), t=tt)

    polar = decompose(snap(0.0), regime="nonrelativistic", omega0=m)
    flow = velocity_fields(polar)
    h = g.spacing[0]
    assert flow.v3[0][80] == pytest.approx(np.sin(k * h) / h / m, abs=1e-13)
    assert_allclose(flow.current[0], polar.amplitude ** 2, atol=1e-14)


# ---------------------------------------------------------------------------
# circulation around a phase vortex

@pytest.fixture(scope="module")
def vortex_polar():
    g = GridSpec(extents=((-3.0, 3.0), (-3.0, 3.0)), points=(301, 301),
                 dt=0.01, boundary=Boundary.PERIODIC)
    return decompose(sample(g, vortex_state(1.0), t=0.0))


def test_make_circle_loop_geometry():
    loop = make_circle_loop((0.5, -0.2), 1.5, segments=64)
    assert loop.shape == (64, 2)
    radii = np.hypot(loop[:, 0] - 0.5, loop[:, 1] + 0.2)
    assert_allclose(radii, 1.5 * np.ones(64), atol=1e-12)


def test_vortex_circulation_is_one_quantum(vortex_polar):
    loop = make_circle_loop((0.0, 0.0), 1.0)
    assert circulation(vortex_polar, loop) == pytest.approx(2 * np.pi, abs=1e-3)


def test_circulation_flips_sign_with_orientation(vortex_polar):
    loop = make_circle_loop((0.0, 0.0), 1.0)
    forward = circulation(vortex_polar, loop)
    assert circulation(vortex_polar, loop[::-1]) == pytest.approx(-forward,
                                                                  abs=1e-12)


def test_loop_away_from_the_core_carries_no_circulation(vortex_polar):
    loop = make_circle_loop((1.8, 0.0), 0.4)
    assert circulation(vortex_polar, loop) == pytest.approx(0.0, abs=1e-3)


def test_circulation_refuses_loops_through_the_core(vortex_polar):
    tiny = make_circle_loop((0.0, 0.0), 0.005)
    with pytest.raises(ValueError):
        circulation(vortex_polar, tiny)
