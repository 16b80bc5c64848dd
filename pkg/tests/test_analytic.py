import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from doublewave.analytic import (
    FreeGaussian,
    HarmonicGround,
    MonopoleSpec,
    PlanePhaseWave,
    boost_event,
    boost_phase,
    eval_monopole,
    fit_loglog_order,
    fit_power_and_intercept,
    gamma_factor,
    helmholtz_multipole,
    helmholtz_radial,
    residual_oracle,
    vortex_state,
)

subluminal = st.floats(min_value=-0.9, max_value=0.9,
                       allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------------------
# frozen reference values (computed with an independent symbolic derivation)

def test_boosted_simple_kernel_frozen_value():
    spec = MonopoleSpec(kind="kg_simple", omega0=1.0, velocity=(0.3, 0.0, 0.0))
    got = eval_monopole(spec, 0.3, [np.array([1.1]), np.array([0.4]),
                                    np.array([-0.3])])[0]
    assert got == pytest.approx(0.06792948979125828 + 0.0021369881714829965j,
                                abs=1e-15)


def test_free_gaussian_frozen_value():
    fg = FreeGaussian(dims=1, sigma0=1.0, mass=1.0)
    got = complex(fg.psi(1.5, np.array([0.8]))[0])
    assert got == pytest.approx(0.4947284135857447 - 0.12366732817603043j,
                                abs=1e-14)


def test_harmonic_ground_frozen_value():
    hg = HarmonicGround(omega=2.0, mass=0.5, dims=1)
    assert float(hg.amplitude(np.array([0.7]))[0]) == pytest.approx(
        0.5879093724421046, abs=1e-15)
    assert hg.energy == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# monopole family structure

def test_rest_timesym_matches_formula():
    spec = MonopoleSpec(kind="dalembert_timesym", omega0=2.0)
    r = np.array([0.7])
    got = eval_monopole(spec, 0.4, [r, np.zeros(1), np.zeros(1)])[0]
    want = np.exp(-2j * 0.4) * np.cos(2.0 * 0.7) / (4 * np.pi * 0.7)
    assert got == pytest.approx(want, abs=1e-15)


def test_constrained_reduces_to_simple_at_rest_pulsation():
    base = MonopoleSpec(kind="kg_simple", omega0=1.0)
    osc = MonopoleSpec(kind="kg_constrained_oscillatory", omega0=1.0, omega=1.0)
    eva = MonopoleSpec(kind="kg_constrained_evanescent", omega0=1.0, omega=1.0)
    pts = [np.linspace(0.3, 2.0, 7), np.full(7, 0.2), np.full(7, -0.1)]
    u0 = eval_monopole(base, 0.9, pts)
    assert_allclose(eval_monopole(osc, 0.9, pts), u0, atol=1e-14)
    assert_allclose(eval_monopole(eva, 0.9, pts), u0, atol=1e-14)


def test_constrained_branches_split_away_from_rest_pulsation():
    osc = MonopoleSpec(kind="kg_constrained_oscillatory", omega0=1.0, omega=1.4)
    eva = MonopoleSpec(kind="kg_constrained_evanescent", omega0=1.0, omega=0.6)
    r = 1.3
    pts = [np.array([r]), np.zeros(1), np.zeros(1)]
    kr = math.sqrt(1.4**2 - 1.0)
    want_osc = np.exp(-1.4j * 0.2) * math.cos(kr * r) / (4 * math.pi * r)
    want_eva = np.exp(-0.6j * 0.2) * math.exp(-math.sqrt(1 - 0.6**2) * r) / (4 * math.pi * r)
    assert eval_monopole(osc, 0.2, pts)[0] == pytest.approx(want_osc, abs=1e-15)
    assert eval_monopole(eva, 0.2, pts)[0] == pytest.approx(want_eva, abs=1e-15)
    with pytest.raises(ValueError):
        MonopoleSpec(kind="kg_constrained_oscillatory", omega0=1.0, omega=0.5)


def test_r_floor_clamps_the_core():
    spec = MonopoleSpec(kind="kg_simple", omega0=1.0)
    vals = eval_monopole(spec, 0.0, [np.array([1e-9]), np.zeros(1), np.zeros(1)],
                         r_floor=0.05)
    assert np.isfinite(vals[0])
    assert abs(vals[0]) == pytest.approx(1.0 / (4 * np.pi * 0.05))


def test_residual_oracle_recovers_second_order_on_plane_wave():
    # smooth probe: uniform fourth derivatives give a clean O(h^2) signal
    k = np.array([0.9, 0.4, 0.2])
    w = float(np.sqrt(k @ k + 1.0))

    def sol(t, *mesh):
        phase = sum(ki * m for ki, m in zip(k, mesh)) - w * t
        return np.exp(1j * phase)

    report = residual_oracle(sol, "kg", [(-1.4, 1.4)] * 3, [0.2, 0.14, 0.1],
                             t=0.3, omega=1.0)
    assert report["fitted_order"] == pytest.approx(2.0, abs=0.1)
    assert report["residuals"][-1] < report["residuals"][0]


def test_residual_oracle_refuses_report_region_on_worldline():
    spec = MonopoleSpec(kind="kg_simple", omega0=1.0)
    with pytest.raises(ValueError):
        residual_oracle(
            lambda t, *mesh: eval_monopole(spec, t, mesh, 0.01),
            "kg", [(-1.4, 1.4)] * 3, [0.2],
            t=0.0, omega=1.0, singular_points=[(0.0, 0.0, 0.0)],
            report_mask=lambda x, y, z: np.ones_like(x, dtype=bool))


# ---------------------------------------------------------------------------
# kinematics

@given(v=subluminal)
def test_gamma_factor(v):
    assert gamma_factor((v, 0.0, 0.0)) == pytest.approx(1 / math.sqrt(1 - v * v))


def test_gamma_rejects_light_speed():
    with pytest.raises(ValueError):
        gamma_factor((1.0, 0.0, 0.0))


@given(v=subluminal, t=st.floats(-5, 5), x=st.floats(-5, 5))
@settings(max_examples=60)
def test_boost_round_trip(v, t, x):
    t0, xs0 = boost_event(t, [np.array([x]), np.zeros(1), np.zeros(1)],
                          (v, 0.0, 0.0))
    t1, xs1 = boost_event(t0, xs0, (-v, 0.0, 0.0))
    assert float(np.ravel(t1)[0]) == pytest.approx(t, abs=1e-9)
    assert float(xs1[0][0]) == pytest.approx(x, abs=1e-9)


@given(v=st.floats(min_value=-0.95, max_value=0.95))
@settings(max_examples=80)
def test_dispersion_closure(v):
    w = PlanePhaseWave(1.0, (v, 0.0, 0.0))
    assert w.dispersion_residual() < 1e-12
    assert w.omega == pytest.approx(w.gamma)
    assert w.clock_pulsation == pytest.approx(1.0 / w.gamma)


def test_plane_wave_v06_values():
    w = PlanePhaseWave(1.0, (0.6, 0.0, 0.0))
    assert w.omega == pytest.approx(1.25)
    assert np.linalg.norm(w.wavevector) == pytest.approx(0.75)


@given(v=subluminal, t=st.floats(-3, 3), x=st.floats(-3, 3))
@settings(max_examples=60)
def test_boosted_phase_is_the_rest_phase(v, t, x):
    w = PlanePhaseWave(1.0, (v, 0.0, 0.0))
    xs = [np.array([x]), np.zeros(1), np.zeros(1)]
    # v = 0 short-circuits the boost and returns 0-d arrays, hence ravel
    assert float(np.ravel(boost_phase(w, t, xs))[0]) == pytest.approx(
        float(np.ravel(w.phase(t, xs))[0]), abs=1e-9)


# ---------------------------------------------------------------------------
# spreading envelope

def test_free_gaussian_width_and_doubling():
    fg = FreeGaussian(dims=1, sigma0=0.8, mass=2.0)
    td = fg.doubling_time()
    assert td == pytest.approx(2 * math.sqrt(3) * 2.0 * 0.8**2)
    assert fg.sigma(td) == pytest.approx(2 * 0.8)
    assert fg.flow_factor(td) == pytest.approx(2.0)


@given(x0=st.floats(-2, 2), t=st.floats(0.01, 5))
@settings(max_examples=60)
def test_pullback_inverts_the_streamline(x0, t):
    fg = FreeGaussian(dims=1, sigma0=1.0, mass=1.0)
    forward = x0 * fg.sigma(t) / fg.sigma(0.0)
    back = fg.pullback(t, np.array([[forward]]))[0, 0]
    assert back == pytest.approx(x0, abs=1e-10)


def test_amplitude_decay_along_streamline():
    fg = FreeGaussian(dims=2, sigma0=1.0, mass=1.0)
    t = fg.doubling_time()
    x0 = np.array([0.6, -0.3])
    xt = x0 * fg.sigma(t) / fg.sigma(0.0)
    a0 = float(fg.amplitude(0.0, *[np.atleast_1d(c) for c in x0])[0])
    at = float(fg.amplitude(t, *[np.atleast_1d(c) for c in xt])[0])
    assert at / a0 == pytest.approx((1 / 2) ** (2 / 2), rel=1e-12)


def test_velocity_is_position_times_log_derivative_of_width():
    fg = FreeGaussian(dims=1, sigma0=1.0, mass=1.0)
    t = 1.3
    x = np.array([0.9])
    v = fg.velocity(t, x)[0][0]
    eps = 1e-6
    want = 0.9 * (fg.sigma(t + eps) - fg.sigma(t - eps)) / (2 * eps) / fg.sigma(t)
    assert v == pytest.approx(want, rel=1e-6)


# ---------------------------------------------------------------------------
# fits and the frozen-profile kernels

def test_fit_helpers_recover_synthetic_laws():
    r = np.array([0.1, 0.2, 0.4, 0.8])
    assert fit_loglog_order(r, 3 * r**2.5) == pytest.approx(2.5)
    power, intercept = fit_power_and_intercept(r, 0.7 + 2 * r)
    assert intercept == pytest.approx(0.7, abs=1e-12)


def test_helmholtz_radial_branches():
    # normalized so that r*H -> 1 at the core
    r = np.array([0.5, 1.0, 2.0])
    assert_allclose(helmholtz_radial(4.0, r), np.cos(2 * r) / r, atol=1e-14)
    assert_allclose(helmholtz_radial(-4.0, r), np.exp(-2 * r) / r, atol=1e-14)
    assert_allclose(helmholtz_radial(0.0, r), 1 / r, atol=1e-14)


@given(s=st.floats(-1e-4, 1e-4))
def test_helmholtz_branch_continuity_near_zero(s):
    # both branches deviate from 1/r at first order in sqrt(|s|) * r
    r = np.array([0.7])
    slack = 1.5 * math.sqrt(abs(s)) * 0.7 + 1e-12
    assert float(helmholtz_radial(s, r)[0]) == pytest.approx(1 / 0.7, rel=slack)


def test_helmholtz_multipole_reduces_to_radial_without_drift():
    x = np.array([[0.3, 0.4, 0.0], [0.0, 0.0, 1.2]])
    r = np.linalg.norm(x, axis=1)
    got = helmholtz_multipole(2.25, np.zeros(3), x)
    assert_allclose(got, helmholtz_radial(2.25, r), atol=1e-14)


def test_helmholtz_multipole_drift_factor():
    a = np.array([0.5, 0.0, 0.0])
    x = np.array([[0.6, 0.0, 0.0]])
    base = helmholtz_multipole(1.0, np.zeros(3), x)[0]
    got = helmholtz_multipole(1.0 + 0.25, a, x)[0]
    assert got == pytest.approx(base * math.exp(-0.3), rel=1e-12)


def test_vortex_state_values():
    f = vortex_state(1.0)
    x, y = np.array([0.3]), np.array([-0.4])
    want = (0.3 - 0.4j) * np.exp(-(0.25) / 2)
    assert f(0.0, x, y)[0] == pytest.approx(want, abs=1e-14)
