"""End-to-end acceptance gate.

Eleven headline behaviours, one per test, each printing a single PASS/FAIL
line (run with -s to see them on success). Everything goes through the same
scenario machinery the CLI uses, with the shipped configs.
"""
import json
from pathlib import Path

import numpy as np
import pytest

from doublewave.cli import main
from doublewave.config import parse_file
from doublewave.fields import Boundary, GridSpec, sample
from doublewave.analytic import vortex_state
from doublewave.madelung import circulation, decompose, make_circle_loop
from doublewave.scenarios import RunContext, verify_scenario

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def _verdict(num: int, label: str, ok: bool, detail: str) -> None:
    print("%s criterion %02d: %s (%s)" % ("PASS" if ok else "FAIL",
                                          num, label, detail))
    assert ok, "%s: %s" % (label, detail)


def _run_verify(tmp_path_factory, name: str) -> dict:
    cfg_file = CONFIG_DIR / (name + ".ini")
    cfg = parse_file(str(cfg_file))
    ctx = RunContext(cfg=cfg, config_text=cfg_file.read_text(),
                     out_dir=str(tmp_path_factory.mktemp(name)),
                     seed=cfg.get_int("scenario", "seed", 0), threads=2)
    checks, _ = verify_scenario(ctx)
    return {c["check_name"]: c for c in checks}


@pytest.fixture(scope="module")
def monopole_checks(tmp_path_factory):
    return _run_verify(tmp_path_factory, "moving_monopole")


@pytest.fixture(scope="module")
def plane_checks(tmp_path_factory):
    return _run_verify(tmp_path_factory, "plane_wave")


@pytest.fixture(scope="module")
def harmonic_checks(tmp_path_factory):
    return _run_verify(tmp_path_factory, "harmonic_oscillator")


@pytest.fixture(scope="module")
def gaussian_checks(tmp_path_factory):
    return _run_verify(tmp_path_factory, "free_gaussian")


@pytest.fixture(scope="module")
def perrin_checks(tmp_path_factory):
    return _run_verify(tmp_path_factory, "perrin_spreading")


@pytest.fixture(scope="module")
def helmholtz_checks(tmp_path_factory):
    return _run_verify(tmp_path_factory, "comoving_helmholtz")


def test_criterion_01_singular_residual_converges(monopole_checks):
    c = monopole_checks["monopole_residual_order"]
    assert len(c["residuals"]) == 4
    order = c["fitted_order"]
    _verdict(1, "wave-operator residual order on the comoving annulus",
             order >= 1.8,
             "fitted order %.4f over 4 refinements, need >= 1.8" % order)


def test_criterion_02_dispersion_and_internal_clock(plane_checks):
    d = plane_checks["dispersion"]
    clock = plane_checks["internal_clock"]["max_step_deviation"]
    ok = (abs(d["omega"] - 1.25) < 1e-12 and
          abs(d["k_magnitude"] - 0.75) < 1e-12 and
          d["residual"] < 1e-12 and clock < 1e-8)
    _verdict(2, "boosted carrier dispersion and clock rate",
             ok, "omega=%.12g k=%.12g residual=%.3g clock_dev=%.3g"
             % (d["omega"], d["k_magnitude"], d["residual"], clock))


def test_criterion_03_internal_stress_identity(harmonic_checks):
    c = harmonic_checks["quantum_potential_identity"]
    ok = c["max_deviation"] < 1e-6 and c["expected"] == 0.5
    _verdict(3, "trapped ground state: Q + V pins to omega/2",
             ok, "max |Q+V-0.5| = %.3g, need < 1e-6" % c["max_deviation"])


def test_criterion_04_conservation(gaussian_checks):
    norm = gaussian_checks["norm_conservation"]
    cont = gaussian_checks["continuity"]
    ok = (norm["steps"] == 1000 and norm["max_drift"] < 1e-8
          and cont["max_integral"] < 1e-6)
    _verdict(4, "norm drift over 1000 steps and continuity balance",
             ok, "drift=%.3g (<1e-8), continuity integral=%.3g (<1e-6)"
             % (norm["max_drift"], cont["max_integral"]))


def test_criterion_05_equivariance_and_ordering(gaussian_checks):
    eq = gaussian_checks["equivariance"]
    nc = gaussian_checks["no_crossing"]
    ok = (eq["final_tv"] <= 0.03 and nc["violations"] == 0
          and nc["pairs"] >= 9000)
    _verdict(5, "ensemble stays |psi|^2 through one width doubling",
             ok, "TV=%.4f (<=0.03) over %d walkers, crossings=%d"
             % (eq["final_tv"], nc["pairs"], nc["violations"]))


def test_criterion_06_near_field_guidance_law(perrin_checks):
    wg = perrin_checks["weak_guidance"]
    neg = perrin_checks["weak_guidance_negative_control"]
    ref = wg["reference_speed"]
    ok = (wg["fitted_exponent"] is not None
          and wg["fitted_exponent"] >= 0.8
          and wg["intercept"] <= 0.02 * ref
          and neg["pass"])
    _verdict(6, "slip vanishes as O(R); injected slip is resolved",
             ok, "exponent=%.3f (>=0.8), intercept=%.4f (<=%.4f), "
             "control intercept=%.4f vs injected %.4f"
             % (wg["fitted_exponent"] or float("nan"), wg["intercept"],
                0.02 * ref, neg["intercept"], neg["injected_slip"]))


def test_criterion_07_transport_integral(perrin_checks):
    c = perrin_checks["transport_integral"]
    order = c["refinement_order"]
    ok = (c["max_rel_mismatch"] <= 0.01 and order is not None
          and order >= 1.8)
    _verdict(7, "streamline growth integral matches the envelope",
             ok, "mismatch=%.3g (<=0.01), refinement order %.4f (>=1.8)"
             % (c["max_rel_mismatch"], order or float("nan")))


def test_criterion_08_amplitude_ratio_preserved(perrin_checks):
    ft = perrin_checks["f_transport"]
    neg = perrin_checks["f_transport_negative_control"]
    decay = max(ft["amplitude_decay"])
    ok = (ft["max_rel_drift"] < 0.01 and decay <= 0.51
          and neg["violation"] and neg["pass"])
    _verdict(8, "near-to-carrier ratio rides the flow; lock without "
             "harmony is flagged",
             ok, "drift=%.3g (<0.01) while carrier falls to %.3f of its "
             "start; control drift=%.3f (>0.2)"
             % (ft["max_rel_drift"], decay, neg["max_rel_drift"]))


def test_criterion_09_comoving_construction(helmholtz_checks):
    c = helmholtz_checks["comoving_helmholtz"]
    guard = helmholtz_checks["rigidity_guard"]
    ok = (c["residual_ratio"] <= 0.05 and c["pass"]
          and guard["pass"] and guard["rigidity_ratio"] >= 0.1)
    _verdict(9, "frozen near-field solves its annulus equation; "
             "wobble trips the guard",
             ok, "residual ratio=%.4f (<=0.05), guard ratio=%.3f -> %s"
             % (c["residual_ratio"], guard["rigidity_ratio"],
                guard["status"]))


def test_criterion_10_circulation_quantum():
    g = GridSpec(extents=((-3.0, 3.0), (-3.0, 3.0)), points=(301, 301),
                 dt=0.01, boundary=Boundary.PERIODIC)
    polar = decompose(sample(g, vortex_state(1.0), t=0.0))
    gamma = circulation(polar, make_circle_loop((0.0, 0.0), 1.0))
    err = abs(gamma - 2.0 * np.pi)
    _verdict(10, "winding-one loop integral lands on 2 pi",
             err < 1e-3, "circulation=%.6f, |err|=%.2g (<1e-3)" % (gamma, err))


REDUCED = """\
[scenario]
name = free_gaussian
seed = 11

[run]
steps = 200
save_stride = 50
traj_dt_factor = 5

[grid]
extent = -12.0, 12.0
points = 301

[ensemble]
n = 2000
bins = 16
paths = 5
"""


def test_criterion_11_thread_count_invariance(tmp_path, capsys):
    cfg = tmp_path / "reduced.ini"
    cfg.write_text(REDUCED)
    a, b = tmp_path / "one", tmp_path / "four"
    assert main(["simulate", str(cfg), "--out-dir", str(a), "--threads", "1"]) == 0
    assert main(["simulate", str(cfg), "--out-dir", str(b), "--threads", "4"]) == 0
    capsys.readouterr()
    names = sorted(p.name for p in a.iterdir()
                   if p.suffix in (".csv", ".json"))
    assert names, "simulate produced no delimited outputs"
    diffs = [n for n in names
             if (a / n).read_bytes() != (b / n).read_bytes()]
    with capsys.disabled():
        _verdict(11, "outputs do not depend on worker count",
                 not diffs, "%d CSV/JSON files byte-compared, %s"
                 % (len(names), "all identical" if not diffs
                    else "differing: " + ", ".join(diffs)))
