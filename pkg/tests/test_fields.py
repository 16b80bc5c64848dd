import numpy as np
import pytest
from numpy.testing import assert_allclose

from doublewave.fields import (
    Boundary,
    FieldInterpolator,
    GridSpec,
    ScalarComplexField,
    StencilConfig,
    absorbing_ramp,
    dalembertian,
    dilate_mask,
    gradient,
    laplacian,
    sample,
)


def _grid1(points=101, lo=-1.0, hi=1.0, boundary=Boundary.PERIODIC):
    return GridSpec(extents=((lo, hi),), points=(points,), dt=0.01,
                    boundary=boundary)


def test_grid_geometry():
    g = GridSpec(extents=((-2.0, 2.0), (0.0, 1.0)), points=(9, 11), dt=0.1,
                 boundary=Boundary.PERIODIC)
    assert g.ndim == 2
    assert g.shape == (9, 11)
    assert_allclose(g.spacing, [0.5, 0.1])
    assert_allclose(g.axes()[0], np.linspace(-2, 2, 9))
    assert g.cell_volume() == pytest.approx(0.05)
    assert g.cfl_limit() == pytest.approx(0.1 / np.sqrt(2))


def test_grid_rejects_tiny_axes():
    with pytest.raises(ValueError):
        GridSpec(extents=((0.0, 1.0),), points=(5,), dt=0.1,
                 boundary=Boundary.PERIODIC)


def test_radius_from():
    g = GridSpec(extents=((-1.0, 1.0), (-1.0, 1.0)), points=(21, 21), dt=0.1,
                 boundary=Boundary.PERIODIC)
    r = g.radius_from((0.0, 0.0))
    assert r.shape == (21, 21)
    assert r[10, 10] == 0.0
    assert r[10, 20] == pytest.approx(1.0)


def test_field_requires_finite_values():
    g = _grid1(11)
    bad = np.ones(11, dtype=complex)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        ScalarComplexField(grid=g, values=bad)


@pytest.mark.parametrize("order,expected", [(2, 2.0), (4, 4.0)])
def test_gradient_convergence_order(order, expected):
    slopes = []
    errs, hs = [], []
    for n in (64, 128, 256):
        g = GridSpec(extents=((0.0, 2 * np.pi * (1 - 1 / n)),), points=(n,),
                     dt=0.01, boundary=Boundary.PERIODIC)
        x = g.axes()[0]
        fld = ScalarComplexField(grid=g, values=np.exp(2j * x))
        d = gradient(fld, StencilConfig(order=order))[0]
        errs.append(np.max(np.abs(d - 2j * np.exp(2j * x))))
        hs.append(g.spacing[0])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(expected, abs=0.25)


def test_laplacian_2d_polynomial_exact():
    # x^2 + 3y^2 has laplacian 8; second-order stencils are exact on quadratics
    g = GridSpec(extents=((-1.0, 1.0), (-1.0, 1.0)), points=(41, 41), dt=0.01,
                 boundary=Boundary.DIRICHLET_ZERO)
    xs, ys = g.meshgrid()
    fld = ScalarComplexField(grid=g, values=(xs**2 + 3 * ys**2).astype(complex))
    lap = laplacian(fld, StencilConfig()).values
    inner = lap[2:-2, 2:-2]
    assert_allclose(inner.real, 8.0, atol=1e-11)


def test_dalembertian_plane_wave():
    # e^{i(kx - wt)} with w = k: box u = 0 up to discretization error
    k = 1.0
    g = GridSpec(extents=((0.0, 2 * np.pi * (1 - 1 / 256)),), points=(256,),
                 dt=0.001, boundary=Boundary.PERIODIC)
    x = g.axes()[0]

    def slice_at(t):
        return ScalarComplexField(grid=g, values=np.exp(1j * (k * x - k * t)),
                                  time_label=t)

    res = dalembertian(slice_at(-0.001), slice_at(0.0), slice_at(0.001),
                       StencilConfig())
    assert np.max(np.abs(res.values)) < 1e-4


def test_dirichlet_edges_use_zero_ghosts():
    g = _grid1(51, boundary=Boundary.DIRICHLET_ZERO)
    x = g.axes()[0]
    vals = np.cos(np.pi * x / 2)  # vanishes at both walls
    fld = ScalarComplexField(grid=g, values=vals.astype(complex))
    lap = laplacian(fld, StencilConfig()).values
    # wall nodes see the zero ghosts; the mode identity holds inside
    assert_allclose(lap.real[1:-1], -(np.pi / 2) ** 2 * vals[1:-1], atol=2e-3)


def test_dilate_mask():
    g = _grid1(11)
    mask = np.zeros(11, dtype=bool)
    mask[5] = True
    wide = dilate_mask(mask, g, 2)
    assert wide.sum() == 5
    assert wide[3] and wide[7] and not wide[2]
    assert dilate_mask(None, g, 2) is None


def test_interpolator_matches_nodes_and_blends():
    g = _grid1(21, 0.0, 2.0)
    x = g.axes()[0]
    fld = ScalarComplexField(grid=g, values=(3 * x + 1).astype(complex))
    itp = FieldInterpolator(fld)
    assert itp.values(np.array([[0.5]]))[0] == pytest.approx(2.5)
    # linear functions are reproduced exactly between nodes
    assert itp.values(np.array([[0.55]]))[0] == pytest.approx(2.65)
    assert itp.gradients(np.array([[0.55]]))[0, 0] == pytest.approx(3.0)


def test_interpolator_raises_outside_the_box():
    from doublewave.fields import OutOfDomainError
    g = _grid1(21, 0.0, 2.0)
    fld = ScalarComplexField(grid=g, values=np.ones(21, dtype=complex))
    itp = FieldInterpolator(fld)
    with pytest.raises(OutOfDomainError):
        itp.values(np.array([[2.5]]))


def test_sample_passes_time_and_mesh():
    g = GridSpec(extents=((0.0, 1.0), (0.0, 2.0)), points=(9, 9), dt=0.1,
                 boundary=Boundary.PERIODIC)
    fld = sample(g, lambda t, x, y: (x + 10 * y + t) + 0j, t=7.0, name="probe")
    assert fld.time_label == 7.0
    assert fld.name == "probe"
    assert fld.values[8, 8] == pytest.approx(1 + 20 + 7)


def test_absorbing_ramp_damps_only_the_edge_band():
    g = _grid1(101, -1.0, 1.0, boundary=Boundary.ABSORBING_MASK)
    ramp = absorbing_ramp(g, strength=10.0)
    assert ramp.shape == (101,)
    assert np.all((ramp > 0) & (ramp <= 1.0))
    assert np.all(ramp[40:60] == 1.0)
    assert ramp[0] < 1.0 and ramp[-1] < 1.0
