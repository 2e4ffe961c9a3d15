import numpy as np
import pytest
from scipy import special

from utils.misc import InvalidArgumentError, InvalidParameterError
from weighted_grid import (Field, FieldFunction, Grid, ThinField, face_weight, load_field_raw, load_thin_csv,
                           save_field_raw, save_thin_csv)


def test_face_weight_closed_form():
    s = 0.3
    p = 2. - 2. * s
    assert face_weight(s, 0., 0.5) == pytest.approx(0.5 ** p / p, rel=1e-15)
    out = face_weight(s, np.array([0., 0.1]), np.array([0.1, 0.2]))
    assert out.shape == (2,)
    assert np.sum(out) == pytest.approx(0.2 ** p / p, rel=1e-14)
    with pytest.raises(InvalidParameterError):
        face_weight(s, 0.2, 0.1)


def test_grid_layout():
    g = Grid(0.25, 1., 0.5, 9, 5)
    assert g.shape == (5, 9)
    assert g.x1[0] == -1. and g.x1[-1] == 1.
    assert g.xn[0] == 0.
    assert np.sum(g.col_width) == pytest.approx(2.)
    assert np.sum(g.segment_weight) == pytest.approx(face_weight(0.25, 0., 0.5), rel=1e-14)
    mask = g.boundary_mask()
    assert mask[-1].all() and mask[:, 0].all() and mask[:, -1].all()
    assert not mask[0, 1:-1].any()
    cx, cz = g.conductances()
    assert cx.shape == (5, 8) and cz.shape == (4, 9)
    assert np.all(cx > 0.) and np.all(cz > 0.)


def test_half_weight_reduces_to_five_point_stencil():
    g = Grid(0.5, 1., 0.5, 9, 6)
    hx, hz = g.hx, g.hz
    cx, cz = g.conductances()
    np.testing.assert_allclose(cx[1:-1], hz / hx, rtol=1e-14)
    np.testing.assert_allclose(cx[[0, -1]], 0.5 * hz / hx, rtol=1e-14)
    np.testing.assert_allclose(cz[:, 1:-1], hx / hz, rtol=1e-14)
    np.testing.assert_allclose(cz[:, [0, -1]], 0.5 * hx / hz, rtol=1e-14)


def test_coarsened_grid_and_restriction():
    g = Grid(0.3, 1., 0.5, 9, 5)
    coarse = g.coarsened()
    assert coarse == Grid(0.3, 1., 0.5, 5, 3)
    g = Grid(0.3, 1., 0.5, 9, 9)
    coarse = g.coarsened()
    assert coarse == Grid(0.3, 1., 0.5, 5, 5)
    np.testing.assert_allclose(coarse.x1, g.x1[::2], atol=1e-15)
    u = FieldFunction(lambda a, b: a + 2. * b).on_grid(g)
    np.testing.assert_array_equal(u.restricted().values, u.values[::2, ::2])
    assert u.restricted().grid == coarse
    assert Grid(0.3, 1., 0.5, 10, 9).coarsened() is None
    assert Grid(0.3, 1., 0.5, 9, 4).coarsened() is None
    assert Field(Grid(0.3, 1., 0.5, 10, 9), np.zeros((9, 10))).restricted() is None


def test_grid_rejects_bad_sizes():
    with pytest.raises(InvalidParameterError):
        Grid(0.5, 1., 1., 2, 9)
    with pytest.raises(InvalidParameterError):
        Grid(1.2, 1., 1., 9, 9)


@pytest.mark.parametrize('s', [0.25, 0.5, 0.75])
def test_half_disc_weighted_measure(s):
    g = Grid(s, 1., 1., 257, 129)
    r = 0.5
    measure = np.sum(g.disc_fraction(0., r) * g.cell_weight())
    exact = r ** (3. - 2. * s) / (3. - 2. * s) * special.beta(1. - s, 0.5)
    assert measure == pytest.approx(exact, rel=3e-3)


def test_interpolation_is_exact_for_bilinear_fields():
    g = Grid(0.5, 1., 1., 17, 9)
    fn = lambda a, b: 1. + 2. * a + 3. * b + a * b
    u = FieldFunction(fn).on_grid(g)
    x = np.array([-0.93, -0.1, 0.37, 0.999])
    z = np.array([0.01, 0.52, 0.77, 0.3])
    np.testing.assert_allclose(u.interpolate(x, z), fn(x, z), rtol=1e-13)
    np.testing.assert_allclose(u.interpolate(x, -z), u.interpolate(x, z), rtol=0.)
    with pytest.raises(InvalidArgumentError):
        u.interpolate(1.5, 0.2)


def test_field_rejects_bad_values():
    g = Grid(0.5, 1., 1., 5, 5)
    with pytest.raises(InvalidArgumentError):
        Field(g, np.zeros((4, 5)))
    values = np.zeros(g.shape)
    values[2, 2] = np.nan
    with pytest.raises(InvalidArgumentError):
        Field(g, values)


def test_thin_integral_is_exact_for_piecewise_linear_data():
    x = np.linspace(-1., 1., 21)
    thin = ThinField(x, x.copy())
    assert thin.integrate(-0.3, 0.7) == pytest.approx(0.2, abs=1e-15)
    assert thin.integrate(0.5, 0.5) == 0.
    assert np.sum(thin.quadrature_weights()) == pytest.approx(2.)


def test_field_files(tmp_path):
    g = Grid(0.4, 1., 0.5, 9, 5)
    X1, XN = g.mesh()
    u = Field(g, X1 ** 2 + XN)
    save_field_raw(u, str(tmp_path / 'u.field'))
    back = load_field_raw(str(tmp_path / 'u.field'))
    assert back.grid == g
    np.testing.assert_array_equal(back.values, u.values)

    save_thin_csv(u.trace(), str(tmp_path / 'chi.csv'), column='chi')
    thin = load_thin_csv(str(tmp_path / 'chi.csv'), column='chi')
    np.testing.assert_array_equal(thin.values, u.values[0])
    with pytest.raises(InvalidArgumentError):
        load_thin_csv(str(tmp_path / 'chi.csv'), column='value')
