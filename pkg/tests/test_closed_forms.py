import numpy as np
import pytest
from scipy import special

from closed_forms import (alpha_flux, alpha_star, angular_eigen_residual, angular_profile, c0_flux,
                          c0_flux_quadrature, c0_gamma, c0_quadrature, euler_residual, flat_pair,
                          fractional_flux_check, fundamental_residual, fundamental_solution, poisson_constant,
                          poisson_constant_exact, poisson_extend, poisson_kernel, poisson_kernel_mass,
                          poisson_moment, poisson_moment_exact, profile_P)
from utils.misc import InvalidParameterError, UnsupportedCaseError
from weighted_grid import Grid

S_VALUES = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def test_c0_half():
    assert c0_gamma(0.5) == pytest.approx(np.pi / 8., abs=1e-12)
    assert alpha_star(0.5, 1.) == pytest.approx(4. / np.sqrt(np.pi), rel=1e-12)


@pytest.mark.parametrize('s', S_VALUES)
def test_c0_gamma_matches_quadrature(s):
    assert abs(c0_gamma(s) - c0_quadrature(s)) <= 1e-8


@pytest.mark.parametrize('s', S_VALUES)
def test_alpha_star_balances_mass(s):
    M = 2.5
    assert c0_gamma(s) * alpha_star(s, M) ** 2 == pytest.approx(2. * M, rel=1e-12)


@pytest.mark.parametrize('s', S_VALUES)
def test_flux_constant(s):
    assert c0_flux(s) == pytest.approx(c0_flux_quadrature(s), rel=1e-9)
    assert c0_flux(s) * alpha_flux(s, 1.) ** 2 == pytest.approx(2., rel=1e-12)


def test_flux_constant_at_half_is_twice_c0():
    assert c0_flux(0.5) == pytest.approx(np.pi / 4., rel=1e-14)
    assert c0_flux(0.5) / c0_gamma(0.5) == pytest.approx(2., rel=1e-12)


def test_constants_reject_bad_input():
    for s in (0., 1., -0.3, np.nan):
        with pytest.raises(InvalidParameterError):
            c0_gamma(s)
    with pytest.raises(InvalidParameterError):
        alpha_star(0.5, 0.)


@pytest.mark.parametrize('s', [0.25, 0.5, 0.75])
def test_profile_is_homogeneous(s):
    assert euler_residual(s) <= 1e-6
    x = np.array([-0.7, -0.2, 0.1, 0.9])
    z = np.array([0.3, 0.05, 0.6, 0.2])
    lam = 3.7
    np.testing.assert_allclose(profile_P(lam * x, lam * z, s), lam ** s * profile_P(x, z, s), rtol=1e-12)


def test_profile_trace():
    s = 0.4
    x = np.linspace(-1., 1., 41)
    trace = profile_P(x, np.zeros_like(x), s)
    assert np.all(trace[x <= 0.] == 0.)
    np.testing.assert_allclose(trace[x > 0.], x[x > 0.] ** s, rtol=1e-14)
    assert profile_P(0., 0., s) == 0.


@pytest.mark.parametrize('s', [0.25, 0.5, 0.75])
def test_angular_eigen_identity(s):
    assert angular_eigen_residual(s) <= 1e-6
    theta = np.linspace(0., 0.9 * np.pi, 7)
    np.testing.assert_allclose(angular_profile(s)(theta), profile_P(np.cos(theta), np.sin(theta), s), rtol=1e-12)


@pytest.mark.parametrize('s', [0.25, 0.5, 0.75])
def test_angular_eigen_negative_control(s):
    wrong = lambda t: np.cos(0.5 * t) ** (2. * s + 0.5)
    assert angular_eigen_residual(s, wrong) >= 1e-2


@pytest.mark.parametrize('s', [0.25, 0.75])
def test_fundamental_solution(s):
    assert fundamental_residual(s) <= 1e-6
    assert fundamental_solution(2., s) == pytest.approx(2. ** (2. * s - 1.))


def test_fundamental_solution_logarithmic_case():
    with pytest.raises(UnsupportedCaseError):
        fundamental_solution(1., 0.5)


@pytest.mark.parametrize('s', [0.2, 0.5, 0.8])
def test_poisson_kernel(s):
    assert poisson_constant(s) == pytest.approx(poisson_constant_exact(s), rel=1e-9)
    assert poisson_kernel_mass(s, 0.3) == pytest.approx(1., rel=1e-9)
    assert poisson_moment(s, 0.3) == pytest.approx(poisson_moment_exact(s, 0.3), rel=1e-8)


def test_poisson_constant_half():
    assert poisson_constant_exact(0.5) == pytest.approx(1. / np.pi, rel=1e-14)


def test_poisson_extension_of_profile_trace():
    # the trace x+^s extends to P; compare away from the truncation at |x1| = 20
    s = 0.5
    x = np.linspace(-20., 20., 40001)
    trace = np.maximum(x, 0.) ** s
    at = np.array([-0.5, 0., 0.5])
    xn = 0.5
    got = poisson_extend(x, trace, xn, s, at=at)
    # tail beyond x1 = 20 of the kernel against z^s, bounded by C xn^(2s) int_20^inf z^(s-1-2s) dz
    tail = poisson_constant_exact(s) * xn ** (2. * s) * 20. ** (-s) / s
    np.testing.assert_allclose(got, profile_P(at, np.full(3, xn), s), atol=tail + 1e-4)


def test_flat_pair():
    g = Grid(0.5, 1., 1., 9, 5)
    u, chi = flat_pair(g, 2., 1.5)
    X1, XN = g.mesh()
    np.testing.assert_allclose(u.values, 1.5 * profile_P(X1, XN, 0.5))
    assert chi.values[4] == 1.
    assert np.all(chi.values[:4] == 0.) and np.all(chi.values[5:] == 2.)


@pytest.mark.parametrize('s', [0.25, 0.5, 0.75])
def test_symbol_check(s):
    rho = [fractional_flux_check(k, s) for k in (1, 2, 4)]
    assert max(rho) / min(rho) - 1. <= 0.05
    extension_constant = 2. ** (1. - 2. * s) * special.gamma(1. - s) / special.gamma(s)
    for value in rho:
        assert value == pytest.approx(extension_constant, rel=0.05)


def test_symbol_check_half_is_classical():
    # the extension of cos(k pi x) at s = 1/2 is the harmonic one, flux |xi|
    for k in (1, 2, 4):
        assert fractional_flux_check(k, 0.5) == pytest.approx(1., rel=1e-2)


def test_symbol_check_constant_mode():
    assert abs(fractional_flux_check(0, 0.5)) <= 1e-3
    with pytest.raises(InvalidParameterError):
        fractional_flux_check(-1, 0.5)



@pytest.mark.parametrize('s', [0.25, 0.5, 0.75])
def test_poisson_kernel_scale_invariance(s):
    z = np.linspace(-3., 3., 13)
    for lam in (0.1, 2., 7.):
        np.testing.assert_allclose(poisson_kernel(lam * z, lam * 0.4, s), poisson_kernel(z, 0.4, s) / lam,
                                   rtol=1e-13)
    assert poisson_kernel_mass(s, 3.) == pytest.approx(poisson_kernel_mass(s, 0.03), rel=1e-9)


@pytest.mark.parametrize('s', [0.25, 0.5, 0.75])
def test_poisson_extension_of_cosine_keeps_its_shape(s):
    x = np.linspace(-200., 200., 80001)
    at = np.array([-0.5, 0., 0.5, 1.])
    xn = 0.5
    ratio = poisson_extend(x, np.cos(x), xn, s, at=at) / np.cos(at)
    assert np.max(ratio) / np.min(ratio) - 1. <= 2e-3
    # single-mode profile 2^(1-s)/Gamma(s) t^s K_s(t)
    expected = 2. ** (1. - s) / special.gamma(s) * xn ** s * special.kv(s, xn)
    np.testing.assert_allclose(ratio, expected, rtol=2e-3)
