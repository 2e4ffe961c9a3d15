#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: closed_forms.py
# =====================================

import functools
import logging

import numpy as np
from scipy import integrate, linalg, special

from utils.misc import UnsupportedCaseError, check_open_unit, require
from weighted_grid import Field, ThinField, face_weight

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

QUAD_OPTS = dict(epsabs=0., epsrel=1e-13, limit=500)


def _sinc(x):
    """sin(x)/x with the removable point filled in."""
    return np.sinc(np.asarray(x) / np.pi)


def profile_P(x1, xn, s):
    """2^-s (sqrt(x1^2 + xn^2) + x1)^s, with the conjugate form on x1 < 0."""
    check_open_unit(s)
    x1 = np.asarray(x1, dtype=np.float64)
    xn = np.asarray(xn, dtype=np.float64)
    rho = np.hypot(x1, xn)
    left = x1 < 0.
    with np.errstate(divide='ignore', invalid='ignore'):
        conj = np.where(left, xn * xn / np.where(left, rho - x1, 1.), 0.)
    base = np.where(left, conj, rho + x1)
    out = (0.5 * base) ** s
    return float(out) if out.ndim == 0 else out


class ProfileEval(object):
    """alpha * P(orientation * (x1 - x0), xn)."""

    def __init__(self, s, amplitude=1., x0=0., orientation=1):
        check_open_unit(s)
        require(amplitude >= 0., 'profile amplitude must be nonnegative, got {}'.format(amplitude))
        require(orientation in (1, -1), 'orientation must be +1 or -1, got {}'.format(orientation))
        self.s = float(s)
        self.amplitude = float(amplitude)
        self.x0 = float(x0)
        self.orientation = int(orientation)

    def __call__(self, x1, xn):
        x1 = np.asarray(x1, dtype=np.float64)
        return self.amplitude * profile_P(self.orientation * (x1 - self.x0), np.abs(xn), self.s)


def flat_pair(grid, M, alpha, x0=0., orientation=1):
    """Nodal alpha*P and chi = M on the positivity side, M/2 on a node sitting on the jump."""
    require(M > 0., 'mass must be positive, got {}'.format(M))
    X1, XN = grid.mesh()
    u = Field(grid, ProfileEval(grid.s, alpha, x0, orientation)(X1, XN))
    side = orientation * (grid.x1 - x0)
    on_jump = np.abs(side) <= 1e-12 * grid.L
    chi = np.where(side > 0., M, 0.)
    chi = np.where(on_jump, 0.5 * M, chi)
    return u, ThinField(grid.x1, chi)


def euler_residual(s, h=1e-4, num=64):
    """max |x.grad P - s P| on the unit half circle away from the contact set, central differences."""
    theta = np.linspace(0., 0.9 * np.pi, num)
    x1, xn = np.cos(theta), np.sin(theta)
    d1 = (profile_P(x1 + h, xn, s) - profile_P(x1 - h, xn, s)) / (2. * h)
    dn = (profile_P(x1, xn + h, s) - profile_P(x1, xn - h, s)) / (2. * h)
    return float(np.max(np.abs(x1 * d1 + xn * dn - s * profile_P(x1, xn, s))))


def c0_quadrature(s):
    """s^2 int_0^pi cos^(2s-1)(t/2) sin^(1-2s)(t) cos^2(t) dt.

    With phi = t/2 the singular factors combine to 2^(1-2s) sin^(1-2s)(phi), handled as an
    algebraic end-point weight.
    """
    check_open_unit(s)
    a = 1. - 2. * s
    f = lambda phi: _sinc(phi) ** a * np.cos(2. * phi) ** 2
    val, _ = integrate.quad(f, 0., 0.5 * np.pi, weight='alg', wvar=(a, 0.), **QUAD_OPTS)
    return float(2. * s * s * 2. ** a * val)


def c0_gamma(s):
    check_open_unit(s)
    log_ratio = special.gammaln(1. - s) - special.gammaln(3.5 - s)
    return float(s * s * 2. ** (-1. - 2. * s) * np.sqrt(np.pi) * (7. + 4. * s * (s - 2.)) * np.exp(log_ratio))


def alpha_star(s, M):
    require(np.isfinite(M) and M > 0., 'mass must be positive, got {}'.format(M))
    return float(np.sqrt(2. * M / c0_gamma(s)))


def c0_flux(s):
    """Energy-momentum flux constant of P through a circle centred on the free boundary.

    For u = alpha P the bulk part of the first domain variation along e1 tends to
    c0_flux(s) alpha^2 psi_1(0).
    """
    check_open_unit(s)
    return float(s * s * 2. ** (1. - 2. * s) * np.pi / np.sin(np.pi * s))


def c0_flux_quadrature(s):
    check_open_unit(s)
    a = 1. - 2. * s
    f = lambda phi: _sinc(phi) ** a * _sinc(0.5 * np.pi - phi) ** (-a)
    val, _ = integrate.quad(f, 0., 0.5 * np.pi, weight='alg', wvar=(a, -a), **QUAD_OPTS)
    return float(s * s * 2. ** a * 2. * val)


def alpha_flux(s, M):
    """Amplitude balancing the first domain variation against chi = M on the positivity side."""
    require(np.isfinite(M) and M > 0., 'mass must be positive, got {}'.format(M))
    return float(np.sqrt(2. * M / c0_flux(s)))


@functools.lru_cache(maxsize=None)
def poisson_constant(s):
    """Normalisation of the n = 2 Poisson kernel by quadrature: 1 / int (1 + t^2)^(-(1+2s)/2) dt."""
    check_open_unit(s)
    b = 2. * s - 1.
    # t = tan(phi): integrand cos^(2s-1)(phi) on [0, pi/2]
    f = lambda phi: _sinc(0.5 * np.pi - phi) ** b
    val, _ = integrate.quad(f, 0., 0.5 * np.pi, weight='alg', wvar=(0., b), **QUAD_OPTS)
    c = 1. / (2. * val)
    exact = poisson_constant_exact(s)
    if abs(c - exact) > 1e-8 * exact:
        logger.warning('poisson constant quadrature {} differs from the Beta form {}'.format(c, exact))
    return float(c)


def poisson_constant_exact(s):
    check_open_unit(s)
    return float(np.exp(special.gammaln(s + 0.5) - special.gammaln(s)) / np.sqrt(np.pi))


def poisson_kernel(z, xn, s):
    require(np.isfinite(xn) and xn > 0., 'xn must be positive, got {}'.format(xn))
    z = np.asarray(z, dtype=np.float64)
    out = poisson_constant(s) * xn ** (2. * s) / (z * z + xn * xn) ** (0.5 + s)
    return float(out) if out.ndim == 0 else out


def poisson_kernel_mass(s, xn):
    """int poisson_kernel(z, xn) dz, integrated in z = xn tan(phi)."""
    require(np.isfinite(xn) and xn > 0., 'xn must be positive, got {}'.format(xn))
    b = 2. * s - 1.

    def f(phi):
        z = xn * np.tan(phi)
        return poisson_kernel(z, xn, s) * xn / np.cos(phi) ** 2 / (0.5 * np.pi - phi) ** b

    val, _ = integrate.quad(f, 0., 0.5 * np.pi, weight='alg', wvar=(0., b), **QUAD_OPTS)
    return float(2. * val)


def poisson_moment(s, xn):
    """int |z|^s P_xn(z) dz, integrated in z = xn tan(phi) with the end-point power as weight."""
    require(np.isfinite(xn) and xn > 0., 'xn must be positive, got {}'.format(xn))
    check_open_unit(s)

    def f(phi):
        z = xn * np.tan(phi)
        return z ** s * poisson_kernel(z, xn, s) * xn / np.cos(phi) ** 2 / (0.5 * np.pi - phi) ** (s - 1.)

    val, _ = integrate.quad(f, 0., 0.5 * np.pi, weight='alg', wvar=(0., s - 1.), **QUAD_OPTS)
    return float(2. * val)


def poisson_moment_exact(s, xn):
    return float(poisson_constant_exact(s) * xn ** s * special.beta(0.5 * (1. + s), 0.5 * s))


def poisson_extend(x, values, xn, s, at=None, chunk=256):
    """Trapezoid convolution of the zero-extended trace with the Poisson kernel."""
    require(np.isfinite(xn) and xn > 0., 'xn must be positive, got {}'.format(xn))
    x = np.asarray(x, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    at = x if at is None else np.atleast_1d(np.asarray(at, dtype=np.float64))
    weights = ThinField(x, values).quadrature_weights() * values
    out = np.empty(at.shape)
    for start in range(0, len(at), chunk):
        stop = start + chunk
        out[start:stop] = poisson_kernel(at[start:stop, None] - x[None, :], xn, s) @ weights
    return out


class ColumnGrid(object):
    """Graded x_n column of a periodic strip; a single Fourier mode reduces the strip to one column."""

    def __init__(self, s, L=1., H=6., nodes=1000, nx=256, grading=None):
        check_open_unit(s)
        require(L > 0. and H > 0., 'column needs L, H > 0')
        require(nodes >= 8 and nx >= 8, 'column needs at least 8 nodes per axis')
        self.s = float(s)
        self.L = float(L)
        self.H = float(H)
        self.nx = int(nx)
        self.grading = float(grading) if grading is not None else min(12., max(4., 2. / s))
        t = np.arange(nodes + 1) / float(nodes)
        self.y = self.H * t ** self.grading
        self.y[0] = 0.
        self.conductance = face_weight(self.s, self.y[:-1], self.y[1:]) / np.diff(self.y) ** 2
        mid = 0.5 * (self.y[:-1] + self.y[1:])
        lo = np.concatenate([[0.], mid])
        hi = np.concatenate([mid, [self.H]])
        self.dual_weight = face_weight(self.s, lo, hi)

    def symbol(self, k):
        """Eigenvalue of the periodic second difference on the mode cos(k pi x1 / L)."""
        hx = 2. * self.L / self.nx
        xi = k * np.pi / self.L
        return 4. / hx ** 2 * np.sin(0.5 * xi * hx) ** 2

    def solve(self, k):
        """Column profile v (v(0) = 1, zero flux at H) and the weighted flux at x_n = 0."""
        lam = self.symbol(k)
        c = self.conductance
        m = lam * self.dual_weight
        n = len(self.y)
        diag = m.copy()
        diag[:-1] += c
        diag[1:] += c
        ab = np.zeros((3, n - 1))
        ab[0, 1:] = -c[1:]
        ab[1, :] = diag[1:]
        ab[2, :-1] = -c[1:]
        rhs = np.zeros(n - 1)
        rhs[0] = c[0]
        v = np.concatenate([[1.], linalg.solve_banded((1, 1), ab, rhs)])
        flux = c[0] * (v[0] - v[1]) + m[0] * v[0]
        return v, float(flux)


def fractional_flux_check(k, s, L=1., H=6., nodes=1000, nx=256, decay_tol=1e-4):
    """rho(k) = weighted flux of the extension of cos(k pi x1 / L) over (k pi / L)^(2s).

    k = 0 returns the flux itself, which vanishes for the constant trace.
    """
    require(int(k) == k and k >= 0, 'mode must be a nonnegative integer, got {}'.format(k))
    column = ColumnGrid(s, L, H, nodes, nx)
    require(k < column.nx // 2, 'mode {} is not resolved by {} periodic nodes'.format(k, column.nx))
    v, flux = column.solve(k)
    if k > 0 and abs(v[-1]) > decay_tol:
        logger.warning('mode {} has not decayed at x_n = {}: amplitude {:.3e}'.format(k, H, abs(v[-1])))
    if k == 0:
        return flux
    return flux / (k * np.pi / L) ** (2. * s)


def fundamental_solution(r, s, n=2):
    check_open_unit(s)
    exponent = n - 1. - 2. * s
    if exponent == 0.:
        raise UnsupportedCaseError('fundamental solution is logarithmic for n - 1 = 2s')
    require(np.all(np.asarray(r) > 0.), 'radius must be positive')
    out = np.asarray(r, dtype=np.float64) ** (-exponent)
    return float(out) if out.ndim == 0 else out


def _d4(f, x, h):
    return (f(x - 2. * h) - 8. * f(x - h) + 8. * f(x + h) - f(x + 2. * h)) / (12. * h)


def fundamental_residual(s, point=(0.3, 0.4), h=1e-3):
    """|L_s Phi_s| at a point off the thin space, nested 4th-order differences in flux form."""
    x1, xn = point
    require(xn != 0. and np.hypot(x1, xn) > 4. * h, 'residual point must stay off x_n = 0 and the origin')
    phi = lambda a, b: fundamental_solution(np.hypot(a, b), s)
    w = lambda b: np.abs(b) ** (1. - 2. * s)
    flux1 = lambda a: w(xn) * _d4(lambda t: phi(t, xn), a, h)
    fluxn = lambda b: w(b) * _d4(lambda t: phi(x1, t), b, h)
    return float(abs(_d4(flux1, x1, h) + _d4(fluxn, xn, h)))


def angular_profile(s):
    return lambda theta: np.cos(0.5 * theta) ** (2. * s)


def angular_eigen_residual(s, f=None, h=1e-3, num=181):
    """sup |sin^(2s-1) (sin^(1-2s) f')' - s(s-1) f| over interior angles; f defaults to cos^2s(theta/2)."""
    check_open_unit(s)
    f = angular_profile(s) if f is None else f
    theta = np.linspace(0.05 * np.pi, 0.95 * np.pi, num)
    g = lambda t: np.sin(t) ** (1. - 2. * s) * _d4(f, t, h)
    lhs = np.sin(theta) ** (2. * s - 1.) * _d4(g, theta, h)
    return float(np.max(np.abs(lhs - s * (s - 1.) * f(theta))))
