#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: energy_weiss.py
# =====================================

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import special

from utils.misc import InvalidRadiusError, require
from utils.task_pool import parallel_map
from weighted_grid import ThinField, build_grid, check_same_grid, check_thin_matches, face_weight

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

SPHERE_PANELS = 512


@dataclass
class WeissCurve:
    center: float
    radii: List[float]
    psi: List[float]
    bulk: List[float]
    sphere: List[float]
    thin: List[float]
    c_mono: float = 10.
    h: float = 0.
    monotone: bool = True
    violations: List[int] = field(default_factory=list)

    def to_dict(self):
        return dataclasses.asdict(self)

    def rows(self):
        return [dict(r=r, psi=p, bulk=b, sphere=sp, thin=t)
                for r, p, b, sp, t in zip(self.radii, self.psi, self.bulk, self.sphere, self.thin)]


def sine_power_integral(p, a, b):
    """int_a^b sin^p(theta) dtheta on [0, pi], p > -1, through the regularized incomplete Beta."""
    q = 0.5 * (p + 1.)
    total = special.beta(q, 0.5)

    def primitive(t):
        t = np.asarray(t, dtype=np.float64)
        lower = 0.5 * total * special.betainc(q, 0.5, np.sin(np.minimum(t, np.pi - t)) ** 2)
        return np.where(t <= 0.5 * np.pi, lower, total - lower)

    return primitive(b) - primitive(a)


def _sphere_panels(m=SPHERE_PANELS):
    t = np.linspace(0., 1., m + 1)
    # clustered towards both poles
    theta = np.pi * (t - np.sin(2. * np.pi * t) / (2. * np.pi))
    theta[0], theta[-1] = 0., np.pi
    return theta


def _cell_energy(u):
    """Share of the discrete Dirichlet sum carried by every cell, (nz-1, nx-1)."""
    g = u.grid
    v = u.values
    s, hx, hz = g.s, g.hx, g.hz
    lower = face_weight(s, g.xn[:-1], g.xn[:-1] + 0.5 * hz)[:, None]
    upper = face_weight(s, g.xn[1:] - 0.5 * hz, g.xn[1:])[:, None]
    dx = np.diff(v, axis=1)
    dz = np.diff(v, axis=0)
    horizontal = (lower * dx[:-1] ** 2 + upper * dx[1:] ** 2) / hx
    vertical = 0.5 * hx * (g.vertical_face_weight[:, None] / hz) * (dz[:, :-1] ** 2 + dz[:, 1:] ** 2)
    return horizontal + vertical


def _cell_bulk(u, x0, r):
    frac = u.grid.disc_fraction(x0, r)
    return 2. * float(np.sum(frac * _cell_energy(u))) / r


def bulk_term(u, x0, r, extrapolate=True):
    """r^(1-n) int_{B_r} |x_n|^(1-2s) |grad u|^2 over the reflected ball.

    Around a singular center the cell quadrature is off by C h / r. When the grid halves evenly the
    value is extrapolated from this grid and the every-other-node grid, 2 E_h - E_2h.
    """
    fine = _cell_bulk(u, x0, r)
    coarse = u.restricted() if extrapolate else None
    if coarse is None:
        return fine
    return 2. * fine - _cell_bulk(coarse, x0, r)


def sphere_term(u, s, x0, r, panels=None):
    """-s r^(-n) int_{dB_r} |x_n|^(1-2s) u^2, the weight integrated exactly on every theta panel."""
    theta = _sphere_panels() if panels is None else panels
    p = 1. - 2. * s
    weights = r ** p * sine_power_integral(p, theta[:-1], theta[1:]) * r
    mid = 0.5 * (theta[:-1] + theta[1:])
    vals = u.interpolate(x0 + r * np.cos(mid), r * np.sin(mid))
    return -s * 2. * float(np.sum(weights * vals ** 2)) / r ** 2


def thin_term(thin, x0, r):
    """r^(1-n) int_{B'_r} 4 * thin."""
    return 4. * thin.integrate(x0 - r, x0 + r) / r


def _check_ball(grid, x0, r):
    grid.check_thin_ball(x0, r, InvalidRadiusError)


def weiss_terms(u, thin, x0, r):
    grid = u.grid
    _check_ball(grid, x0, r)
    check_thin_matches(thin, grid)
    return bulk_term(u, x0, r), sphere_term(u, grid.s, x0, r), thin_term(thin, x0, r)


def reaction_trace(u, params):
    trace = u.values[0]
    if params.reaction is None:
        return ThinField(u.grid.x1, np.zeros_like(trace))
    return ThinField(u.grid.x1, params.reaction.B_eps(params.eps, trace))


def weiss_eps(u, params, x0, r):
    check_same_grid(u, build_grid(params))
    return float(sum(weiss_terms(u, reaction_trace(u, params), x0, r)))


def weiss_limit(u, chi, x0, r):
    return float(sum(weiss_terms(u, chi, x0, r)))


def _terms_at_radius(r, u, thin, x0):
    return weiss_terms(u, thin, x0, r)


def weiss_curve(u, thin_data, x0, radii, c_mono=10., num_workers=1):
    """Psi at every radius; the audit flags Psi(r_i+1) < Psi(r_i) - c_mono * h / r_i."""
    radii = [float(r) for r in radii]
    require(len(radii) >= 1, 'weiss_curve needs at least one radius')
    require(all(b > a for a, b in zip(radii[:-1], radii[1:])), 'radii must be strictly increasing')
    grid = u.grid
    for r in radii:
        _check_ball(grid, x0, r)
    dist = min(x0 - grid.x1[0], grid.x1[-1] - x0, grid.H)
    if 2. * radii[-1] > dist + 1e-12:
        logger.warning('largest radius {} exceeds half the distance {} to the boundary'.format(radii[-1], dist))
    terms = parallel_map(_terms_at_radius, radii, num_workers, shared=(u, thin_data, x0))
    bulk, sphere, thin = (list(map(float, col)) for col in zip(*terms))
    psi = [b + sp + t for b, sp, t in zip(bulk, sphere, thin)]
    curve = WeissCurve(center=float(x0), radii=radii, psi=psi, bulk=bulk, sphere=sphere, thin=thin,
                       c_mono=float(c_mono), h=grid.h)
    for i in range(len(radii) - 1):
        if psi[i + 1] < psi[i] - c_mono * grid.h / radii[i]:
            curve.violations.append(i)
    curve.monotone = not curve.violations
    if curve.violations:
        logger.warning('monotonicity audit failed at radii {}'.format([radii[i] for i in curve.violations]))
    else:
        logger.info('weiss curve at x0={} monotone over {} radii'.format(x0, len(radii)))
    return curve


def homogeneity_defect(u, x0, r_window):
    """int over the reflected annulus of 2 |x_n|^(1-2s) ((x - x0).grad u - s u)^2 / |x - x0|^(n+1)."""
    r_a, r_b = r_window
    require(0. < r_a < r_b, 'homogeneity window must satisfy 0 < r_a < r_b, got {}'.format(r_window))
    grid = u.grid
    _check_ball(grid, x0, r_b)
    frac = grid.annulus_fraction(x0, r_a, r_b)
    xc, zc = grid.cell_centers()
    ux, uz = u.cell_gradients()
    d = (xc - x0) * ux + zc * uz - grid.s * u.cell_means()
    rho = np.hypot(xc - x0, zc)
    rho = np.where(frac > 0., rho, 1.)
    integrand = 2. * grid.cell_weight() * d ** 2 / rho ** 3
    return 2. * float(np.sum(frac * integrand))


def monotonicity_gap(u, thin, x0, rho, sigma):
    """(Psi(sigma) - Psi(rho), homogeneity defect over [rho, sigma]); continuum statement: first >= second."""
    require(sigma > rho, 'need rho < sigma')
    delta = float(sum(weiss_terms(u, thin, x0, sigma))) - float(sum(weiss_terms(u, thin, x0, rho)))
    return delta, homogeneity_defect(u, x0, (rho, sigma))


def weiss_thresholds(M):
    """(2M|B'_1|, 4M|B'_1|) for n = 2, the flat value and the upper end of the energy gap."""
    require(M > 0., 'mass must be positive')
    return 4. * M, 8. * M


def classify_weiss_value(psi0, M, rtol=0.05):
    """Place Psi(0+) against the free-boundary thresholds; 'full_mass' is the value at interior points of {chi = M}."""
    flat, full = weiss_thresholds(M)
    if psi0 < flat * (1. - rtol):
        return 'below_flat'
    if psi0 <= flat * (1. + rtol):
        return 'flat'
    if psi0 < full * (1. - rtol):
        return 'gap'
    return 'full_mass'
