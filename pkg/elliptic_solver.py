#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: elliptic_solver.py
# =====================================

import dataclasses
import functools
import logging
import os
from dataclasses import dataclass, field
from typing import Any, List, Optional

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse import linalg as spla
from scipy.spatial import cKDTree

from closed_forms import ProfileEval, alpha_star
from reaction import ReactionProfile
from utils.misc import (InvalidArgumentError, InvalidParameterError, PhaseTimer, check_finite, check_open_unit,
                        require)
from utils.monitor import SummaryMonitor
from weighted_grid import Field, ThinField, build_grid, check_same_grid, check_thin_matches

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)

ARMIJO_C1 = 1e-4
COLD_STARTS = ('harmonic', 'ladder')


class ScaledProfileBoundary(object):
    def __init__(self, s, amplitude, x0=0., orientation=1):
        self.profile = ProfileEval(s, amplitude, x0, orientation)

    def __call__(self, x1, xn):
        return self.profile(x1, xn)


class ConstantBoundary(object):
    def __init__(self, value):
        require(np.isfinite(value) and value >= 0., 'boundary value must be nonnegative, got {}'.format(value))
        self.value = float(value)

    def __call__(self, x1, xn):
        return np.full(np.broadcast(x1, xn).shape, self.value)


class TableBoundary(object):
    """Boundary values from (x1, xn, value) rows, matched to nodes within 1e-9."""

    def __init__(self, x1, xn, values):
        self.points = np.column_stack([np.asarray(x1, dtype=np.float64), np.asarray(xn, dtype=np.float64)])
        self.values = np.asarray(values, dtype=np.float64)
        self.tree = cKDTree(self.points)

    @classmethod
    def from_csv(cls, path):
        if path is None or not os.path.exists(path):
            raise InvalidParameterError('custom-csv boundary file {} does not exist'.format(path))
        df = pd.read_csv(path)
        missing = [c for c in ('x1', 'xn', 'value') if c not in df.columns]
        if missing:
            raise InvalidParameterError('{} lacks columns {}'.format(path, missing))
        return cls(df['x1'], df['xn'], df['value'])

    def __call__(self, x1, xn):
        x1, xn = np.broadcast_arrays(np.asarray(x1, dtype=np.float64), np.asarray(xn, dtype=np.float64))
        dist, idx = self.tree.query(np.column_stack([x1.ravel(), xn.ravel()]))
        if np.any(dist > 1e-9):
            raise InvalidParameterError('{} boundary nodes have no custom-csv value'.format(int(np.sum(dist > 1e-9))))
        return self.values[idx].reshape(x1.shape)


def _scaled_profile(s, mass, amplitude=None, x0=0., orientation=1, **kwargs):
    amplitude = alpha_star(s, mass) if amplitude is None else amplitude
    return ScaledProfileBoundary(s, amplitude, x0, orientation)


def _constant(s, mass, value=1., **kwargs):
    return ConstantBoundary(value)


def _custom_csv(s, mass, path=None, **kwargs):
    return TableBoundary.from_csv(path)


NAME2BOUNDARY = dict([('scaled-profile', _scaled_profile),
                      ('constant', _constant),
                      ('custom-csv', _custom_csv)])


def make_boundary(name, s, mass, **kwargs):
    if name not in NAME2BOUNDARY:
        raise InvalidParameterError('unknown boundary generator {!r}, expected one of {}'.format(
            name, sorted(NAME2BOUNDARY)))
    return NAME2BOUNDARY[name](s, mass, **kwargs)


@dataclass(frozen=True)
class ProblemParams:
    s: float
    eps: float
    reaction: Optional[ReactionProfile]
    L: float = 1.
    H: float = 1.
    nx: int = 129
    nz: int = 65
    boundary: Any = None
    residual_tol: float = 1e-10
    max_iter: int = 200
    damping_floor: float = 1e-6
    cold_start: str = 'harmonic'

    def __post_init__(self):
        check_open_unit(self.s)
        require(np.isfinite(self.eps) and self.eps > 0., 'eps must be positive, got {}'.format(self.eps))
        require(self.reaction is None or isinstance(self.reaction, ReactionProfile),
                'reaction must be a ReactionProfile or None')
        require(callable(self.boundary), 'boundary data must be callable on node coordinates')
        require(self.residual_tol > 0., 'residual_tol must be positive')
        require(int(self.max_iter) == self.max_iter and self.max_iter >= 0, 'max_iter must be a nonnegative integer')
        require(0. < self.damping_floor < 1., 'damping_floor must lie in (0, 1)')
        require(self.cold_start in COLD_STARTS,
                'cold_start must be one of {}, got {!r}'.format(COLD_STARTS, self.cold_start))

    def with_eps(self, eps):
        return dataclasses.replace(self, eps=eps)

    @property
    def mass(self):
        return 0. if self.reaction is None else self.reaction.mass


@dataclass
class SolveReport:
    iterations: int = 0
    residual_norm: float = float('inf')
    energy: float = float('nan')
    energy_history: List[float] = field(default_factory=list)
    converged: bool = False
    modified_newton_steps: int = 0
    negative_undershoot: int = 0
    min_value: float = 0.
    inactive_start: bool = False
    warm_start_ladder: List[float] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def to_dict(self):
        return dataclasses.asdict(self)


@functools.lru_cache(maxsize=8)
def stiffness_matrix(grid):
    """Weighted graph Laplacian of the grid: sum over edges of conductance * (u_a - u_b)^2 = u.K.u."""
    nz, nx = grid.shape
    cx, cz = grid.conductances()
    index = np.arange(nz * nx).reshape(nz, nx)
    heads = [index[:, :-1].ravel(), index[:-1, :].ravel()]
    tails = [index[:, 1:].ravel(), index[1:, :].ravel()]
    weights = [cx.ravel(), cz.ravel()]
    a = np.concatenate(heads)
    b = np.concatenate(tails)
    c = np.concatenate(weights)
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    data = np.concatenate([c, c, -c, -c])
    return sparse.coo_matrix((data, (rows, cols)), shape=(nz * nx, nz * nx)).tocsr()


def _bulk_energy(values, grid):
    cx, cz = grid.conductances()
    return float(np.sum(cx * np.diff(values, axis=1) ** 2) + np.sum(cz * np.diff(values, axis=0) ** 2))


def _thin_energy(trace, params, grid):
    if params.reaction is None:
        return 0.
    return float(np.sum(2. * params.reaction.B_eps(params.eps, trace) * grid.col_width))


def _thin_force(trace, params, grid):
    if params.reaction is None:
        return np.zeros_like(trace)
    return params.reaction.beta_eps(params.eps, trace) * grid.col_width


def _thin_stiffness(trace, params, widths):
    if params.reaction is None:
        return np.zeros_like(trace)
    return params.reaction.beta_eps_prime(params.eps, trace) * widths


def discrete_energy(u, params):
    """Half-domain J_eps: weighted Dirichlet sum over edges plus 2 B_eps(u) on the bottom row."""
    grid = build_grid(params)
    check_same_grid(u, grid)
    return _bulk_energy(u.values, grid) + _thin_energy(u.values[0], params, grid)


def _residual_vector(values, params, grid):
    r = stiffness_matrix(grid) @ values.ravel()
    r[:grid.nx] += _thin_force(values[0], params, grid)
    return r


def assemble_residual(u, params):
    """Weak-form residual K u + beta_eps(u) dx' on free nodes (half the energy gradient), zero on Dirichlet nodes."""
    grid = build_grid(params)
    check_same_grid(u, grid)
    r = _residual_vector(u.values, params, grid).reshape(grid.shape)
    r[grid.boundary_mask()] = 0.
    return Field(grid, r)


def energy_gradient(u, params):
    r = assemble_residual(u, params)
    return Field(r.grid, 2. * r.values)


def neumann_flux(u, params):
    """(K u)_i / dx'_i on the bottom row, the discrete -lim x_n^(1-2s) d_n u."""
    grid = build_grid(params)
    check_same_grid(u, grid)
    ku = (stiffness_matrix(grid) @ u.values.ravel())[:grid.nx]
    return ThinField(grid.x1, ku / grid.col_width)


def _abs_weight(s, a, b):
    """Integral of |z|^(1-2s) over [a, b], a < b, allowing a < 0 < b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    p = 2. - 2. * s
    fa = np.sign(a) * np.abs(a) ** p / p
    fb = np.sign(b) * np.abs(b) ** p / p
    return fb - fa


def reflected_energy(u, params):
    """J_eps of the even reflection: half the full-strip weighted Dirichlet sum plus the thin term."""
    grid = build_grid(params)
    check_same_grid(u, grid)
    s, hx, hz = grid.s, grid.hx, grid.hz
    v = np.concatenate([u.values[:0:-1], u.values], axis=0)
    z = np.concatenate([-grid.xn[:0:-1], grid.xn])
    lo = np.maximum(z - 0.5 * hz, -grid.H)
    hi = np.minimum(z + 0.5 * hz, grid.H)
    cx = (_abs_weight(s, lo, hi) / hx)[:, None]
    cz = (_abs_weight(s, z[:-1], z[1:]) / hz ** 2)[:, None] * grid.col_width[None, :]
    bulk = np.sum(cx * np.diff(v, axis=1) ** 2) + np.sum(cz * np.diff(v, axis=0) ** 2)
    return float(0.5 * bulk) + _thin_energy(u.values[0], params, grid)


def boundary_values(params, grid=None):
    grid = build_grid(params) if grid is None else grid
    X1, XN = grid.mesh()
    mask = grid.boundary_mask()
    g = np.zeros(grid.shape)
    g[mask] = np.asarray(params.boundary(X1[mask], XN[mask]), dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise InvalidParameterError('boundary data must be finite')
    if np.any(g[mask] < 0.):
        raise InvalidParameterError('boundary data must be nonnegative, min {}'.format(np.min(g[mask])))
    return g


class NewtonSolver(object):
    """Damped Newton on the weak-form residual with Armijo backtracking on discrete_energy.

    The Jacobian is K + diag(beta_eps' dx') on free nodes. When that direction is not a
    descent direction for the energy the negative part of beta_eps' is dropped, which
    leaves an SPD matrix.
    """

    def __init__(self, params, monitor=None):
        self.params = params
        self.grid = build_grid(params)
        self.monitor = monitor if monitor is not None else SummaryMonitor(None)
        self.K = stiffness_matrix(self.grid)
        mask = self.grid.boundary_mask().ravel()
        self.free = np.flatnonzero(~mask)
        self.fixed = np.flatnonzero(mask)
        self.K_ff = self.K[self.free][:, self.free].tocsc()
        self.K_fd = self.K[self.free][:, self.fixed].tocsc()
        # free-vector positions of the bottom-row unknowns (interior bottom nodes come first)
        self.thin_pos = np.arange(self.grid.nx - 2)
        self.linear_solve_timer = PhaseTimer('linear_solve')
        self.line_search_timer = PhaseTimer('line_search')

    def energy(self, flat):
        values = flat.reshape(self.grid.shape)
        return _bulk_energy(values, self.grid) + _thin_energy(values[0], self.params, self.grid)

    def residual(self, flat):
        return _residual_vector(flat.reshape(self.grid.shape), self.params, self.grid)[self.free]

    def harmonic_extension(self, g):
        with self.linear_solve_timer:
            u_f = spla.spsolve(self.K_ff, -(self.K_fd @ g.ravel()[self.fixed]))
        check_finite([u_f], 'harmonic extension')
        flat = g.ravel().copy()
        flat[self.free] = u_f
        return flat

    def inactive(self, flat):
        """True when beta_eps vanishes on every free thin node, so the start is a reaction-free critical point."""
        if self.params.reaction is None:
            return False
        trace = flat[1:self.grid.nx - 1]
        return not np.any(self.params.reaction.beta_eps(self.params.eps, trace))

    def _direction(self, flat, rf, modified):
        trace = flat[1:self.grid.nx - 1]
        shift = _thin_stiffness(trace, self.params, self.grid.col_width[1:-1])
        if modified:
            shift = np.maximum(shift, 0.)
        diag = np.zeros(len(self.free))
        diag[self.thin_pos] = shift
        jac = (self.K_ff + sparse.diags(diag, format='csc')).tocsc()
        with self.linear_solve_timer:
            d = spla.spsolve(jac, -rf)
        return np.asarray(d)

    def _line_search(self, flat, d, e0, slope):
        t = 1.
        with self.line_search_timer:
            while t >= self.params.damping_floor:
                trial = flat.copy()
                trial[self.free] += t * d
                e_t = self.energy(trial)
                if np.isfinite(e_t) and e_t <= e0 + ARMIJO_C1 * t * slope:
                    return trial, e_t, t
                t *= 0.5
        return None, None, None

    def run(self, initial=None):
        params, grid = self.params, self.grid
        g = boundary_values(params, grid)
        report = SolveReport()
        if initial is None:
            flat = self.harmonic_extension(g)
        else:
            check_same_grid(initial, grid)
            flat = initial.values.ravel().copy()
            flat[self.fixed] = g.ravel()[self.fixed]
        report.inactive_start = self.inactive(flat)
        if report.inactive_start:
            log = logger.warning if initial is None else logger.info
            log('reaction inactive on the start trace at eps={}; the start solves the reaction-free problem'.format(
                params.eps))
        e = self.energy(flat)
        report.energy_history.append(e)
        round_tol = 1e-13 * (abs(e) + 1.)

        for it in range(params.max_iter + 1):
            rf = self.residual(flat)
            check_finite([rf], 'residual', report)
            report.residual_norm = float(np.max(np.abs(rf))) if len(rf) else 0.
            self.monitor.write(dict(residual=report.residual_norm, energy=e), report.iterations)
            if report.residual_norm <= params.residual_tol:
                report.converged = True
                break
            if it == params.max_iter:
                break

            accepted = None
            for modified in (False, True):
                d = self._direction(flat, rf, modified)
                check_finite([d], 'newton direction', report)
                slope = 2. * float(rf @ d)
                if slope >= 0.:
                    continue
                trial, e_t, t = self._line_search(flat, d, e, slope)
                if trial is not None:
                    accepted = (trial, e_t, t, modified)
                    break
            if accepted is None:
                # roundoff regime: the energy no longer resolves the remaining residual
                trial = flat.copy()
                trial[self.free] += self._direction(flat, rf, False)
                e_t = self.energy(trial)
                if not (np.isfinite(e_t) and e_t <= e + round_tol):
                    logger.info('line search stagnated at residual {:.3e}'.format(report.residual_norm))
                    break
                logger.debug('roundoff step accepted: energy change {:.3e} within {:.3e}'.format(e_t - e, round_tol))
                accepted = (trial, e_t, 1., False)
            flat, e, t, modified = accepted
            report.iterations += 1
            report.modified_newton_steps += int(modified)
            report.energy_history.append(e)
            logger.debug('newton iter {}: residual {:.3e}, energy {:.12g}, step {}'.format(
                report.iterations, report.residual_norm, e, t))

        report.energy = e
        u = flat.reshape(grid.shape)
        threshold = -1e-12 * max(float(np.max(np.abs(g))), 1e-300)
        report.min_value = float(np.min(u))
        report.negative_undershoot = int(np.sum(u < threshold))
        if report.negative_undershoot:
            logger.warning('{} nodes undershoot below zero, min {:.3e}'.format(report.negative_undershoot,
                                                                              report.min_value))
        report.stats = dict(self.linear_solve_timer.stats(), **self.line_search_timer.stats())
        if report.converged:
            logger.info('solve converged in {} iterations: residual {:.3e}, energy {:.12g}'.format(
                report.iterations, report.residual_norm, report.energy))
        else:
            logger.warning('solve did not converge after {} iterations: residual {:.3e}'.format(
                report.iterations, report.residual_norm))
        return Field(grid, u), report


def warm_start_ladder(eps, trace_max):
    """eps * 2^k for k = K, ..., 1 with K the smallest exponent putting eps * 2^K above trace_max."""
    require(np.isfinite(trace_max), 'trace_max must be finite')
    k = 1
    while eps * 2. ** k <= trace_max:
        k += 1
    return [eps * 2. ** j for j in range(k, 0, -1)]


def _ladder_solve(params, monitor):
    """Continue from an eps above the whole harmonic trace, where the reaction acts on every thin node."""
    solver = NewtonSolver(params, monitor)
    start = solver.harmonic_extension(boundary_values(params, solver.grid))
    trace_max = float(np.max(start[1:solver.grid.nx - 1]))
    if params.reaction is None or trace_max < params.eps:
        return solver.run(None)
    ladder = warm_start_ladder(params.eps, trace_max)
    logger.info('harmonic trace reaches {:.4g} above eps={}; warm start down {}'.format(trace_max, params.eps, ladder))
    u = None
    for k, eps in enumerate(ladder):
        rung_monitor = None if monitor is None else monitor.child('rung_{}'.format(k))
        u, report = NewtonSolver(params.with_eps(eps), rung_monitor).run(u)
        if not report.converged:
            logger.warning('warm start rung eps={} did not converge'.format(eps))
            report.warm_start_ladder = ladder
            return u, report
    u, report = solver.run(u)
    report.warm_start_ladder = ladder
    return u, report


def solve(params, initial=None, monitor=None):
    """Solve the eps-problem; cold starts follow params.cold_start ('harmonic' or a halving eps 'ladder')."""
    if initial is None and params.cold_start == 'ladder':
        return _ladder_solve(params, monitor)
    return NewtonSolver(params, monitor).run(initial)


def harmonic_extension(params):
    solver = NewtonSolver(params)
    flat = solver.harmonic_extension(boundary_values(params, solver.grid))
    return Field(solver.grid, flat.reshape(solver.grid.shape))


def domain_variation_residual(u, chi, psi, tol=1e-12):
    """First domain variation of the limit functional along psi = (psi_1, psi_n).

    Bulk: int |x_n|^(1-2s) (1/2 |grad u|^2 div psi - grad u . D psi grad u) + 1/2 |grad u|^2 grad w . psi,
    integrated cellwise and doubled for the reflected half; thin: int 2 chi d_1 psi_1 on x_n = 0.
    """
    grid = u.grid
    psi1, psin = (p.values if isinstance(p, Field) else np.asarray(p, dtype=np.float64) for p in psi)
    if psi1.shape != grid.shape or psin.shape != grid.shape:
        raise InvalidArgumentError('psi components must live on {}'.format(grid))
    check_thin_matches(chi, grid)
    scale = max(1., float(np.max(np.abs(psi1))), float(np.max(np.abs(psin))))
    if np.any(np.abs(psin[0]) > tol * scale):
        raise InvalidArgumentError('psi must be tangential on the thin row (psi_n = 0 at x_n = 0)')
    mask = grid.boundary_mask()
    if np.any(np.abs(psi1[mask]) > tol * scale) or np.any(np.abs(psin[mask]) > tol * scale):
        raise InvalidArgumentError('psi must vanish on the outer boundary')

    f1, fn = Field(grid, psi1), Field(grid, psin)
    ux, uz = u.cell_gradients()
    p1x, p1z = f1.cell_gradients()
    pnx, pnz = fn.cell_gradients()
    cell_w = grid.cell_weight()
    # exact cell integral of div(w psi) by the divergence theorem
    seg = grid.segment_weight[:, None]
    w_row = np.where(grid.xn > 0., grid.xn, 1.) ** (1. - 2. * grid.s)
    w_row[0] = 0.
    psin_row = 0.5 * (psin[:, :-1] + psin[:, 1:])
    div_wpsi = (0.5 * (psi1[:-1, 1:] + psi1[1:, 1:]) - 0.5 * (psi1[:-1, :-1] + psi1[1:, :-1])) * seg \
        + grid.hx * (w_row[1:, None] * psin_row[1:] - w_row[:-1, None] * psin_row[:-1])
    grad2 = ux ** 2 + uz ** 2
    quad_form = ux * (ux * p1x + uz * p1z) + uz * (ux * pnx + uz * pnz)
    bulk = 2. * float(np.sum(0.5 * grad2 * div_wpsi - cell_w * quad_form))
    chi_mid = 0.5 * (chi.values[1:] + chi.values[:-1])
    thin = float(np.sum(2. * chi_mid * np.diff(psi1[0])))
    return bulk + thin
