#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: limit_analysis.py
# =====================================

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from closed_forms import profile_P
from elliptic_solver import solve
from utils.misc import InvalidParameterError, NonConvergenceError, SolverBreakdownError, require
from utils.monitor import SummaryMonitor
from utils.task_pool import parallel_map
from weighted_grid import ThinField, build_grid, check_same_grid

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


@dataclass
class ContinuationReport:
    eps_ladder: List[float]
    cauchy: List[Optional[float]] = field(default_factory=list)
    holder: List[float] = field(default_factory=list)
    reaction_mass: List[float] = field(default_factory=list)
    defect: List[float] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    non_cauchy_steps: List[int] = field(default_factory=list)
    defect_violations: List[int] = field(default_factory=list)

    @property
    def holder_ratio(self):
        """max / min of the positive Holder seminorms along the ladder; None when there are none."""
        positive = [h for h in self.holder if h > 0.]
        return max(positive) / min(positive) if positive else None

    def to_dict(self):
        out = dataclasses.asdict(self)
        out['holder_ratio'] = self.holder_ratio
        return out

    def rows(self):
        return [dict(eps=e, cauchy=c, holder=h, reaction_mass=m, defect=d, iterations=it)
                for e, c, h, m, d, it in zip(self.eps_ladder, self.cauchy, self.holder, self.reaction_mass,
                                             self.defect, self.iterations)]


@dataclass
class BlowupFit:
    center: float
    lambdas: List[float]
    alpha: List[float]
    residual: List[float]
    orientation: int
    annulus: tuple = (0.25, 0.75)
    effective_eps: List[Optional[float]] = field(default_factory=list)
    dropped_lambdas: List[float] = field(default_factory=list)
    residual_floor: float = 0.

    @property
    def headline_alpha(self):
        return self.alpha[-1]

    @property
    def residual_decreasing(self):
        """No residual grows past max(previous, residual_floor) as lambda shrinks."""
        return all(r1 <= max(r0, self.residual_floor) for r0, r1 in zip(self.residual[:-1], self.residual[1:]))

    def to_dict(self):
        out = dataclasses.asdict(self)
        out['headline_alpha'] = self.headline_alpha
        out['residual_decreasing'] = self.residual_decreasing
        return out

    def rows(self):
        return [dict(lam=l, alpha=a, residual=r) for l, a, r in zip(self.lambdas, self.alpha, self.residual)]


def rescaled_eps(eps, lam, s):
    """u(x0 + lam x) / lam^s solves the same problem with eps / lam^s."""
    require(lam > 0., 'lambda must be positive')
    return eps / lam ** s


def thin_reaction_mass(u, params):
    if params.reaction is None:
        return 0.
    trace = u.trace()
    return trace.integrate(trace.x1[0], trace.x1[-1], params.reaction.beta_eps(params.eps, trace.values))


def compact_mask(grid, compact):
    x_lo, x_hi, z_lo, z_hi = compact
    X1, XN = grid.mesh()
    return (X1 >= x_lo) & (X1 <= x_hi) & (XN >= z_lo) & (XN <= z_hi)


def chi_extract(u, params, delta=None):
    """(B_eps(u(., 0)), share of the trace where delta < B_eps < M - delta); delta defaults to M/10."""
    grid = build_grid(params)
    check_same_grid(u, grid)
    require(params.reaction is not None, 'chi_extract needs a reaction profile')
    M = params.reaction.mass
    delta = 0.1 * M if delta is None else delta
    require(0. < delta < 0.5 * M, 'delta must lie in (0, M/2), got {}'.format(delta))
    chi = params.reaction.B_eps(params.eps, u.values[0])
    mid = (chi > delta) & (chi < M - delta)
    defect = float(np.sum(grid.col_width[mid]) / (2. * grid.L))
    return ThinField(grid.x1, chi), defect


def free_boundary(trace, level=0., slack=1e-12):
    """Boundary points of {trace > level} by linear interpolation between adjacent nodes."""
    require(level >= 0., 'level must be nonnegative')
    v = trace.values
    x = trace.x1
    pos = v > level + slack
    points = []
    for i in np.flatnonzero(pos[1:] != pos[:-1]):
        v0, v1 = v[i], v[i + 1]
        t = (level - v0) / (v1 - v0) if v1 != v0 else 0.5
        points.append(float(x[i] + np.clip(t, 0., 1.) * (x[i + 1] - x[i])))
    return points


def holder_seminorm(u, region, exponent, max_pairs=200000, seed=0):
    """max |u(x) - u(y)| / |x - y|^exponent over node pairs inside region = (x_lo, x_hi, z_lo, z_hi).

    All pairs when their count is below max_pairs, else a seeded sample stratified by distance decade.
    """
    require(0. < exponent < 1., 'exponent must lie in (0, 1)')
    grid = u.grid
    mask = compact_mask(grid, region)
    X1, XN = grid.mesh()
    pts = np.column_stack([X1[mask], XN[mask]])
    vals = u.values[mask]
    n = len(vals)
    if n < 2:
        return 0.
    if n * (n - 1) // 2 <= max_pairs:
        best = 0.
        for start in range(n - 1):
            d = np.hypot(*(pts[start + 1:] - pts[start]).T)
            best = max(best, float(np.max(np.abs(vals[start + 1:] - vals[start]) / d ** exponent)))
        return best
    rng = np.random.default_rng(seed)
    diam = float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))
    h = grid.h
    decades = max(1, int(np.ceil(np.log10(diam / h))))
    per_decade = max_pairs // decades
    best = 0.
    for k in range(decades):
        lo, hi = h * 10. ** k, h * 10. ** (k + 1)
        i = rng.integers(0, n, size=4 * per_decade)
        j = rng.integers(0, n, size=4 * per_decade)
        d = np.hypot(*(pts[i] - pts[j]).T)
        keep = np.flatnonzero((d >= lo * (1. - 1e-12)) & (d < hi) & (d > 0.))[:per_decade]
        if len(keep):
            best = max(best, float(np.max(np.abs(vals[i[keep]] - vals[j[keep]]) / d[keep] ** exponent)))
    return best


def nondegeneracy(trace, x0, radii, s):
    """r^-s times the average of the trace over B'_r(x0), for every radius."""
    out = []
    for r in radii:
        require(r > 0. and x0 - r >= trace.x1[0] - 1e-12 and x0 + r <= trace.x1[-1] + 1e-12,
                'radius {} leaves the trace interval'.format(r))
        out.append(trace.integrate(x0 - r, x0 + r) / (2. * r) / r ** s)
    return out


def select_orientation(trace, x0, reach):
    """+1 when the trace carries more mass right of x0, else -1."""
    right = trace.integrate(x0, min(x0 + reach, trace.x1[-1]))
    left = trace.integrate(max(x0 - reach, trace.x1[0]), x0)
    return 1 if right >= left else -1


def _annulus_samples(annulus, n_radial=24, n_angular=96):
    a, b = annulus
    rho = a + (b - a) * (np.arange(n_radial) + 0.5) / n_radial
    theta = np.pi * (np.arange(n_angular) + 0.5) / n_angular
    R, T = np.meshgrid(rho, theta)
    # polar area element
    w = R * ((b - a) / n_radial) * (np.pi / n_angular)
    return R.ravel() * np.cos(T.ravel()), R.ravel() * np.sin(T.ravel()), w.ravel()


def _fit_at_lambda(lam, u, x0, s, orientation, annulus):
    y1, yn, w = _annulus_samples(annulus)
    target = u.interpolate(x0 + lam * y1, lam * yn) / lam ** s
    basis = profile_P(orientation * y1, yn, s)
    alpha = float(np.sum(w * target * basis) / np.sum(w * basis * basis))
    norm = float(np.sqrt(np.sum(w * target ** 2)))
    res = float(np.sqrt(np.sum(w * (target - alpha * basis) ** 2)))
    return alpha, (res / norm if norm > 0. else 0.)


def blowup_fit(u, x0, lambdas, orientation=None, annulus=(0.25, 0.75), s=None, eps=None, num_workers=1,
               min_cells=4., residual_floor=1e-3):
    """Least-squares fit of u_lam(y) = u(x0 + lam y)/lam^s against P(+-y1, y_n) on a half annulus per lambda.

    On a grid, lambdas whose inner annulus radius lam * a spans fewer than min_cells cells are dropped.
    """
    lambdas = [float(l) for l in lambdas]
    require(len(lambdas) >= 1, 'blowup_fit needs at least one lambda')
    require(all(b < a for a, b in zip(lambdas[:-1], lambdas[1:])), 'lambdas must be strictly decreasing')
    a, b = annulus
    require(0. < a < b, 'annulus must satisfy 0 < a < b')
    require(min_cells >= 0., 'min_cells must be nonnegative')
    grid = u.grid
    if s is None:
        require(grid is not None, 's is required when the field carries no grid')
        s = grid.s
    dropped = []
    if grid is not None:
        dropped = [l for l in lambdas if l * a < min_cells * grid.h]
        lambdas = [l for l in lambdas if l * a >= min_cells * grid.h]
        if dropped:
            logger.info('blowup lambdas {} resolve the annulus with fewer than {} cells'.format(dropped, min_cells))
        require(len(lambdas) >= 1, 'every lambda leaves fewer than {} cells across the inner annulus radius'.format(
            min_cells))
        reach = lambdas[0] * b
        if x0 - reach < grid.x1[0] - 1e-12 or x0 + reach > grid.x1[-1] + 1e-12 or reach > grid.H + 1e-12:
            raise InvalidParameterError('blowup annulus of radius {} around {} leaves the domain'.format(reach, x0))
        if orientation is None:
            orientation = select_orientation(u.trace(), x0, reach)
    orientation = 1 if orientation is None else orientation
    require(orientation in (1, -1), 'orientation must be +1 or -1')
    fits = parallel_map(_fit_at_lambda, lambdas, num_workers, shared=(u, x0, s, orientation, annulus))
    out = BlowupFit(center=float(x0), lambdas=lambdas, alpha=[f[0] for f in fits], residual=[f[1] for f in fits],
                    orientation=orientation, annulus=tuple(annulus),
                    effective_eps=[None if eps is None else rescaled_eps(eps, l, s) for l in lambdas],
                    dropped_lambdas=dropped, residual_floor=float(residual_floor))
    logger.info('blowup fit at x0={}: alpha {} (residual {:.3e})'.format(x0, out.headline_alpha, out.residual[-1]))
    if not out.residual_decreasing:
        logger.warning('blowup residuals grow as lambda decreases: {}'.format(out.residual))
    return out


def continuation(base, eps_ladder, compact=(-0.5, 0.5, 0., 0.5), delta=None, holder_max_pairs=200000, seed=0,
                 monitor=None):
    """Warm-started solves along a decreasing eps ladder with per-step limit diagnostics."""
    eps_ladder = [float(e) for e in eps_ladder]
    require(len(eps_ladder) >= 1, 'empty eps ladder')
    require(all(e > 0. for e in eps_ladder), 'eps values must be positive')
    require(all(b < a for a, b in zip(eps_ladder[:-1], eps_ladder[1:])), 'eps ladder must be strictly decreasing')
    monitor = monitor if monitor is not None else SummaryMonitor(None)
    report = ContinuationReport(eps_ladder=eps_ladder)
    grid = build_grid(base)
    mask = compact_mask(grid, compact)
    fields = []
    previous = None
    for step, eps in enumerate(eps_ladder):
        params = base.with_eps(eps)
        try:
            u, solve_report = solve(params, initial=previous, monitor=monitor.child('eps_{}'.format(step)))
        except SolverBreakdownError as e:
            logger.error('continuation step {} (eps={}) broke down'.format(step, eps))
            raise NonConvergenceError(str(e), e.report, step)
        if not solve_report.converged:
            raise NonConvergenceError('solve at eps={} did not converge'.format(eps), solve_report, step)
        cauchy = None if previous is None else float(np.max(np.abs(u.values[mask] - previous.values[mask])))
        report.cauchy.append(cauchy)
        report.holder.append(holder_seminorm(u, compact, base.s, holder_max_pairs, seed))
        report.reaction_mass.append(thin_reaction_mass(u, params))
        report.defect.append(chi_extract(u, params, delta)[1] if params.reaction is not None else 0.)
        report.iterations.append(solve_report.iterations)
        if step >= 2 and cauchy is not None and report.cauchy[-2] is not None and cauchy > report.cauchy[-2]:
            report.non_cauchy_steps.append(step)
            logger.warning('continuation step {} is not Cauchy: {:.3e} > {:.3e}'.format(step, cauchy,
                                                                                    report.cauchy[-2]))
        if step >= 1 and report.defect[-1] > report.defect[-2]:
            report.defect_violations.append(step)
            logger.warning('two-valuedness defect grew at eps={}: {:.3e} > {:.3e}'.format(
                eps, report.defect[-1], report.defect[-2]))
        monitor.write(dict(cauchy=cauchy, holder=report.holder[-1], reaction_mass=report.reaction_mass[-1],
                           defect=report.defect[-1]), step)
        logger.info('continuation step {} eps={}: cauchy {}, holder {:.4g}, mass {:.4g}, defect {:.4g}'.format(
            step, eps, cauchy, report.holder[-1], report.reaction_mass[-1], report.defect[-1]))
        fields.append(u)
        previous = u
    return fields, report
