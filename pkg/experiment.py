#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: experiment.py
# =====================================

import dataclasses
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, List, Optional

import numpy as np
import pandas as pd
import yaml

from closed_forms import (alpha_flux, alpha_star, c0_flux, c0_flux_quadrature, c0_gamma, c0_quadrature,
                          fractional_flux_check)
from elliptic_solver import COLD_STARTS, NAME2BOUNDARY, ProblemParams, make_boundary, neumann_flux, solve
from energy_weiss import classify_weiss_value, reaction_trace, weiss_curve
from limit_analysis import (blowup_fit, chi_extract, continuation, free_boundary, nondegeneracy,
                            select_orientation)
from reaction import NAME2PROFILE, make_profile
from utils.misc import ConfigValidationError, InvalidParameterError, NonConvergenceError
from utils.monitor import SummaryMonitor
from utils.task_pool import parallel_map
from weighted_grid import (build_grid, check_same_grid, load_field_raw, load_thin_csv, save_field_csv,
                           save_field_raw, save_thin_csv)

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)

FLOAT_FORMAT = '%.17g'
AUTO = 'auto'
AMPLITUDE_NAMES = (None, 'alpha_star', 'alpha_flux')
PATH_KEYS = ('boundary_csv', 'field', 'chi_field', 'summary_dir')


def _coerce(key, value):
    """YAML 1.1 reads 1e-10 as a string; numeric-looking strings become floats."""
    if key in PATH_KEYS or not isinstance(value, str):
        return value
    try:
        return float(value)
    except ValueError:
        return value


@dataclass(frozen=True)
class ExperimentConfig:
    # problem
    s: float = 0.5
    eps: float = 0.05
    mass: float = 1.
    reaction: str = 'poly6'
    L: float = 1.
    H: float = 1.
    nx: int = 129
    nz: int = 65
    boundary: str = 'scaled-profile'
    boundary_amplitude: Optional[float] = None
    boundary_value: float = 1.
    boundary_csv: Optional[str] = None
    residual_tol: float = 1e-10
    max_iter: int = 200
    damping_floor: float = 1e-6
    cold_start: str = 'ladder'
    # ladders and windows
    eps_ladder: List[float] = dataclasses.field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    compact: List[float] = dataclasses.field(default_factory=lambda: [-0.5, 0.5, 0., 0.5])
    radii: List[float] = dataclasses.field(default_factory=lambda: [float(r) for r in np.linspace(0.05, 0.3, 12)])
    center: Any = AUTO
    lambdas: List[float] = dataclasses.field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    annulus: List[float] = dataclasses.field(default_factory=lambda: [0.25, 0.75])
    orientation: Any = AUTO
    chi_delta: Optional[float] = None
    blowup_min_cells: float = 4.
    blowup_residual_floor: float = 1e-3
    c_mono: float = 10.
    holder_max_pairs: int = 200000
    seed: int = 0
    # closed forms
    s_values: List[float] = dataclasses.field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    k_values: List[int] = dataclasses.field(default_factory=lambda: [1, 2, 4])
    symbol_nodes: int = 1000
    # inputs and outputs
    field: Optional[str] = None
    chi_field: Optional[str] = None
    level: Any = AUTO
    num_workers: int = 1
    summary_dir: Optional[str] = None
    acceptance_reference: str = 'alpha_star'
    acceptance_band: float = 0.15

    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_sources(cls, path=None, overrides=None):
        """defaults, then the YAML file, then flag overrides (None values are skipped)."""
        values = {}
        diagnostics = []
        if path is not None:
            if not os.path.exists(path):
                raise ConfigValidationError(['config: file {} does not exist'.format(path)])
            with open(path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f)
            if loaded is None:
                loaded = {}
            if not isinstance(loaded, dict):
                raise ConfigValidationError(['config: {} is not a key/value mapping'.format(path)])
            values.update(loaded)
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        unknown = sorted(set(values) - set(cls.keys()))
        diagnostics.extend('{}: unknown key'.format(k) for k in unknown)
        if diagnostics:
            raise ConfigValidationError(diagnostics)
        return cls(**{k: _coerce(k, v) for k, v in values.items()})

    def to_dict(self):
        return dataclasses.asdict(self)

    def validate(self):
        d = []

        def check(cond, key, message):
            try:
                ok = bool(cond())
            except (TypeError, ValueError):
                ok = False
            if not ok:
                d.append('{}: {} (got {!r})'.format(key, message, getattr(self, key)))

        def number(v):
            return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)

        def integer(v):
            return number(v) and int(v) == v

        def numbers(v):
            return isinstance(v, (list, tuple)) and all(number(x) for x in v)

        def decreasing(v):
            return all(b < a for a, b in zip(v[:-1], v[1:]))

        check(lambda: number(self.s) and 0. < self.s < 1., 's', 'must lie in (0, 1)')
        check(lambda: number(self.eps) and self.eps > 0., 'eps', 'must be positive')
        check(lambda: number(self.mass) and self.mass > 0., 'mass', 'must be positive')
        check(lambda: self.reaction == 'none' or self.reaction in NAME2PROFILE, 'reaction',
              'must be one of {} or none'.format(sorted(NAME2PROFILE)))
        check(lambda: number(self.L) and self.L > 0., 'L', 'must be positive')
        check(lambda: number(self.H) and self.H > 0., 'H', 'must be positive')
        check(lambda: integer(self.nx) and self.nx >= 3, 'nx', 'must be an integer >= 3')
        check(lambda: integer(self.nz) and self.nz >= 3, 'nz', 'must be an integer >= 3')
        check(lambda: self.boundary in NAME2BOUNDARY, 'boundary', 'must be one of {}'.format(sorted(NAME2BOUNDARY)))
        check(lambda: self.boundary_amplitude in AMPLITUDE_NAMES or (number(self.boundary_amplitude)
                                                                           and self.boundary_amplitude >= 0.),
              'boundary_amplitude', 'must be nonnegative, alpha_star or alpha_flux')
        check(lambda: number(self.boundary_value) and self.boundary_value >= 0., 'boundary_value',
              'must be nonnegative')
        check(lambda: self.boundary != 'custom-csv' or (self.boundary_csv is not None
                                                        and os.path.exists(self.boundary_csv)),
              'boundary_csv', 'custom-csv boundary needs an existing file')
        check(lambda: number(self.residual_tol) and self.residual_tol > 0., 'residual_tol', 'must be positive')
        check(lambda: integer(self.max_iter) and self.max_iter >= 0, 'max_iter', 'must be a nonnegative integer')
        check(lambda: number(self.damping_floor) and 0. < self.damping_floor < 1., 'damping_floor',
              'must lie in (0, 1)')
        check(lambda: self.cold_start in COLD_STARTS, 'cold_start', 'must be one of {}'.format(list(COLD_STARTS)))
        check(lambda: numbers(self.eps_ladder) and len(self.eps_ladder) >= 1 and min(self.eps_ladder) > 0.
              and decreasing(self.eps_ladder), 'eps_ladder', 'must be a nonempty strictly decreasing positive list')
        check(lambda: numbers(self.compact) and len(self.compact) == 4 and self.compact[0] < self.compact[1]
              and 0. <= self.compact[2] < self.compact[3], 'compact', 'must be [x_lo, x_hi, z_lo, z_hi], 0 <= z_lo')
        check(lambda: numbers(self.radii) and len(self.radii) >= 1 and min(self.radii) > 0.
              and decreasing(self.radii[::-1]), 'radii', 'must be a nonempty strictly increasing positive list')
        check(lambda: self.center == AUTO or (number(self.center) and abs(self.center) < self.L), 'center',
              'must be auto or lie in (-L, L)')
        check(lambda: numbers(self.lambdas) and len(self.lambdas) >= 1 and min(self.lambdas) > 0.
              and decreasing(self.lambdas), 'lambdas', 'must be a nonempty strictly decreasing positive list')
        check(lambda: numbers(self.annulus) and len(self.annulus) == 2 and 0. < self.annulus[0] < self.annulus[1],
              'annulus', 'must be [a, b] with 0 < a < b')
        check(lambda: self.orientation == AUTO or self.orientation in (1, -1), 'orientation', 'must be auto, 1 or -1')
        check(lambda: self.chi_delta is None or (number(self.chi_delta) and 0. < self.chi_delta < 0.5 * self.mass),
              'chi_delta', 'must lie in (0, mass/2)')
        check(lambda: number(self.blowup_min_cells) and self.blowup_min_cells >= 0., 'blowup_min_cells',
              'must be nonnegative')
        check(lambda: number(self.blowup_residual_floor) and self.blowup_residual_floor >= 0.,
              'blowup_residual_floor', 'must be nonnegative')
        check(lambda: number(self.c_mono) and self.c_mono >= 0., 'c_mono', 'must be nonnegative')
        check(lambda: integer(self.holder_max_pairs) and self.holder_max_pairs > 0, 'holder_max_pairs',
              'must be a positive integer')
        check(lambda: integer(self.seed) and self.seed >= 0, 'seed', 'must be a nonnegative integer')
        check(lambda: numbers(self.s_values) and len(self.s_values) >= 1
              and all(0. < x < 1. for x in self.s_values), 's_values', 'must be a nonempty list in (0, 1)')
        check(lambda: isinstance(self.k_values, (list, tuple)) and len(self.k_values) >= 1
              and all(integer(k) and k >= 0 for k in self.k_values), 'k_values',
              'must be a nonempty list of nonnegative integers')
        check(lambda: integer(self.symbol_nodes) and self.symbol_nodes >= 8, 'symbol_nodes',
              'must be an integer >= 8')
        check(lambda: self.field is None or os.path.exists(self.field), 'field', 'file does not exist')
        check(lambda: self.chi_field is None or os.path.exists(self.chi_field), 'chi_field', 'file does not exist')
        check(lambda: self.level == AUTO or (number(self.level) and self.level >= 0.), 'level',
              'must be auto or nonnegative')
        check(lambda: integer(self.num_workers) and self.num_workers >= 1, 'num_workers',
              'must be a positive integer')
        check(lambda: self.acceptance_reference in ('alpha_star', 'alpha_flux'), 'acceptance_reference',
              'must be alpha_star or alpha_flux')
        check(lambda: number(self.acceptance_band) and self.acceptance_band > 0., 'acceptance_band',
              'must be positive')
        if d:
            for line in d:
                logger.error('config validation: {}'.format(line))
            raise ConfigValidationError(d)
        return self

    def problem_params(self, eps=None):
        reaction = None if self.reaction == 'none' else make_profile(self.reaction, self.mass)
        amplitude = self.boundary_amplitude
        if amplitude == 'alpha_star':
            amplitude = None
        elif amplitude == 'alpha_flux':
            amplitude = alpha_flux(self.s, self.mass)
        boundary = make_boundary(self.boundary, self.s, self.mass, amplitude=amplitude,
                                 value=self.boundary_value, path=self.boundary_csv)
        return ProblemParams(s=self.s, eps=self.eps if eps is None else eps, reaction=reaction, L=self.L, H=self.H,
                             nx=int(self.nx), nz=int(self.nz), boundary=boundary, residual_tol=self.residual_tol,
                             max_iter=int(self.max_iter), damping_floor=self.damping_floor,
                             cold_start=self.cold_start)

    @property
    def free_boundary_level(self):
        return self.eps if self.level == AUTO else float(self.level)


def _constants_row(s):
    return dict(s=s, c0_gamma=c0_gamma(s), c0_quadrature=c0_quadrature(s), alpha_star=alpha_star(s, 1.),
                c0_flux=c0_flux(s), c0_flux_quadrature=c0_flux_quadrature(s), alpha_flux=alpha_flux(s, 1.))


def _symbol_row(k, s, nodes):
    return dict(s=s, k=k, rho=fractional_flux_check(k, s, nodes=nodes))


class Runner(object):
    """One subcommand. run() returns the summary dict; audit_failures lists what --strict turns into exit 4."""
    name = None

    def __init__(self, config, out_dir, monitor=None):
        self.config = config
        self.out_dir = out_dir
        self.monitor = monitor if monitor is not None else SummaryMonitor(config.summary_dir, prefix=self.name)
        self.audit_failures = []
        self.summary = {}

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def write_table(self, name, rows, columns):
        pd.DataFrame(rows, columns=columns).to_csv(self.path(name), index=False, float_format=FLOAT_FORMAT)

    def write_json(self, name, obj):
        with open(self.path(name), 'w', encoding='utf-8') as f:
            json.dump(obj, f, ensure_ascii=False, indent=4, sort_keys=True)

    def write_summary(self):
        self.summary['audit_failures'] = list(self.audit_failures)
        self.write_json('summary.json', self.summary)

    def load_or_solve(self, params, tag='solve'):
        if self.config.field is not None:
            u = load_field_raw(self.config.field)
            check_same_grid(u, build_grid(params))
            logger.info('loaded field {} from {}'.format(u, self.config.field))
            return u
        u, report = solve(params, monitor=self.monitor.child(tag))
        self.summary['solve_report'] = report.to_dict()
        if not report.converged:
            raise NonConvergenceError('solve at eps={} did not converge'.format(params.eps), report)
        return u

    def free_boundary_center(self, u):
        if self.config.center != AUTO:
            return float(self.config.center), []
        points = free_boundary(u.trace(), self.config.free_boundary_level)
        if not points:
            raise InvalidParameterError('no free boundary point at level {}; set center explicitly'.format(
                self.config.free_boundary_level))
        # the point nearest the middle of the strip
        return min(points, key=abs), points

    def windows(self, x0):
        """(lambdas, radii) shrunk so the widest fit annulus stays in the domain and 2 max(radii) stays within
        the distance from x0 to the walls."""
        c = self.config
        dist = min(x0 + c.L, c.L - x0, c.H)
        lambda_scale = min(1., dist / (c.lambdas[0] * c.annulus[1]))
        radius_scale = min(1., 0.5 * dist / c.radii[-1])
        lambdas = [float(l) * lambda_scale for l in c.lambdas]
        radii = [float(r) * radius_scale for r in c.radii]
        if lambda_scale < 1. or radius_scale < 1.:
            logger.warning('center {} lies {:.4g} from the walls; lambdas scaled by {:.4g}, radii by {:.4g}'.format(
                x0, dist, lambda_scale, radius_scale))
        self.summary.update(wall_distance=dist, lambda_scale=lambda_scale, radius_scale=radius_scale,
                            fit_lambdas=lambdas, weiss_radii=radii)
        return lambdas, radii

    def check_blowup_trend(self, fit):
        self.summary['blowup_residual_decreasing'] = fit.residual_decreasing
        if not fit.residual_decreasing:
            self.audit_failures.append('blowup residuals {} grow as lambda decreases over {}'.format(
                fit.residual, fit.lambdas))

    def orientation(self):
        return None if self.config.orientation == AUTO else int(self.config.orientation)

    def check_band(self, alpha_fit):
        c = self.config
        reference = alpha_star(c.s, c.mass) if c.acceptance_reference == 'alpha_star' else alpha_flux(c.s, c.mass)
        deviation = abs(alpha_fit / reference - 1.)
        self.summary['acceptance_deviation'] = deviation
        if deviation > c.acceptance_band:
            self.audit_failures.append('alpha_fit {:.6g} deviates {:.1%} from {} {:.6g}'.format(
                alpha_fit, deviation, c.acceptance_reference, reference))

    def run(self):
        raise NotImplementedError


class ConstantsRunner(Runner):
    name = 'constants'
    columns = ['s', 'c0_gamma', 'c0_quadrature', 'alpha_star', 'c0_flux', 'c0_flux_quadrature', 'alpha_flux']

    def run(self):
        rows = parallel_map(_constants_row, [float(s) for s in self.config.s_values], self.config.num_workers)
        self.write_table('constants.csv', rows, self.columns)
        self.summary.update(rows=len(rows), max_quadrature_gap=max(abs(r['c0_gamma'] - r['c0_quadrature'])
                                                                   for r in rows))
        return self.summary


class SymbolCheckRunner(Runner):
    name = 'symbol-check'

    def run(self):
        c = self.config
        rows = []
        for s in c.s_values:
            rows.extend(parallel_map(_symbol_row, [int(k) for k in c.k_values], c.num_workers,
                                     shared=(float(s), int(c.symbol_nodes))))
        self.write_table('symbol_check.csv', rows, ['s', 'k', 'rho'])
        spreads = {}
        for s in c.s_values:
            rho = [r['rho'] for r in rows if r['s'] == s and r['k'] > 0]
            if rho:
                spreads[str(s)] = max(rho) / min(rho) - 1.
        self.summary['rho_spread'] = spreads
        return self.summary


class SolveRunner(Runner):
    name = 'solve'

    def run(self):
        params = self.config.problem_params()
        u, report = solve(params, monitor=self.monitor)
        self.summary['solve_report'] = report.to_dict()
        save_field_raw(u, self.path('field.field'))
        save_field_csv(u, self.path('field.csv'))
        trace = u.trace()
        flux = neumann_flux(u, params)
        self.write_table('trace.csv', [dict(x1=x, value=v, flux=f) for x, v, f in
                                       zip(trace.x1, trace.values, flux.values)], ['x1', 'value', 'flux'])
        if not report.converged:
            raise NonConvergenceError('solve at eps={} did not converge'.format(params.eps), report)
        self.summary['free_boundary'] = free_boundary(trace, self.config.free_boundary_level)
        return self.summary


class WeissRunner(Runner):
    name = 'weiss'

    def run(self):
        c = self.config
        params = c.problem_params()
        u = self.load_or_solve(params)
        if c.chi_field is not None:
            thin = load_thin_csv(c.chi_field)
        else:
            thin = reaction_trace(u, params)
        x0, points = self.free_boundary_center(u)
        _, radii = self.windows(x0)
        curve = weiss_curve(u, thin, x0, radii, c.c_mono, c.num_workers)
        self.write_table('weiss.csv', curve.rows(), ['r', 'psi', 'bulk', 'sphere', 'thin'])
        self.summary.update(center=x0, free_boundary=points, weiss=curve.to_dict(), weiss_value=curve.psi[0],
                            weiss_class=classify_weiss_value(curve.psi[0], c.mass), monotone_audit=curve.monotone)
        self.summary['nondegeneracy'] = nondegeneracy(u.trace(), x0, radii, c.s)
        if not curve.monotone:
            self.audit_failures.append('weiss curve not monotone at radii {}'.format(
                [curve.radii[i] for i in curve.violations]))
        return self.summary


class ContinuationRunner(Runner):
    name = 'continuation'

    def run(self):
        c = self.config
        fields, report = continuation(c.problem_params(eps=c.eps_ladder[0]), c.eps_ladder, c.compact, c.chi_delta,
                                      int(c.holder_max_pairs), int(c.seed), self.monitor)
        self.write_table('continuation.csv', report.rows(),
                         ['eps', 'cauchy', 'holder', 'reaction_mass', 'defect', 'iterations'])
        save_field_raw(fields[-1], self.path('endpoint.field'))
        self.summary['continuation'] = report.to_dict()
        self.fields = fields
        self.report = report
        return self.summary


class BlowupRunner(Runner):
    name = 'blowup'

    def run(self):
        c = self.config
        params = c.problem_params()
        u = self.load_or_solve(params)
        x0, points = self.free_boundary_center(u)
        lambdas, _ = self.windows(x0)
        fit = blowup_fit(u, x0, lambdas, self.orientation(), tuple(c.annulus), c.s, params.eps, c.num_workers,
                         c.blowup_min_cells, c.blowup_residual_floor)
        self.write_table('blowup.csv', fit.rows(), ['lam', 'alpha', 'residual'])
        self.summary.update(center=x0, free_boundary=points, blowup=fit.to_dict(), alpha_fit=fit.headline_alpha,
                            alpha_star=alpha_star(c.s, c.mass), alpha_flux=alpha_flux(c.s, c.mass))
        self.check_band(fit.headline_alpha)
        self.check_blowup_trend(fit)
        return self.summary


class ReportRunner(Runner):
    """continuation -> chi on the endpoint -> free boundary -> blowup fit -> weiss curve."""
    name = 'report'

    def run(self):
        c = self.config
        stage = ContinuationRunner(c, self.out_dir, self.monitor.child('continuation'))
        stage.run()
        report = stage.report
        u = stage.fields[-1]
        params = c.problem_params(eps=c.eps_ladder[-1])
        if params.reaction is not None:
            chi, _ = chi_extract(u, params, c.chi_delta)
            save_thin_csv(chi, self.path('chi.csv'), column='chi')
        else:
            chi = reaction_trace(u, params)
        level = c.eps_ladder[-1] if c.level == AUTO else float(c.level)
        points = free_boundary(u.trace(), level)
        if c.center != AUTO:
            x0 = float(c.center)
        elif points:
            x0 = min(points, key=abs)
        else:
            raise InvalidParameterError('no free boundary point at level {} on the ladder endpoint'.format(level))
        lambdas, radii = self.windows(x0)
        orientation = self.orientation()
        if orientation is None:
            orientation = select_orientation(u.trace(), x0, lambdas[0] * c.annulus[1])
        fit = blowup_fit(u, x0, lambdas, orientation, tuple(c.annulus), c.s, params.eps, c.num_workers,
                         c.blowup_min_cells, c.blowup_residual_floor)
        curve = weiss_curve(u, reaction_trace(u, params), x0, radii, c.c_mono, c.num_workers)
        self.write_table('blowup.csv', fit.rows(), ['lam', 'alpha', 'residual'])
        self.write_table('weiss.csv', curve.rows(), ['r', 'psi', 'bulk', 'sphere', 'thin'])
        self.summary.update(alpha_fit=fit.headline_alpha, alpha_star=alpha_star(c.s, c.mass),
                            alpha_flux=alpha_flux(c.s, c.mass), weiss_value=curve.psi[0],
                            weiss_class=classify_weiss_value(curve.psi[0], c.mass), monotone_audit=curve.monotone,
                            defect_trend=report.defect, holder_ratio=report.holder_ratio,
                            eps_ladder=report.eps_ladder, free_boundary=points, center=x0, orientation=orientation,
                            blowup=fit.to_dict(), weiss=curve.to_dict(), continuation=report.to_dict())
        if not curve.monotone:
            self.audit_failures.append('weiss curve not monotone at radii {}'.format(
                [curve.radii[i] for i in curve.violations]))
        self.check_band(fit.headline_alpha)
        self.check_blowup_trend(fit)
        return self.summary


NAME2RUNNER = dict([('constants', ConstantsRunner),
                    ('symbol-check', SymbolCheckRunner),
                    ('solve', SolveRunner),
                    ('weiss', WeissRunner),
                    ('continuation', ContinuationRunner),
                    ('blowup', BlowupRunner),
                    ('report', ReportRunner)])
