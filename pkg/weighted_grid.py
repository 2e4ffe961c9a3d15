#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: weighted_grid.py
# =====================================

import json
import logging
import os

import numpy as np
import pandas as pd

from utils.misc import InvalidArgumentError, InvalidParameterError, check_open_unit, require

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

SUBSAMPLES = 8


def face_weight(s, a, b):
    """Exact integral of x^(1-2s) over [a, b], elementwise for array arguments."""
    check_open_unit(s)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(a < 0.) or np.any(b <= a):
        raise InvalidParameterError('face_weight needs 0 <= a < b, got a={}, b={}'.format(a, b))
    p = 2. - 2. * s
    out = (b ** p - a ** p) / p
    return float(out) if out.ndim == 0 else out


class Grid(object):
    """Uniform node grid on [-L, L] x [0, H]; values are stored as (nz, nx) arrays, row 0 is x_n = 0."""

    def __init__(self, s, L, H, nx, nz):
        check_open_unit(s)
        require(np.isfinite(L) and L > 0., 'L must be positive, got {}'.format(L))
        require(np.isfinite(H) and H > 0., 'H must be positive, got {}'.format(H))
        require(int(nx) == nx and nx >= 3, 'nx must be an integer >= 3, got {}'.format(nx))
        require(int(nz) == nz and nz >= 3, 'nz must be an integer >= 3, got {}'.format(nz))
        self.s = float(s)
        self.L = float(L)
        self.H = float(H)
        self.nx = int(nx)
        self.nz = int(nz)
        self.x1 = np.linspace(-self.L, self.L, self.nx)
        self.xn = np.linspace(0., self.H, self.nz)
        self.xn[0] = 0.
        self.hx = 2. * self.L / (self.nx - 1)
        self.hz = self.H / (self.nz - 1)

        # transverse measure of each node column (dual cell width)
        self.col_width = np.full(self.nx, self.hx)
        self.col_width[[0, -1]] = 0.5 * self.hx
        # horizontal faces of row j: weight integrated over the dual extent in x_n
        lo = np.maximum(0., self.xn - 0.5 * self.hz)
        hi = np.minimum(self.H, self.xn + 0.5 * self.hz)
        self.horizontal_face_weight = face_weight(self.s, lo, hi)
        # vertical faces between rows j and j+1: segment integral over segment length
        self.segment_weight = face_weight(self.s, self.xn[:-1], self.xn[1:])
        self.vertical_face_weight = self.segment_weight / self.hz

    def __repr__(self):
        return 'Grid(s={}, L={}, H={}, nx={}, nz={})'.format(self.s, self.L, self.H, self.nx, self.nz)

    def __eq__(self, other):
        return isinstance(other, Grid) and (self.s, self.L, self.H, self.nx, self.nz) == \
            (other.s, other.L, other.H, other.nx, other.nz)

    def __hash__(self):
        return hash((self.s, self.L, self.H, self.nx, self.nz))

    def __reduce__(self):
        return Grid, (self.s, self.L, self.H, self.nx, self.nz)

    @property
    def shape(self):
        return self.nz, self.nx

    @property
    def h(self):
        return max(self.hx, self.hz)

    def mesh(self):
        return np.meshgrid(self.x1, self.xn)

    def conductances(self):
        """Edge conductances (cx, cz): cx (nz, nx-1) along x1, cz (nz-1, nx) along x_n."""
        cx = np.repeat((self.horizontal_face_weight / self.hx)[:, None], self.nx - 1, axis=1)
        cz = (self.vertical_face_weight / self.hz)[:, None] * self.col_width[None, :]
        return cx, cz

    def boundary_mask(self):
        """Dirichlet nodes: lateral columns, top row and the two bottom corners."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[:, 0] = True
        mask[:, -1] = True
        mask[-1, :] = True
        return mask

    def cell_weight(self):
        """Exact weight integral of every cell, shape (nz-1, nx-1)."""
        return np.repeat((self.hx * self.segment_weight)[:, None], self.nx - 1, axis=1)

    def cell_centers(self):
        xc = 0.5 * (self.x1[:-1] + self.x1[1:])
        zc = 0.5 * (self.xn[:-1] + self.xn[1:])
        return np.meshgrid(xc, zc)

    def disc_fraction(self, x0, r):
        """Weighted fraction of every cell lying in the half disc {|x - (x0, 0)| <= r}.

        Cells cut by the circle are sub-sampled with exact sub-row weight integrals.
        """
        xl, zl = np.meshgrid(self.x1[:-1], self.xn[:-1])
        xr, zr = xl + self.hx, zl + self.hz
        dx_near = np.maximum(np.maximum(xl - x0, x0 - xr), 0.)
        dz_near = np.maximum(zl, 0.)
        near = np.hypot(dx_near, dz_near)
        far = np.hypot(np.maximum(np.abs(xl - x0), np.abs(xr - x0)), zr)
        frac = np.where(far <= r, 1., 0.)
        cut = (near < r) & (far > r)
        if np.any(cut):
            frac[cut] = self._subsampled_fraction(xl[cut], zl[cut], x0, r)
        return frac

    def annulus_fraction(self, x0, r_inner, r_outer):
        return self.disc_fraction(x0, r_outer) - self.disc_fraction(x0, r_inner)

    def _subsampled_fraction(self, xl, zl, x0, r):
        ns = SUBSAMPLES
        t = (np.arange(ns) + 0.5) / ns
        edges = np.arange(ns + 1) / ns
        sx = xl[:, None, None] + self.hx * t[None, None, :]
        sz = zl[:, None, None] + self.hz * t[None, :, None]
        lo = zl[:, None] + self.hz * edges[None, :-1]
        hi = zl[:, None] + self.hz * edges[None, 1:]
        wsub = face_weight(self.s, lo, hi)[:, :, None]
        inside = ((sx - x0) ** 2 + sz ** 2 <= r * r).astype(np.float64)
        return np.sum(wsub * inside, axis=(1, 2)) / (ns * np.sum(wsub, axis=(1, 2)))

    def coarsened(self):
        """Grid on every other node, or None when nx - 1 or nz - 1 does not halve into at least two cells."""
        if (self.nx - 1) % 2 or (self.nz - 1) % 2 or self.nx < 5 or self.nz < 5:
            return None
        return Grid(self.s, self.L, self.H, (self.nx + 1) // 2, (self.nz + 1) // 2)

    def check_thin_ball(self, x0, r, error_cls=InvalidParameterError):
        require(np.isfinite(r) and r > 0., 'radius must be positive, got {}'.format(r), error_cls)
        require(x0 - r >= self.x1[0] - 1e-12 and x0 + r <= self.x1[-1] + 1e-12 and r <= self.H + 1e-12,
                'ball B_{}(({}, 0)) leaves the domain [-{}, {}] x [0, {}]'.format(r, x0, self.L, self.L, self.H),
                error_cls)


def build_grid(params):
    """Grid from anything carrying s, L, H, nx, nz (ProblemParams, ExperimentConfig)."""
    return Grid(params.s, params.L, params.H, params.nx, params.nz)


class Field(object):
    def __init__(self, grid, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise InvalidArgumentError('field values of shape {} do not match grid {}'.format(values.shape, grid.shape))
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError('field values must be finite')
        self.grid = grid
        self.values = values

    def __repr__(self):
        return 'Field({!r})'.format(self.grid)

    def copy(self):
        return Field(self.grid, self.values.copy())

    def trace(self):
        return ThinField(self.grid.x1, self.values[0].copy())

    def interpolate(self, x1, xn):
        """Bilinear interpolation, evenly reflected across x_n = 0."""
        g = self.grid
        x1 = np.asarray(x1, dtype=np.float64)
        xn = np.abs(np.asarray(xn, dtype=np.float64))
        tol = 1e-12 * max(g.L, g.H)
        if np.any(x1 < -g.L - tol) or np.any(x1 > g.L + tol) or np.any(xn > g.H + tol):
            raise InvalidArgumentError('interpolation points leave the grid')
        fx = np.clip((x1 + g.L) / g.hx, 0., g.nx - 1)
        fz = np.clip(xn / g.hz, 0., g.nz - 1)
        i = np.minimum(np.floor(fx).astype(int), g.nx - 2)
        j = np.minimum(np.floor(fz).astype(int), g.nz - 2)
        tx = fx - i
        tz = fz - j
        v = self.values
        return ((1. - tx) * (1. - tz) * v[j, i] + tx * (1. - tz) * v[j, i + 1]
                + (1. - tx) * tz * v[j + 1, i] + tx * tz * v[j + 1, i + 1])

    def restricted(self):
        """Injection onto Grid.coarsened(); None when the grid does not halve."""
        coarse = self.grid.coarsened()
        if coarse is None:
            return None
        return Field(coarse, self.values[::2, ::2])

    def cell_gradients(self):
        """Cell-centre gradient (d/dx1, d/dxn), each (nz-1, nx-1)."""
        v = self.values
        g = self.grid
        gx = 0.5 * ((v[:-1, 1:] - v[:-1, :-1]) + (v[1:, 1:] - v[1:, :-1])) / g.hx
        gz = 0.5 * ((v[1:, :-1] - v[:-1, :-1]) + (v[1:, 1:] - v[:-1, 1:])) / g.hz
        return gx, gz

    def cell_means(self):
        v = self.values
        return 0.25 * (v[:-1, :-1] + v[:-1, 1:] + v[1:, :-1] + v[1:, 1:])


class FieldFunction(object):
    """Analytic field u(x1, xn) exposing the Field interpolation interface."""

    def __init__(self, fn, grid=None):
        self.fn = fn
        self.grid = grid

    def interpolate(self, x1, xn):
        return np.asarray(self.fn(np.asarray(x1, dtype=np.float64), np.abs(np.asarray(xn, dtype=np.float64))),
                          dtype=np.float64)

    def on_grid(self, grid):
        X1, XN = grid.mesh()
        return Field(grid, self.interpolate(X1, XN))


class ThinField(object):
    """Nodal values on the x_n = 0 row together with their abscissae."""

    def __init__(self, x1, values):
        x1 = np.asarray(x1, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if x1.ndim != 1 or values.shape != x1.shape:
            raise InvalidArgumentError('thin field of length {} does not match {} abscissae'.format(
                values.shape, x1.shape))
        self.x1 = x1
        self.values = values

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return 'ThinField(n={})'.format(len(self.values))

    def interpolate(self, x):
        return np.interp(x, self.x1, self.values)

    def integrate(self, a, b, values=None):
        """Exact integral of the piecewise-linear interpolant over [a, b]."""
        values = self.values if values is None else values
        a, b = float(a), float(b)
        if b <= a:
            return 0.
        inner = (self.x1 > a) & (self.x1 < b)
        xs = np.concatenate([[a], self.x1[inner], [b]])
        vs = np.concatenate([[np.interp(a, self.x1, values)], values[inner], [np.interp(b, self.x1, values)]])
        return float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(xs)))

    def quadrature_weights(self):
        w = np.empty_like(self.x1)
        dx = np.diff(self.x1)
        w[0] = 0.5 * dx[0]
        w[-1] = 0.5 * dx[-1]
        w[1:-1] = 0.5 * (dx[1:] + dx[:-1])
        return w


def check_same_grid(field, grid):
    if field.grid != grid:
        raise InvalidArgumentError('field lives on {} but {} was expected'.format(field.grid, grid))


def check_thin_matches(thin, grid):
    if len(thin) != grid.nx or not np.allclose(thin.x1, grid.x1, rtol=0., atol=1e-12 * grid.L):
        raise InvalidArgumentError('thin field does not match the bottom row of {}'.format(grid))


def save_field_csv(field, path):
    X1, XN = field.grid.mesh()
    df = pd.DataFrame({'x1': X1.ravel(), 'xn': XN.ravel(), 'value': field.values.ravel()})
    df.to_csv(path, index=False, float_format='%.17g')


def save_thin_csv(thin, path, column='value'):
    pd.DataFrame({'x1': thin.x1, column: thin.values}).to_csv(path, index=False, float_format='%.17g')


def load_thin_csv(path, column='value'):
    df = pd.read_csv(path)
    if 'x1' not in df.columns or column not in df.columns:
        raise InvalidArgumentError('{} needs columns x1 and {}'.format(path, column))
    return ThinField(df['x1'].to_numpy(dtype=np.float64), df[column].to_numpy(dtype=np.float64))


def save_field_raw(field, path):
    g = field.grid
    header = dict(nx=g.nx, nz=g.nz, s=g.s, L=g.L, H=g.H, dtype='<f8')
    with open(path, 'wb') as f:
        f.write((json.dumps(header, sort_keys=True) + '\n').encode('utf-8'))
        f.write(np.ascontiguousarray(field.values, dtype='<f8').tobytes())


def load_field_raw(path):
    if not os.path.exists(path):
        raise InvalidArgumentError('field file {} does not exist'.format(path))
    with open(path, 'rb') as f:
        header = json.loads(f.readline().decode('utf-8'))
        data = np.frombuffer(f.read(), dtype=header.get('dtype', '<f8'))
    grid = Grid(header['s'], header['L'], header['H'], header['nx'], header['nz'])
    if data.size != grid.nx * grid.nz:
        raise InvalidArgumentError('field file {} holds {} values, header says {}'.format(
            path, data.size, grid.nx * grid.nz))
    return Field(grid, data.reshape(grid.shape).astype(np.float64))
