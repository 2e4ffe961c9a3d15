#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: misc.py
# =====================================

import logging
import time

import numpy as np

logger = logging.getLogger(__name__)


class InvalidParameterError(ValueError):
    pass


class InvalidArgumentError(ValueError):
    pass


class InvalidRadiusError(InvalidParameterError):
    pass


class UnsupportedCaseError(NotImplementedError):
    pass


class SolverBreakdownError(RuntimeError):
    """Non-finite values appeared inside a solve; `report` holds the partial SolveReport."""

    def __init__(self, message, report=None):
        super(SolverBreakdownError, self).__init__(message)
        self.report = report


class NonConvergenceError(SolverBreakdownError):
    def __init__(self, message, report=None, step=None):
        super(NonConvergenceError, self).__init__(message, report)
        self.step = step


class ConfigValidationError(InvalidParameterError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super(ConfigValidationError, self).__init__('invalid configuration: ' + '; '.join(self.diagnostics))


def require(condition, message, error_cls=InvalidParameterError):
    if not condition:
        raise error_cls(message)


def check_finite(arrays, what, report=None):
    for m in arrays:
        if not np.all(np.isfinite(m)):
            logger.error('non-finite values in {}'.format(what))
            raise SolverBreakdownError('non-finite values in {}'.format(what), report)


def check_open_unit(s, name='s'):
    require(np.isfinite(s) and 0. < s < 1., '{} must lie in (0, 1), got {}'.format(name, s))


class PhaseTimer(object):
    """Wall time of one solver phase (linear solves, line searches), accumulated over a whole solve."""

    def __init__(self, name):
        self.name = name
        self.count = 0
        self.total = 0.
        self.longest = 0.
        self._started = None

    def __enter__(self):
        if self._started is not None:
            raise RuntimeError('timer {} is already running'.format(self.name))
        self._started = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_value, tb):
        elapsed = time.perf_counter() - self._started
        self._started = None
        self.add(elapsed)

    def add(self, elapsed):
        self.count += 1
        self.total += elapsed
        self.longest = max(self.longest, elapsed)

    @property
    def mean(self):
        return self.total / self.count if self.count else 0.

    def stats(self):
        return {'{}_{}'.format(self.name, key): value for key, value in
                (('mean', self.mean), ('count', self.count), ('total', self.total), ('longest', self.longest))}
