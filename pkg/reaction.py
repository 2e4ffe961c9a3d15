#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: reaction.py
# =====================================

import logging

import numpy as np
from scipy import integrate

from utils.misc import InvalidParameterError, require

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


class ReactionProfile(object):
    """Combustion nonlinearity beta on [0, 1] with its primitive B and derivative.

    beta, primitive and beta_prime act on the unit profile variable t; they are only
    evaluated on [0, 1], the support handling lives here.
    """

    def __init__(self, name, mass, lipschitz_bound, beta, primitive, beta_prime):
        require(np.isfinite(mass) and mass > 0., 'reaction mass must be positive, got {}'.format(mass))
        require(np.isfinite(lipschitz_bound) and lipschitz_bound > 0.,
                'lipschitz bound must be positive, got {}'.format(lipschitz_bound))
        self.name = name
        self.mass = float(mass)
        self.lipschitz_bound = float(lipschitz_bound)
        self._beta = beta
        self._primitive = primitive
        self._beta_prime = beta_prime

    def __repr__(self):
        return 'ReactionProfile(name={!r}, mass={}, lipschitz_bound={})'.format(self.name, self.mass,
                                                                                self.lipschitz_bound)

    def __reduce__(self):
        return make_profile, (self.name, self.mass)

    def beta(self, t):
        t = np.asarray(t, dtype=np.float64)
        inside = (t > 0.) & (t < 1.)
        return np.where(inside, self._beta(np.clip(t, 0., 1.)), 0.)

    def primitive(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.where(t >= 1., self.mass, self._primitive(np.clip(t, 0., 1.)))
        return np.where(t <= 0., 0., out)

    def beta_prime(self, t):
        t = np.asarray(t, dtype=np.float64)
        inside = (t > 0.) & (t < 1.)
        return np.where(inside, self._beta_prime(np.clip(t, 0., 1.)), 0.)

    def beta_eps(self, eps, t):
        _check_eps(eps)
        return self.beta(np.asarray(t, dtype=np.float64) / eps) / eps

    def B_eps(self, eps, t):
        _check_eps(eps)
        return self.primitive(np.asarray(t, dtype=np.float64) / eps)

    def beta_eps_prime(self, eps, t):
        _check_eps(eps)
        return self.beta_prime(np.asarray(t, dtype=np.float64) / eps) / eps ** 2

    def mass_by_quadrature(self):
        val, _ = integrate.quad(lambda t: float(self.beta(t)), 0., 1., epsabs=0., epsrel=1e-13, limit=200)
        return val


def _check_eps(eps):
    require(np.isfinite(eps) and eps > 0., 'eps must be positive, got {}'.format(eps))


def beta_default(M):
    """beta(t) = 6M t(1-t), B(t) = M t^2 (3-2t)."""
    require(np.isfinite(M) and M > 0., 'reaction mass must be positive, got {}'.format(M))
    M = float(M)
    return ReactionProfile('poly6', M, 6. * M,
                           beta=lambda t: 6. * M * t * (1. - t),
                           primitive=lambda t: M * t * t * (3. - 2. * t),
                           beta_prime=lambda t: 6. * M * (1. - 2. * t))


def beta_smooth(M):
    """C^1 bump: beta(t) = 30M t^2 (1-t)^2, B(t) = M (10t^3 - 15t^4 + 6t^5)."""
    require(np.isfinite(M) and M > 0., 'reaction mass must be positive, got {}'.format(M))
    M = float(M)
    return ReactionProfile('bump30', M, 10. * M / np.sqrt(3.),
                           beta=lambda t: 30. * M * t * t * (1. - t) ** 2,
                           primitive=lambda t: M * t ** 3 * (10. - 15. * t + 6. * t * t),
                           beta_prime=lambda t: 60. * M * t * (1. - t) * (1. - 2. * t))


NAME2PROFILE = dict([('poly6', beta_default),
                     ('bump30', beta_smooth)])


def make_profile(name, mass):
    if name not in NAME2PROFILE:
        raise InvalidParameterError('unknown reaction profile {!r}, expected one of {}'.format(
            name, sorted(NAME2PROFILE)))
    return NAME2PROFILE[name](mass)


def beta_eps(profile, eps, t):
    return profile.beta_eps(eps, t)


def B_eps(profile, eps, t):
    return profile.B_eps(eps, t)


def beta_eps_prime(profile, eps, t):
    return profile.beta_eps_prime(eps, t)
