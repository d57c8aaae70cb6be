import math

import numpy as np
import pytest
from scipy.integrate import quad


def quad_moments(func, center, scale, tails=12.0):
    """Mass, mean and variance of ``func`` by adaptive quadrature.

    Integrates in units of ``scale`` on either side of ``center`` so the
    integrator sees O(1) numbers.
    """
    def integral(power):
        f = lambda u: (center + scale * u) ** power * func(center + scale * u) * scale
        kw = dict(epsabs=0.0, epsrel=1e-13, limit=400)
        return quad(f, -tails, 0.0, **kw)[0] + quad(f, 0.0, tails, **kw)[0]

    m0, m1, m2 = integral(0), integral(1), integral(2)
    mean = m1 / m0
    return m0, mean, m2 / m0 - mean**2


def dark_port_raw(sigma, phi, kappa):
    """Unnormalized dark-port profile weighted by the input Gaussian."""
    def f(x):
        return math.exp(-0.5 * (x / sigma) ** 2) / (math.sqrt(2 * math.pi) * sigma) * math.sin(0.5 * (kappa * x + phi)) ** 2
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
