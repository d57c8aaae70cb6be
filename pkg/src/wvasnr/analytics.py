"""Closed-form SNR budget for split detection with and without weak values.

Every function takes and returns plain SI floats. Functions that produce
more than one number return a small frozen dataclass so reports can print
labelled terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants

from .errors import InvalidParameterError
from .optics import PHASE_FLOOR, check_phase, focused_transform, gaussian_intensity

__all__ = [
    "PhotonBudget",
    "WeakValueFactors",
    "NoiseModel",
    "DivergingSnr",
    "FocusedSnr",
    "Uncertainty",
    "gaussian_intensity",
    "photon_energy",
    "photons_from_power",
    "snr_sd",
    "weak_value_factors",
    "snr_wva",
    "snr_diverging",
    "snr_focused",
    "measurement_uncertainty_sd",
    "measurement_uncertainty_wva",
    "saturation_limited_snr",
]

_SPLIT_FACTOR = math.sqrt(2.0 / math.pi)


def _check(name, value, *, positive=False, nonnegative=False):
    value = float(value)
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")
    if positive and value <= 0.0:
        raise InvalidParameterError(f"{name} must be > 0, got {value!r}")
    if nonnegative and value < 0.0:
        raise InvalidParameterError(f"{name} must be >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class PhotonBudget:
    """Photon counting budget for one integration window."""

    power: float
    integration_time: float
    photon_energy: float

    def __post_init__(self):
        _check("power", self.power, nonnegative=True)
        _check("integration_time", self.integration_time, positive=True)
        _check("photon_energy", self.photon_energy, positive=True)

    @property
    def rate(self):
        """Photon arrival rate Gamma (1/s)."""
        return self.power / self.photon_energy

    @property
    def N(self):
        return self.power * self.integration_time / self.photon_energy

    @classmethod
    def from_wavelength(cls, power, integration_time, wavelength):
        return cls(power, integration_time, photon_energy(wavelength))

    @classmethod
    def from_count(cls, N, integration_time=1.0, photon_energy=1.0):
        """Budget with a prescribed expected photon count."""
        N = _check("N", N, nonnegative=True)
        return cls(N * photon_energy / integration_time, integration_time, photon_energy)


def photon_energy(wavelength):
    return constants.h * constants.c / _check("wavelength", wavelength, positive=True)


def photons_from_power(P, tau, wavelength):
    return PhotonBudget.from_wavelength(P, tau, wavelength)


@dataclass(frozen=True)
class NoiseModel:
    """Detector and technical-noise parameters.

    ``S_xi`` is the amplitude of white technical position noise, in m*sqrt(s):
    averaged over a window ``t`` it contributes a standard deviation
    ``S_xi / sqrt(t)``.
    """

    S_xi: float = 0.0
    eta_q: float = 1.0
    saturation_power: float | None = None

    def __post_init__(self):
        _check("S_xi", self.S_xi, nonnegative=True)
        eta = _check("eta_q", self.eta_q)
        if not 0.0 < eta <= 1.0:
            raise InvalidParameterError(f"eta_q must lie in (0, 1], got {eta!r}")
        if self.saturation_power is not None:
            _check("saturation_power", self.saturation_power, positive=True)


@dataclass(frozen=True)
class WeakValueFactors:
    A: float
    P_ps: float
    alpha: float
    d_a: float
    N_a: float


def snr_sd(N, d, sigma):
    """Quantum-limited SNR of a split detector: ``sqrt(2/pi) sqrt(N) d / sigma``."""
    N = _check("N", N, nonnegative=True)
    sigma = _check("sigma", sigma, positive=True)
    return _SPLIT_FACTOR * math.sqrt(N) * _check("d", d) / sigma


def weak_value_factors(k0, sigma, phi, l_md, N, d):
    """Linear weak-value amplification for a collimated beam in a Sagnac.

    Returns
    -------
    WeakValueFactors
        ``A = 2 k0 sigma**2 cot(phi/2) / l_md``, ``P_ps = sin(phi/2)**2`` and
        ``alpha = A sqrt(P_ps) = 2 k0 sigma**2 cos(phi/2) / l_md``, together
        with the amplified deflection ``A d`` and the post-selected photon
        count ``P_ps N``.
    """
    k0 = _check("k0", k0, positive=True)
    sigma = _check("sigma", sigma, positive=True)
    l_md = _check("l_md", l_md, positive=True)
    phi = check_phase(phi)
    half = 0.5 * phi
    base = 2.0 * k0 * sigma**2 / l_md
    A = base * math.cos(half) / math.sin(half)
    P_ps = math.sin(half) ** 2
    N = _check("N", N, nonnegative=True)
    return WeakValueFactors(A=A, P_ps=P_ps, alpha=base * math.cos(half), d_a=A * _check("d", d), N_a=P_ps * N)


def snr_wva(R, alpha):
    return float(alpha) * float(R)


@dataclass(frozen=True)
class DivergingSnr:
    C: float
    snr: float
    alpha: float
    snr_sd: float


def snr_diverging(N, d, sigma, a, l_lm, l_md, k0, phi):
    """Weak-value SNR when a diverging lens precedes the interferometer.

    ``R'_A = C (sigma + a l_md / l_lm)`` with
    ``C = sqrt(8N/pi) k0 l_lm d cos(phi/2) / (l_md (l_lm + l_md))``.
    `sigma` is the radius at the detector and `a` the radius at the lens.
    """
    for name, value in (("sigma", sigma), ("a", a), ("l_lm", l_lm), ("l_md", l_md)):
        _check(name, value, positive=True)
    N = _check("N", N, nonnegative=True)
    phi = check_phase(phi)
    cos_half = math.cos(0.5 * phi)
    C = math.sqrt(8.0 * N / math.pi) * k0 * l_lm * d * cos_half / (l_md * (l_lm + l_md))
    snr = C * (sigma + a * l_md / l_lm)

    factors = weak_value_factors(k0, sigma, phi, l_md, N, d)
    base = snr_sd(N, d, sigma)
    other = factors.alpha * base * (l_lm + a * l_md / sigma) / (l_lm + l_md)
    if not math.isclose(snr, other, rel_tol=1e-10, abs_tol=1e-300):
        raise ArithmeticError(f"diverging SNR forms disagree: {snr!r} vs {other!r}")
    return DivergingSnr(C=C, snr=snr, alpha=factors.alpha, snr_sd=base)


@dataclass(frozen=True)
class FocusedSnr:
    snr: float
    alpha_f: float
    d_prime: float
    sigma_prime: float


def snr_focused(N, k_kick, f, k0, l_md, sigma):
    """SNR when a lens of focal length `f` focuses the beam onto the split detector.

    The detector sits in the focal plane and ``l_md`` is the total distance
    from the deflecting mirror to the detector.
    """
    d_prime, sigma_prime = focused_transform(sigma, k_kick, f, k0)
    snr = snr_sd(N, d_prime, sigma_prime)
    alpha_f = 2.0 * k0 * sigma**2 / _check("l_md", l_md, positive=True)
    direct = alpha_f * snr_sd(N, (k_kick / k0) * l_md, sigma)
    if not math.isclose(snr, direct, rel_tol=1e-10, abs_tol=1e-300):
        raise ArithmeticError(f"focused SNR forms disagree: {snr!r} vs {direct!r}")
    return FocusedSnr(snr=snr, alpha_f=alpha_f, d_prime=d_prime, sigma_prime=sigma_prime)


@dataclass(frozen=True)
class Uncertainty:
    """Time-averaged position estimate ``scale * (signal +- shot +- technical)``.

    For standard detection ``scale`` is 1 and ``signal`` is ``d``. For weak
    values ``scale`` is ``1/sqrt(P_ps)`` and ``signal`` is ``alpha d``.
    """

    estimate: float
    signal: float
    shot_term: float
    technical_term: float
    scale: float = 1.0

    @property
    def snr_shot(self):
        return self.signal / self.shot_term if self.shot_term > 0 else math.inf

    @property
    def snr_technical(self):
        return self.signal / self.technical_term if self.technical_term > 0 else math.inf

    @property
    def snr(self):
        """Combined SNR, adding the uncorrelated noise terms in quadrature."""
        noise = math.hypot(self.shot_term, self.technical_term)
        return self.signal / noise if noise > 0 else math.inf


def measurement_uncertainty_sd(d, sigma, Gamma, t, S_xi=0.0):
    Gamma = _check("Gamma", Gamma, nonnegative=True)
    t = _check("t", t, positive=True)
    if Gamma * t <= 0.0:
        raise InvalidParameterError("Gamma * t must be > 0")
    sigma = _check("sigma", sigma, positive=True)
    S_xi = _check("S_xi", S_xi, nonnegative=True)
    d = _check("d", d)
    return Uncertainty(
        estimate=d,
        signal=d,
        shot_term=sigma / math.sqrt(Gamma * t),
        technical_term=S_xi / math.sqrt(t),
    )


def measurement_uncertainty_wva(d, sigma, Gamma, t, S_xi, factors: WeakValueFactors):
    sd = measurement_uncertainty_sd(d, sigma, Gamma, t, S_xi)
    root_p = math.sqrt(factors.P_ps)
    signal = factors.alpha * sd.signal
    return Uncertainty(
        estimate=signal / root_p,
        signal=signal,
        shot_term=sd.shot_term,
        technical_term=sd.technical_term * root_p,
        scale=1.0 / root_p,
    )


def saturation_limited_snr(P_laser, P_sat, tau, wavelength, d, sigma, factors: WeakValueFactors):
    """Best SNR reachable when the detector saturates at `P_sat`.

    Standard detection can use at most ``P_sat`` of input power. Behind the
    dark port the detector sees only ``P_ps`` of the input, so up to
    ``P_sat / P_ps`` can be launched.

    Returns
    -------
    (R_sd_max, R_wva_max)
    """
    P_laser = _check("P_laser", P_laser, positive=True)
    P_sat = _check("P_sat", P_sat, positive=True)
    p_sd = min(P_laser, P_sat)
    p_wva = min(P_laser, P_sat / factors.P_ps)
    r_sd = snr_sd(photons_from_power(p_sd, tau, wavelength).N, d, sigma)
    r_wva = factors.alpha * snr_sd(photons_from_power(p_wva, tau, wavelength).N, d, sigma)
    return r_sd, r_wva
