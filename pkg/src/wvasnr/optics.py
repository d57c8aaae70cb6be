"""Beam, piezo mirror and Sagnac dark-port model.

All lengths are in metres, wavenumbers in 1/m, angles in radians and powers
in watts. The dark port is modelled as the two-path interference pattern

    I(x) ~ exp(-x**2 / 2 sigma**2) * sin**2((kappa x + phi) / 2)

where ``kappa`` is the relative transverse wavenumber kick between the
clockwise and counter-clockwise paths (``kappa = 2 k0 dtheta``). Its
small-kick limit gives the linear weak-value amplification
``A = 2 k0 sigma**2 cot(phi/2) / l_md`` and post-selection probability
``sin**2(phi/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import dawsn, ndtr

from .errors import DegenerateDarkPortError, InvalidParameterError

__all__ = [
    "PHASE_FLOOR",
    "TAIL_SIGMAS",
    "BeamState",
    "PiezoCalibration",
    "SagnacConfig",
    "DeflectionSpec",
    "TransverseDistribution",
    "check_phase",
    "piezo_tilt",
    "beam_deflection",
    "deflection_at_detector",
    "gaussian_intensity",
    "dark_port_intensity",
    "dark_port_moments",
    "dark_port_split_probabilities",
    "propagate_radius",
    "focal_length_for_radius",
    "focused_transform",
]

# Minimum allowed phi/2 (rad). Below this the dark port is empty and cot(phi/2) blows up.
PHASE_FLOOR = 1e-4
# Profiles are treated as zero beyond this many radii from their centre.
TAIL_SIGMAS = 12.0
DEFAULT_TABLE_SIZE = 4097

_GL_NODES, _GL_WEIGHTS = leggauss(8)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")
    return value


def _positive(name, value):
    value = _finite(name, value)
    if value <= 0.0:
        raise InvalidParameterError(f"{name} must be > 0, got {value!r}")
    return value


def check_phase(phi):
    """Validate an interferometer phase and return it as a float.

    Raises
    ------
    DegenerateDarkPortError
        If ``phi/2`` lies within `PHASE_FLOOR` of 0 or pi.
    """
    phi = _finite("phi", phi)
    if not 0.0 < phi < 2.0 * math.pi:
        raise InvalidParameterError(f"phi must lie in (0, 2*pi), got {phi!r}")
    half = 0.5 * phi
    if half < PHASE_FLOOR or math.pi - half < PHASE_FLOOR:
        raise DegenerateDarkPortError(
            f"phi/2 = {half:.3g} rad is within the phase floor {PHASE_FLOOR:g} rad of a "
            "perfectly dark port; increase phi"
        )
    return phi


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BeamState:
    """Coherent Gaussian beam.

    ``sigma`` is the intensity radius at the plane of interest (the detector
    unless stated otherwise). The optional lens fields describe the diverging
    geometry: ``radius_at_lens`` (a), ``l_lm`` (lens to mirror distance) and
    ``focal_length`` (negative for a diverging lens).
    """

    sigma: float
    k0: float
    wavelength: float | None = None
    power: float = 0.0
    radius_at_lens: float | None = None
    l_lm: float | None = None
    focal_length: float | None = None

    def __post_init__(self):
        _positive("sigma", self.sigma)
        _positive("k0", self.k0)
        if _finite("power", self.power) < 0.0:
            raise InvalidParameterError(f"power must be >= 0, got {self.power!r}")
        if self.wavelength is not None:
            lam = _positive("wavelength", self.wavelength)
            k_exact = 2.0 * math.pi / lam
            # k0 is allowed to be rounded (8e6 /m for 780 nm is 0.7% off)
            if abs(self.k0 - k_exact) / self.k0 > 0.02:
                raise InvalidParameterError(
                    f"k0 = {self.k0:.6g} /m is inconsistent with wavelength {lam:.6g} m "
                    f"(2*pi/wavelength = {k_exact:.6g} /m)"
                )
        for name in ("radius_at_lens", "l_lm"):
            value = getattr(self, name)
            if value is not None:
                _positive(name, value)
        if self.focal_length is not None and _finite("focal_length", self.focal_length) == 0.0:
            raise InvalidParameterError("focal_length must be non-zero")

    @classmethod
    def from_wavelength(cls, sigma, wavelength, **kwargs):
        return cls(sigma=sigma, k0=2.0 * math.pi / wavelength, wavelength=wavelength, **kwargs)


@dataclass(frozen=True)
class PiezoCalibration:
    """Drive-voltage to beam-angle chain of the piezo-actuated mirror."""

    displacement_per_mV: float = 127e-12
    lever_arm: float = 0.035
    # Specular reflection turns a mirror tilt into twice the beam deflection.
    reflection_factor: float = 2.0

    def __post_init__(self):
        _positive("displacement_per_mV", self.displacement_per_mV)
        _positive("lever_arm", self.lever_arm)
        _positive("reflection_factor", self.reflection_factor)


@dataclass(frozen=True)
class SagnacConfig:
    phi: float
    l_md: float
    piezo: PiezoCalibration = field(default_factory=PiezoCalibration)

    def __post_init__(self):
        check_phase(self.phi)
        _positive("l_md", self.l_md)

    @property
    def post_selection(self):
        return math.sin(0.5 * self.phi) ** 2


@dataclass(frozen=True)
class DeflectionSpec:
    """Deflection chain for one measurement, from drive voltage to detector."""

    drive_mV: float
    mirror_tilt: float
    beam_deflection: float
    d: float
    kappa: float

    @classmethod
    def from_drive(cls, drive_mV, config: SagnacConfig, k0):
        tilt = piezo_tilt(drive_mV, config.piezo)
        dtheta = beam_deflection(tilt, config.piezo)
        return cls(
            drive_mV=float(drive_mV),
            mirror_tilt=tilt,
            beam_deflection=dtheta,
            d=deflection_at_detector(dtheta, config.l_md),
            kappa=2.0 * _positive("k0", k0) * dtheta,
        )

    @classmethod
    def from_angle(cls, dtheta, l_md, k0):
        dtheta = _finite("beam_deflection", dtheta)
        return cls(
            drive_mV=math.nan,
            mirror_tilt=math.nan,
            beam_deflection=dtheta,
            d=deflection_at_detector(dtheta, l_md),
            kappa=2.0 * _positive("k0", k0) * dtheta,
        )


# --------------------------------------------------------------------------
# Deflection chain
# --------------------------------------------------------------------------


def piezo_tilt(drive_mV, calib: PiezoCalibration = PiezoCalibration()):
    """Mirror tilt (rad) produced by a piezo drive amplitude in mV."""
    drive_mV = _finite("drive_mV", drive_mV)
    if drive_mV < 0.0:
        raise InvalidParameterError(f"drive_mV must be >= 0, got {drive_mV!r}")
    return drive_mV * calib.displacement_per_mV / calib.lever_arm


def beam_deflection(mirror_tilt, calib: PiezoCalibration = PiezoCalibration()):
    return calib.reflection_factor * _finite("mirror_tilt", mirror_tilt)


def deflection_at_detector(dtheta, l_md):
    return _positive("l_md", l_md) * _finite("dtheta", dtheta)


# --------------------------------------------------------------------------
# Transverse profiles
# --------------------------------------------------------------------------


def gaussian_intensity(x, sigma):
    """Normalized 1-D Gaussian intensity profile with radius `sigma`."""
    sigma = _positive("sigma", sigma)
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * (x / sigma) ** 2) / (_SQRT_2PI * sigma)
    return out if out.ndim else float(out)


def dark_port_moments(sigma, phi, kappa):
    """Exact mass, mean and variance of the dark-port profile.

    Parameters
    ----------
    sigma : float
        Radius of the input Gaussian (m).
    phi : float
        Relative phase of the two interferometer paths (rad).
    kappa : float
        Relative transverse wavenumber kick between the paths (1/m).

    Returns
    -------
    mass : float
        Fraction of input power leaving the dark port (the post-selection
        probability). Tends to ``sin(phi/2)**2`` as ``kappa -> 0``.
    mean : float
        Centroid of the dark-port intensity (m).
    variance : float
        Second central moment of the dark-port intensity (m**2).
    """
    sigma = _positive("sigma", sigma)
    phi = check_phase(phi)
    kappa = _finite("kappa", kappa)
    ks2 = (kappa * sigma) ** 2
    g = math.exp(-0.5 * ks2)
    # 1 - cos(phi) g, written to stay accurate when phi is small and g ~ 1
    denom = 2.0 * math.sin(0.5 * phi) ** 2 + math.cos(phi) * -math.expm1(-0.5 * ks2)
    if denom < 1e-12:
        raise DegenerateDarkPortError(f"dark-port normalization {denom:.3g} is below 1e-12")
    mass = 0.5 * denom
    mean = kappa * sigma**2 * math.sin(phi) * g / denom
    second = sigma**2 * (1.0 - math.cos(phi) * (1.0 - ks2) * g) / denom
    return mass, mean, second - mean**2


def dark_port_intensity(x, sigma, phi, kappa):
    """Normalized dark-port intensity at transverse position(s) `x`."""
    mass, _, _ = dark_port_moments(sigma, phi, kappa)
    x = np.asarray(x, dtype=float)
    fringe = np.sin(0.5 * (kappa * x + phi)) ** 2
    out = np.exp(-0.5 * (x / sigma) ** 2) * fringe / (_SQRT_2PI * sigma * mass)
    return out if out.ndim else float(out)


def dark_port_split_probabilities(sigma, phi, kappa):
    """Fractions of the dark-port light falling on x > 0 and x < 0.

    Uses ``int_0^inf G(x) sin(kappa x) dx = F(kappa sigma / sqrt 2) / sqrt(pi)``
    with F the Dawson integral, so no quadrature is needed.
    """
    mass, _, _ = dark_port_moments(sigma, phi, kappa)
    half_diff = math.sin(phi) * dawsn(kappa * sigma / math.sqrt(2.0)) / (math.sqrt(math.pi) * 2.0 * mass)
    return float(0.5 + half_diff), float(0.5 - half_diff)


def _table_grid(center, sigma, size):
    # sinh spacing puts the finest cells near the peak
    stretch = 3.0
    u = np.linspace(-1.0, 1.0, size)
    grid = center + TAIL_SIGMAS * sigma * np.sinh(stretch * u) / math.sinh(stretch)
    if grid[0] < 0.0 < grid[-1]:
        grid = np.union1d(grid, [0.0])
    return grid


@dataclass(frozen=True, eq=False)
class TransverseDistribution:
    """Normalized 1-D photon-arrival density at the detector plane.

    Two shapes are supported: a Gaussian of radius `sigma` centred at
    `center` (``phi is None``), and the dark-port profile of a Gaussian of
    radius `sigma` with interferometer phase `phi` and kick `kappa`.

    `mass` is the fraction of input power carried by the profile before
    normalization: 1 for a plain beam, the post-selection probability for
    the dark port. The CDF is tabulated once on construction and used for
    inverse-CDF sampling.
    """

    sigma: float
    center: float = 0.0
    phi: float | None = None
    kappa: float = 0.0
    table_size: int = DEFAULT_TABLE_SIZE
    mass: float = field(init=False)
    mean: float = field(init=False)
    variance: float = field(init=False)
    grid: np.ndarray = field(init=False, repr=False)
    cdf_table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _positive("sigma", self.sigma)
        _finite("center", self.center)
        _finite("kappa", self.kappa)
        if self.table_size < DEFAULT_TABLE_SIZE:
            raise InvalidParameterError(f"table_size must be >= {DEFAULT_TABLE_SIZE}")
        if self.phi is None:
            if self.kappa != 0.0:
                raise InvalidParameterError("a plain Gaussian profile takes no kick; set phi")
            mass, mean, var = 1.0, float(self.center), float(self.sigma) ** 2
        else:
            if self.center != 0.0:
                raise InvalidParameterError("the dark-port profile is centred by construction")
            mass, mean, var = dark_port_moments(self.sigma, self.phi, self.kappa)
        set_ = object.__setattr__
        set_(self, "mass", mass)
        set_(self, "mean", mean)
        set_(self, "variance", var)
        grid = _table_grid(self.center, self.sigma, self.table_size)
        lo, hi = grid[:-1], grid[1:]
        half = 0.5 * (hi - lo)
        nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_NODES[None, :]
        cell = (self.density(nodes) @ _GL_WEIGHTS) * half
        cdf = np.concatenate([[0.0], np.cumsum(cell)])
        total = cdf[-1]
        if abs(total - 1.0) > 1e-9:
            raise InvalidParameterError(
                f"tabulated profile integrates to {total:.12g}; table too coarse for these parameters"
            )
        cdf /= total
        grid.setflags(write=False)
        cdf.setflags(write=False)
        set_(self, "grid", grid)
        set_(self, "cdf_table", cdf)

    @classmethod
    def gaussian(cls, sigma, center=0.0, **kwargs):
        return cls(sigma=sigma, center=center, **kwargs)

    @classmethod
    def dark_port(cls, sigma, phi, kappa, **kwargs):
        return cls(sigma=sigma, phi=check_phase(phi), kappa=kappa, **kwargs)

    @property
    def kind(self):
        return "gaussian" if self.phi is None else "dark_port"

    @property
    def std(self):
        return math.sqrt(self.variance)

    def density(self, x):
        if self.phi is None:
            return gaussian_intensity(np.asarray(x, dtype=float) - self.center, self.sigma)
        return dark_port_intensity(x, self.sigma, self.phi, self.kappa)

    def cdf(self, x):
        return np.interp(x, self.grid, self.cdf_table)

    def split_probabilities(self):
        """Exact probabilities ``(p_plus, p_minus)`` of landing on x > 0 / x < 0."""
        if self.phi is None:
            z = self.center / self.sigma
            return float(ndtr(z)), float(ndtr(-z))
        return dark_port_split_probabilities(self.sigma, self.phi, self.kappa)

    def sample(self, n, rng):
        """Draw `n` positions by inverse-CDF lookup on the tabulated CDF."""
        if n < 0:
            raise InvalidParameterError(f"sample size must be >= 0, got {n}")
        u = rng.random(int(n))
        return np.interp(u, self.cdf_table, self.grid)


# --------------------------------------------------------------------------
# Beam geometry
# --------------------------------------------------------------------------


def propagate_radius(beam: BeamState, z_from_lens):
    """Ray-optics radius of a beam diverging from a negative lens.

    ``sigma(z) = a (1 + z / |f|)`` with ``a`` the radius at the lens.
    """
    if beam.radius_at_lens is None or beam.focal_length is None:
        raise InvalidParameterError("propagate_radius needs radius_at_lens and focal_length")
    z = _finite("z_from_lens", z_from_lens)
    if z < 0.0:
        raise InvalidParameterError(f"z_from_lens must be >= 0, got {z!r}")
    return beam.radius_at_lens * (1.0 + z / abs(beam.focal_length))


def focal_length_for_radius(radius_at_lens, z_from_lens, sigma):
    """Diverging-lens focal length (negative) giving radius `sigma` at `z_from_lens`."""
    a = _positive("radius_at_lens", radius_at_lens)
    z = _positive("z_from_lens", z_from_lens)
    sigma = _positive("sigma", sigma)
    if sigma <= a:
        raise InvalidParameterError(
            f"a diverging lens cannot produce sigma = {sigma:.4g} m from a = {a:.4g} m"
        )
    return -z / (sigma / a - 1.0)


def focused_transform(sigma, k_kick, f, k0):
    """Deflection and radius at the focal plane of a lens of focal length `f`.

    Returns ``(d_prime, sigma_prime)`` with ``d' = f k / k0`` and
    ``sigma' = f / (2 k0 sigma)``.
    """
    sigma = _positive("sigma", sigma)
    f = _positive("f", f)
    k0 = _positive("k0", k0)
    return f * _finite("k_kick", k_kick) / k0, f / (2.0 * k0 * sigma)
