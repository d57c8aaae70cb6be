"""Flat ``key = value`` configuration with unit suffixes.

Example::

    # large interferometer
    sigma = 1.7mm
    phi_half_deg = 25
    power = 1.32 mW
    drive = 12.8mV

Every value is converted to SI on parsing. ``dump()`` writes SI values back
out, and parsing that output gives the same `Config`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .analytics import NoiseModel
from .errors import ConfigError, InvalidParameterError
from .experiments import Setup
from .montecarlo import ESTIMATORS, MODES
from .optics import PHASE_FLOOR, PiezoCalibration

__all__ = ["KEYS", "UNITS", "Config", "parse_config", "parse_quantity", "describe_keys"]

UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9, "pm": 1e-12},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "nW": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "angle": {"rad": 1.0, "mrad": 1e-3, "deg": math.pi / 180.0},
    "voltage": {"V": 1.0, "mV": 1e-3},
    "wavenumber": {"/m": 1.0},
    "number": {},
    "integer": {},
    "choice": {},
}


@dataclass(frozen=True)
class Key:
    dimension: str
    default: object
    doc: str
    check: str = ""
    choices: tuple = ()


_DEFAULT = Setup()

KEYS = {
    "sigma": Key("length", _DEFAULT.sigma, "beam radius at the detector", "positive"),
    "wavelength": Key("length", _DEFAULT.wavelength, "optical wavelength", "positive"),
    "k0": Key("wavenumber", _DEFAULT.k0, "optical wavenumber used in the amplification formulas", "positive"),
    "phi": Key("angle", _DEFAULT.phi, "relative phase of the two interferometer paths", "phase"),
    "l_md": Key("length", _DEFAULT.l_md, "distance from the piezo mirror to the detector", "positive"),
    "l_lm": Key("length", _DEFAULT.l_lm, "distance from the diverging lens to the mirror", "positive"),
    "lens_radius": Key("length", _DEFAULT.lens_radius, "beam radius at the diverging lens", "positive"),
    "geometry": Key("choice", _DEFAULT.geometry, "collimated or diverging beam", choices=("collimated", "diverging")),
    "power": Key("power", _DEFAULT.power, "optical power entering the setup", "nonnegative"),
    "tau": Key("time", _DEFAULT.tau, "integration time per measurement", "positive"),
    "drive": Key("voltage", _DEFAULT.drive_mV * 1e-3, "piezo drive amplitude", "nonnegative"),
    "displacement_per_mV": Key("length", 127e-12, "piezo displacement per mV of drive", "positive"),
    "lever_arm": Key("length", 0.035, "piezo lever arm", "positive"),
    "reflection_factor": Key("number", 2.0, "beam deflection per unit mirror tilt", "positive"),
    "S_xi": Key("number", 0.0, "technical white-noise amplitude (m*sqrt(s))", "nonnegative"),
    "eta_q": Key("number", 1.0, "detector quantum efficiency", "efficiency"),
    "saturation_power": Key("power", None, "detector saturation power (none = unlimited)", "positive"),
    "trials": Key("integer", 1000, "Monte Carlo trials per point", "trials"),
    "seed": Key("integer", 0, "Monte Carlo seed (unsigned 64-bit)", "seed"),
    "mode": Key("choice", "poisson", "Monte Carlo sampling mode", choices=MODES),
    "estimator": Key("choice", "split", "position estimator", choices=ESTIMATORS),
}

# Input-only spellings that set another key.
ALIASES = {
    "phi_half_deg": ("phi", lambda v: 2.0 * math.radians(v), "half the interferometer phase, in degrees"),
}

_QUANTITY = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([^\s\d].*?)?\s*$")


def parse_quantity(text, dimension):
    """Parse ``"1.7mm"``, ``"25 deg"`` or a bare number into an SI float."""
    m = _QUANTITY.match(text)
    if not m:
        raise ValueError(f"not a number: {text!r}")
    value = float(m.group(1))
    suffix = m.group(2)
    if suffix:
        table = UNITS[dimension]
        if suffix not in table:
            allowed = ", ".join(table) or "none"
            raise ValueError(f"unit {suffix!r} is not valid here (allowed: {allowed})")
        value *= table[suffix]
    return value


def describe_keys():
    """One line per accepted key, for ``--help``."""
    lines = []
    for name, key in KEYS.items():
        units = "/".join(UNITS[key.dimension]) if UNITS[key.dimension] else key.dimension
        if key.choices:
            units = "|".join(key.choices)
        lines.append(f"  {name:<20} {key.doc} [{units}; default {key.default}]")
    for name, (_, _, doc) in ALIASES.items():
        lines.append(f"  {name:<20} {doc}")
    return "\n".join(lines)


def _convert(name, text):
    key = KEYS[name]
    text = text.strip()
    if key.dimension == "choice":
        if text not in key.choices:
            raise ValueError(f"must be one of {', '.join(key.choices)}, got {text!r}")
        return text
    if key.default is None and text.lower() == "none":
        return None
    if key.dimension == "integer":
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"must be an integer, got {text!r}") from None
    return parse_quantity(text, key.dimension)


def _validate(name, value):
    check = KEYS[name].check
    if value is None or not check:
        return
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError("must be finite")
    if check == "positive" and not value > 0:
        raise ValueError(f"must be > 0 (positivity), got {value!r}")
    if check == "nonnegative" and not value >= 0:
        raise ValueError(f"must be >= 0, got {value!r}")
    if check == "efficiency" and not 0 < value <= 1:
        raise ValueError(f"must lie in (0, 1], got {value!r}")
    if check == "trials" and value < 2:
        raise ValueError(f"must be >= 2, got {value!r}")
    if check == "seed" and not 0 <= value < 2**64:
        raise ValueError(f"must be an unsigned 64-bit integer, got {value!r}")
    if check == "phase":
        if not 0 < value < 2 * math.pi:
            raise ValueError(f"must lie in (0, 2*pi) rad, got {value!r}")
        half = 0.5 * value
        if half < PHASE_FLOOR or math.pi - half < PHASE_FLOOR:
            raise ValueError(f"phi/2 = {half:.3g} rad is within {PHASE_FLOOR:g} rad of a perfectly dark port")


@dataclass(frozen=True)
class Config:
    values: dict
    path: str | None = None
    overrides: tuple = ()
    explicit: frozenset = field(default_factory=frozenset)

    def __getitem__(self, name):
        return self.values[name]

    def dump(self):
        lines = []
        for name in KEYS:
            value = self.values[name]
            if value is None:
                text = "none"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{name} = {text}")
        return "\n".join(lines) + "\n"

    def with_values(self, **changes):
        return replace(self, values={**self.values, **changes}, explicit=self.explicit | set(changes))

    def to_setup(self) -> Setup:
        v = self.values
        try:
            return Setup(
                sigma=v["sigma"],
                wavelength=v["wavelength"],
                k0=v["k0"],
                phi=v["phi"],
                l_md=v["l_md"],
                l_lm=v["l_lm"],
                lens_radius=v["lens_radius"],
                power=v["power"],
                tau=v["tau"],
                drive_mV=v["drive"] * 1e3,
                piezo=PiezoCalibration(v["displacement_per_mV"], v["lever_arm"], v["reflection_factor"]),
                noise=NoiseModel(v["S_xi"], v["eta_q"], v["saturation_power"]),
                geometry=v["geometry"],
                mode=v["mode"],
                estimator=v["estimator"],
            )
        except InvalidParameterError as exc:
            raise ConfigError(str(exc), path=self.path) from exc


def _assign(values, explicit, raw_key, raw_value, **where):
    name = raw_key.strip()
    try:
        if name in ALIASES:
            target, transform, _ = ALIASES[name]
            value = transform(parse_quantity(raw_value, "number"))
            name = target
        elif name in KEYS:
            value = _convert(name, raw_value)
        else:
            raise ConfigError(f"unknown key {name!r}", key=name, **where)
        _validate(name, value)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{name}: {exc}", key=name, **where) from None
    values[name] = value
    explicit.add(name)


def parse_config(path=None, overrides=()):
    """Read a config file (optional) and apply ``key=value`` overrides.

    Missing keys take the large-interferometer defaults.

    Raises
    ------
    ConfigError
        For a missing file, a malformed line, an unknown key or a value that
        violates its key's constraint. The message names the line and key.
    """
    values = {name: key.default for name, key in KEYS.items()}
    explicit = set()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror or exc}", path=str(p)) from None
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {line!r}", path=str(p), line=lineno)
            k, v = line.split("=", 1)
            _assign(values, explicit, k, v, path=str(p), line=lineno)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}", path="--set")
        k, v = item.split("=", 1)
        _assign(values, explicit, k, v, path="--set")
    config = Config(values, None if path is None else str(path), tuple(overrides), frozenset(explicit))
    config.to_setup()
    return config
