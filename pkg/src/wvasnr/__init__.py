"""Split-detector beam-deflection SNR with interferometric weak-value amplification.

Submodules
----------
optics       beam, piezo mirror and exact Sagnac dark-port model
analytics    closed-form SNR, weak-value factors and noise budget
montecarlo   photon-counting simulator used to check the closed forms
experiments  parameter sweeps and CSV output
config, cli  command-line front end
"""
from .analytics import (
    NoiseModel,
    PhotonBudget,
    WeakValueFactors,
    photons_from_power,
    snr_diverging,
    snr_focused,
    snr_sd,
    snr_wva,
    weak_value_factors,
)
from .errors import (
    ConfigError,
    DegenerateDarkPortError,
    InvalidParameterError,
    NoSignalError,
    TractabilityError,
    WvaError,
)
from .experiments import Setup, SweepSpec, reference_sweep, run_sweep, scenario_small_interferometer
from .montecarlo import RngSpec, Scenario, SnrEstimate, run_trials
from .optics import TransverseDistribution, dark_port_moments

__version__ = "0.1.0"
