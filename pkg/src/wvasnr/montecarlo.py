"""Monte Carlo photon counting on a split detector.

Each trial simulates one integration window: photons arrive with Poisson
statistics, land according to a `TransverseDistribution`, and are read out
either by a split detector or by a centroid estimator. White technical noise
can be added to the inferred position. The empirical SNR over trials is the
quantity compared against the closed-form predictions in `analytics`.

Every trial draws from its own counter-based Philox stream keyed by
``(seed, stream path, trial index)``, so results are bit-identical whatever
the number of worker processes.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analytics import NoiseModel, PhotonBudget
from .errors import InvalidParameterError, NoSignalError, TractabilityError
from .optics import TransverseDistribution

__all__ = [
    "MODES",
    "ESTIMATORS",
    "MAX_PER_PHOTON_COUNT",
    "WORKERS_ENV",
    "RngSpec",
    "Scenario",
    "SnrEstimate",
    "SuppressionResult",
    "build_distribution",
    "sample_positions",
    "split_counts",
    "estimate_deflection",
    "simulate_signals",
    "summarize",
    "run_trials",
    "technical_noise_suppression_check",
    "resolve_workers",
]

MODES = ("poisson", "per_photon")
ESTIMATORS = ("split", "centroid")
MAX_PER_PHOTON_COUNT = 1e7
WORKERS_ENV = "WVASNR_WORKERS"

# Trials are handed to workers in fixed blocks; block boundaries never affect results.
_CHUNK = 1024
_COUNTS, _TECHNICAL = 0, 1
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)


@dataclass(frozen=True)
class RngSpec:
    """Seed plus a stream path identifying an independent family of trials."""

    seed: int
    stream: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "stream", tuple(int(s) for s in self.stream))

    def child(self, *path):
        return RngSpec(self.seed, self.stream + tuple(path))

    def key(self):
        return np.random.SeedSequence(int(self.seed), spawn_key=self.stream).generate_state(2, np.uint64)

    def trial_generator(self, trial, purpose=_COUNTS, key=None):
        key = self.key() if key is None else key
        return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, purpose, trial]))


@dataclass(frozen=True, eq=False)
class Scenario:
    """One detection setup to be simulated.

    ``post_selection_mass`` scales the photon budget before detection; it
    defaults to the distribution's own mass (1 for a plain beam, the
    post-selection probability for a dark port).
    """

    distribution: TransverseDistribution
    photon_budget: PhotonBudget
    noise: NoiseModel = field(default_factory=NoiseModel)
    mode: str = "poisson"
    estimator: str = "split"
    post_selection_mass: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.estimator not in ESTIMATORS:
            raise InvalidParameterError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.post_selection_mass is None:
            object.__setattr__(self, "post_selection_mass", self.distribution.mass)
        if not 0.0 < self.post_selection_mass <= 1.0:
            raise InvalidParameterError(
                f"post_selection_mass must lie in (0, 1], got {self.post_selection_mass!r}"
            )
        if self.mode == "per_photon" and self.expected_count > MAX_PER_PHOTON_COUNT:
            raise TractabilityError(
                f"per-photon mode with {self.expected_count:.3g} expected photons per trial exceeds "
                f"the {MAX_PER_PHOTON_COUNT:.0e} limit; use mode='poisson'"
            )

    @property
    def expected_count(self):
        return self.photon_budget.N * self.noise.eta_q * self.post_selection_mass

    @property
    def technical_std(self):
        """Standard deviation of the technical noise averaged over one window."""
        return self.noise.S_xi / math.sqrt(self.photon_budget.integration_time)


@dataclass(frozen=True)
class SnrEstimate:
    snr: float
    std_error: float
    trials: int
    mean_signal: float
    signal_std: float
    estimator: str = "split"
    mode: str = "poisson"

    def z_score(self, expected):
        return (self.snr - expected) / self.std_error


def build_distribution(setup, sigma, *, d=0.0, phi=None, kappa=0.0):
    """Detector-plane distribution for the standard (``"SD"``) or weak-value (``"WVA"``) setup.

    SD gives a Gaussian of radius `sigma` centred at `d`. WVA gives the
    normalized dark-port profile for phase `phi` and kick `kappa`; its mass
    is the exact post-selection probability.
    """
    setup = setup.upper()
    if setup == "SD":
        return TransverseDistribution.gaussian(sigma, d)
    if setup == "WVA":
        if phi is None:
            raise InvalidParameterError("the WVA setup needs the interferometer phase phi")
        return TransverseDistribution.dark_port(sigma, phi, kappa)
    raise InvalidParameterError(f"setup must be 'SD' or 'WVA', got {setup!r}")


def sample_positions(dist: TransverseDistribution, n, rng):
    return dist.sample(n, rng)


def split_counts(dist: TransverseDistribution, expected_N, rng, mode="poisson"):
    """Photon counts ``(N_plus, N_minus)`` on the two detector halves.

    In ``"poisson"`` mode both halves are drawn directly as independent
    Poisson variates with means ``expected_N * p_plus`` and
    ``expected_N * p_minus``. In ``"per_photon"`` mode a Poisson total is
    drawn and every photon position is sampled; the two are equal in law.
    """
    if expected_N < 0:
        raise InvalidParameterError(f"expected_N must be >= 0, got {expected_N!r}")
    if mode == "poisson":
        p_plus, p_minus = dist.split_probabilities()
        return int(rng.poisson(expected_N * p_plus)), int(rng.poisson(expected_N * p_minus))
    if mode == "per_photon":
        x = dist.sample(rng.poisson(expected_N), rng)
        return int(np.count_nonzero(x > 0.0)), int(np.count_nonzero(x < 0.0))
    raise InvalidParameterError(f"mode must be one of {MODES}, got {mode!r}")


def estimate_deflection(N_plus, N_minus, sigma):
    """Invert the split-detector response of a Gaussian of radius `sigma`."""
    total = N_plus + N_minus
    if total <= 0:
        raise NoSignalError("no photons detected on either half")
    return _SQRT_HALF_PI * sigma * (N_plus - N_minus) / total


def _trial_signal(scenario, rng, key, trial, expected, p_plus, p_minus):
    dist = scenario.distribution
    gen = rng.trial_generator(trial, _COUNTS, key)
    if scenario.mode == "poisson":
        if scenario.estimator == "split":
            n_plus = int(gen.poisson(expected * p_plus))
            n_minus = int(gen.poisson(expected * p_minus))
            if n_plus + n_minus == 0:
                raise NoSignalError(f"trial {trial}: no photons detected")
            return estimate_deflection(n_plus, n_minus, dist.std)
        n = int(gen.poisson(expected))
        if n == 0:
            raise NoSignalError(f"trial {trial}: no photons detected")
        # sample mean of n photons; n is large whenever this mode is worth using
        return dist.mean + dist.std / math.sqrt(n) * gen.standard_normal()

    x = dist.sample(gen.poisson(expected), gen)
    if x.size == 0:
        raise NoSignalError(f"trial {trial}: no photons detected")
    if scenario.estimator == "split":
        return estimate_deflection(int(np.count_nonzero(x > 0.0)), int(np.count_nonzero(x < 0.0)), dist.std)
    return float(x.mean())


def _run_block(scenario, rng, start, stop, technical):
    key = rng.key()
    expected = scenario.expected_count
    p_plus, p_minus = scenario.distribution.split_probabilities()
    out = np.empty(stop - start)
    for i, trial in enumerate(range(start, stop)):
        out[i] = _trial_signal(scenario, rng, key, trial, expected, p_plus, p_minus)
    if technical and scenario.noise.S_xi > 0.0:
        scale = scenario.technical_std
        for i, trial in enumerate(range(start, stop)):
            out[i] += scale * rng.trial_generator(trial, _TECHNICAL, key).standard_normal()
    return out


def resolve_workers(workers=None):
    """Worker count from the argument, else ``$WVASNR_WORKERS``, else the CPU count."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "").strip().lower()
        if env in ("", "auto", "0"):
            return os.cpu_count() or 1
        try:
            workers = int(env)
        except ValueError:
            raise InvalidParameterError(f"{WORKERS_ENV} must be an integer or 'auto', got {env!r}") from None
    workers = int(workers)
    if workers < 1:
        raise InvalidParameterError(f"worker count must be >= 1, got {workers}")
    return workers


def simulate_signals(scenario: Scenario, trials, rng: RngSpec, *, workers=None, technical=True):
    """Per-trial inferred positions (m), ordered by trial index."""
    trials = int(trials)
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials}")
    blocks = [(s, min(s + _CHUNK, trials)) for s in range(0, trials, _CHUNK)]
    workers = min(resolve_workers(workers), len(blocks))
    if workers == 1:
        parts = [_run_block(scenario, rng, a, b, technical) for a, b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, scenario, rng, a, b, technical) for a, b in blocks]
            parts = [f.result() for f in futures]
    return np.concatenate(parts)


def summarize(signals, estimator="split", mode="poisson"):
    """SNR of a set of per-trial signals with a jackknife standard error."""
    x = np.asarray(signals, dtype=float)
    n = x.size
    if n < 2:
        raise InvalidParameterError(f"need at least 2 trials, got {n}")
    mean = float(x.mean())
    c = x - mean
    ss = float(c @ c)
    std = math.sqrt(ss / (n - 1))
    snr = mean / std if std > 0 else (0.0 if mean == 0 else math.copysign(math.inf, mean))
    if n >= 3 and std > 0:
        loo_mean = mean - c / (n - 1)
        loo_var = (ss - c * c * n / (n - 1)) / (n - 2)
        loo_snr = loo_mean / np.sqrt(loo_var)
        se = math.sqrt((n - 1) / n * float(np.sum((loo_snr - loo_snr.mean()) ** 2)))
    else:
        se = math.sqrt((1.0 + 0.5 * snr * snr) / n)
    return SnrEstimate(
        snr=snr, std_error=se, trials=n, mean_signal=mean, signal_std=std, estimator=estimator, mode=mode
    )


def run_trials(scenario: Scenario, trials, rng: RngSpec, *, workers=None):
    """Simulate `trials` integration windows and return the empirical SNR."""
    if int(trials) < 2:
        raise InvalidParameterError(f"trials must be >= 2, got {trials}")
    signals = simulate_signals(scenario, trials, rng, workers=workers)
    return summarize(signals, scenario.estimator, scenario.mode)


@dataclass(frozen=True)
class SuppressionResult:
    applicable: bool
    ratio: float = math.nan
    expected: float = math.nan
    std_error: float = math.nan
    wva_technical_variance: float = math.nan
    sd_technical_variance: float = math.nan


def _technical_variance(scenario, trials, rng, workers):
    # same count streams with and without noise, so the shot part cancels trial by trial
    noisy = simulate_signals(scenario, trials, rng, workers=workers)
    clean = simulate_signals(scenario, trials, rng, workers=workers, technical=False)
    return float(np.var(noisy, ddof=1) - np.var(clean, ddof=1))


def technical_noise_suppression_check(scenario: Scenario, S_xi, trials, rng: RngSpec, *, sd_scenario=None, workers=None):
    """Compare technical-noise variance behind the dark port with standard detection.

    `scenario` is the weak-value setup. Its position readout is rescaled by
    ``sqrt(P_ps)`` so that signals are comparable with standard detection;
    the technical variance of that rescaled readout relative to the
    standard-detection one is expected to equal ``P_ps``.

    `sd_scenario` defaults to an undeflected Gaussian of the same radius fed
    with the full photon budget.
    """
    S_xi = float(S_xi)
    if S_xi == 0.0:
        return SuppressionResult(applicable=False)
    if S_xi < 0.0 or not math.isfinite(S_xi):
        raise InvalidParameterError(f"S_xi must be a positive number, got {S_xi!r}")
    p_ps = scenario.post_selection_mass
    wva = replace(scenario, noise=replace(scenario.noise, S_xi=S_xi))
    if sd_scenario is None:
        sd_scenario = Scenario(
            TransverseDistribution.gaussian(scenario.distribution.sigma),
            scenario.photon_budget,
            scenario.noise,
            scenario.mode,
            scenario.estimator,
            post_selection_mass=1.0,
        )
    sd = replace(sd_scenario, noise=replace(sd_scenario.noise, S_xi=S_xi))

    shot = math.sqrt(0.5 * math.pi * wva.distribution.variance / wva.expected_count)
    technical = wva.technical_std
    if technical < 10.0 * shot:
        raise InvalidParameterError(
            f"technical noise ({technical:.3g} m) must exceed the shot noise ({shot:.3g} m) "
            "by at least 10x for this check"
        )

    var_wva = _technical_variance(wva, trials, rng.child(0), workers)
    var_sd = _technical_variance(sd, trials, rng.child(1), workers)
    ratio = p_ps * var_wva / var_sd
    # two independent sample variances, each with relative error sqrt(2/(n-1))
    se = ratio * 2.0 / math.sqrt(trials - 1)
    return SuppressionResult(
        applicable=True,
        ratio=ratio,
        expected=p_ps,
        std_error=se,
        wva_technical_variance=var_wva,
        sd_technical_variance=var_sd,
    )
