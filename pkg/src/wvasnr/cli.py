"""Command-line front end: ``wvasnr analytic|simulate|sweep|compare``."""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import analytics
from .config import describe_keys, parse_config, parse_quantity
from .errors import WvaError
from .experiments import (
    PARAMETERS,
    SweepSpec,
    format_csv,
    reference_sweep,
    run_sweep,
    scenario_small_interferometer,
)
from .montecarlo import WORKERS_ENV, RngSpec, run_trials
from .svg import sweep_svg

_SWEEP_UNITS = {
    "drive_mV": None,  # bare numbers are millivolts
    "beam_radius": "length",
    "detector_distance": "length",
    "power": "power",
}


class UsageError(Exception):
    pass


def _global_options(suppress=False):
    # subcommands get a copy without defaults so they do not clobber flags given before the command
    def default(value):
        return argparse.SUPPRESS if suppress else value

    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", default=default(None), help="config file of 'key = value' lines")
    g.add_argument(
        "--set", dest="overrides", action="append", default=default([]), metavar="KEY=VALUE",
        help="override one config key (repeatable), e.g. --set sigma=1.1mm",
    )
    g.add_argument("--seed", type=int, default=default(None),
                   help="Monte Carlo seed (unsigned 64-bit); overrides the config")
    g.add_argument("--out", metavar="PATH", default=default(None), help="output file (CSV/SVG); stdout when omitted")
    g.add_argument("--format", choices=("csv", "svg", "both"), default=default("csv"), help="sweep output format")
    return p


def build_parser():
    top = _global_options()
    common = _global_options(suppress=True)
    epilog = (
        "config keys (values take unit suffixes mm, um, nm, mW, uW, mV, us, deg, ...):\n"
        + describe_keys()
        + f"\n\nenvironment:\n  {WORKERS_ENV:<20} Monte Carlo worker processes (unset or 'auto' = CPU count)"
    )
    parser = argparse.ArgumentParser(
        prog="wvasnr",
        description="Split-detector SNR with and without interferometric weak-value amplification.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[top],
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    fmt = argparse.RawDescriptionHelpFormatter

    sub.add_parser("analytic", parents=[common], formatter_class=fmt, epilog=epilog,
                   help="closed-form SNR budget for the configured setup")

    sim = sub.add_parser("simulate", parents=[common], formatter_class=fmt, epilog=epilog,
                         help="Monte Carlo SNR of the standard and weak-value setups")
    sim.add_argument("--trials", type=int, help="trials per setup (>= 2); default from config")

    sw = sub.add_parser("sweep", parents=[common], formatter_class=fmt, epilog=epilog,
                        help="sweep one parameter, analytic and Monte Carlo")
    sw.add_argument("--param", required=True, choices=sorted(PARAMETERS), help="parameter to sweep")
    sw.add_argument("--from", dest="start", help="first value (unit suffix allowed; drive_mV in mV)")
    sw.add_argument("--to", dest="stop", help="last value")
    sw.add_argument("--steps", type=int, help="number of points (>= 2)")
    sw.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    sw.add_argument("--engines", default="analytic,montecarlo",
                    help="comma-separated subset of analytic,montecarlo")

    cmp_ = sub.add_parser("compare", parents=[common], formatter_class=fmt, epilog=epilog,
                          help="analytic vs Monte Carlo table for both setups and estimators")
    cmp_.add_argument("--trials", type=int, help="trials per row; default from config")
    return parser


def _load(args):
    config = parse_config(args.config, args.overrides)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise UsageError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        config = config.with_values(seed=args.seed)
    return config


def _trials(args, config):
    trials = config["trials"] if getattr(args, "trials", None) is None else args.trials
    if trials < 2:
        raise UsageError(f"--trials must be >= 2, got {trials}")
    return trials


def _emit(text, out, stdout):
    if out is None:
        stdout.write(text)
    else:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise WvaError(f"cannot write {out}: {exc.strerror or exc}") from None


def cmd_analytic(config, stdout=sys.stdout):
    setup = config.to_setup()
    defl = setup.deflection()
    budget = setup.budget()
    N = setup.detected_photons
    f = setup.factors()
    r_sd = setup.snr_sd()
    r_wva = setup.snr_wva()
    alpha_f = 2.0 * setup.k0 * setup.sigma**2 / setup.l_md
    # lens of focal length l_md focusing the beam onto the detector
    k_kick = setup.k0 * defl.beam_deflection
    focused = analytics.snr_focused(N, k_kick, setup.l_md, setup.k0, setup.l_md, setup.sigma)
    t = budget.integration_time
    gamma = setup.noise.eta_q * budget.rate
    u_sd = analytics.measurement_uncertainty_sd(defl.d, setup.sigma, gamma, t, setup.noise.S_xi)
    u_wva = analytics.measurement_uncertainty_wva(defl.d, setup.sigma, gamma, t, setup.noise.S_xi, f)

    w = stdout.write
    w("[photon budget]         N = P tau / E_photon      = %.6g photons (E_photon = %.6g J, rate %.6g /s)\n"
      % (N, budget.photon_energy, gamma))
    w("[deflection chain]      tilt = %.6g rad, dtheta = %.6g rad, d = l_md dtheta = %.6g m\n"
      % (defl.mirror_tilt, defl.beam_deflection, defl.d))
    w("[weak-value factors]    A = %.6g, P_ps = sin^2(phi/2) = %.6g, alpha = %.6g\n" % (f.A, f.P_ps, f.alpha))
    w("[weak-value factors]    amplified deflection A d = %.6g m, post-selected photons = %.6g\n" % (f.d_a, f.N_a))
    w("[split-detector SNR]    R_sd  = sqrt(2/pi) sqrt(N) d / sigma = %.6g\n" % r_sd)
    label = "alpha R_sd" if setup.geometry == "collimated" else "C (sigma + a l_md / l_lm)"
    w("[weak-value SNR]        R_wva = %s = %.6g  (%s beam)\n" % (label, r_wva, setup.geometry))
    w("[focused-lens SNR]      alpha_f = 2 k0 sigma^2 / l_md = %.6g, R_f = %.6g\n" % (alpha_f, focused.snr))
    w("[centroid noise, SD]    d = %.6g m +- %.6g m (shot) +- %.6g m (technical)\n"
      % (u_sd.estimate, u_sd.shot_term, u_sd.technical_term))
    w("[centroid noise, WVA]   (1/sqrt(P_ps)) (%.6g m +- %.6g m (shot) +- %.6g m (technical))\n"
      % (u_wva.signal, u_wva.shot_term, u_wva.technical_term))
    if setup.noise.saturation_power is not None:
        r_sd_max, r_wva_max = analytics.saturation_limited_snr(
            setup.power, setup.noise.saturation_power, setup.tau, setup.wavelength, defl.d, setup.sigma, f
        )
        w("[saturation budget]     R_sd_max = %.6g, R_wva_max = %.6g\n" % (r_sd_max, r_wva_max))
    if abs(f.alpha) < 1e-12 * max(abs(f.A), 1.0) or math.isclose(f.P_ps, 1.0):
        stdout.write("warning: phi/2 = 90 deg makes alpha = 0; weak values give no SNR gain here\n")
    return f


def _analytic_for(setup, branch, estimator):
    if estimator == "split":
        return setup.snr_sd() if branch == "SD" else setup.snr_wva()
    # centroid readout has no sqrt(2/pi) split-detector factor
    scale = math.sqrt(math.pi / 2.0)
    return scale * (setup.snr_sd() if branch == "SD" else setup.snr_wva())


_SIM_HEADER = "setup,estimator,mode,trials,snr_analytic,snr_mc,snr_mc_se,z_score"


def _simulate_rows(setup, trials, seed, estimators):
    rows = []
    rng = RngSpec(seed)
    for j, estimator in enumerate(estimators):
        s = replace(setup, estimator=estimator)
        for i, (branch, scenario) in enumerate((("SD", s.sd_scenario()), ("WVA", s.wva_scenario()))):
            est = run_trials(scenario, trials, rng.child(j, i))
            analytic = _analytic_for(s, branch, estimator)
            rows.append((branch, estimator, s.mode, trials, analytic, est))
    return rows


def _rows_csv(rows):
    lines = [_SIM_HEADER]
    for branch, estimator, mode, trials, analytic, est in rows:
        lines.append(
            f"{branch},{estimator},{mode},{trials},{analytic:.8e},{est.snr:.8e},{est.std_error:.8e},"
            f"{est.z_score(analytic):.8e}"
        )
    return "\n".join(lines) + "\n"


def _print_rows(rows, stdout, title):
    stdout.write(title + "\n")
    stdout.write(f"{'setup':<5} {'estimator':<9} {'analytic':>12} {'monte carlo':>12} {'std err':>10} {'z':>7}\n")
    for branch, estimator, _, _, analytic, est in rows:
        stdout.write(
            f"{branch:<5} {estimator:<9} {analytic:>12.6g} {est.snr:>12.6g} {est.std_error:>10.3g} "
            f"{est.z_score(analytic):>7.2f}\n"
        )


def cmd_simulate(config, trials, out=None, stdout=sys.stdout):
    setup = config.to_setup()
    rows = _simulate_rows(setup, trials, config["seed"], (setup.estimator,))
    _print_rows(rows, stdout, f"# {trials} trials, seed {config['seed']}, mode {setup.mode}")
    sd, wva = rows[0][5], rows[1][5]
    ratio = wva.snr / sd.snr if sd.snr else math.nan
    stdout.write(f"WVA/SD empirical SNR ratio = {ratio:.6g} (alpha = {setup.factors().alpha:.6g})\n")
    if setup.noise.S_xi > 0 and setup.estimator == "split":
        stdout.write("note: split analytic values are quantum-limited and exclude technical noise\n")
    if out is not None:
        _emit(_rows_csv(rows), out, stdout)
    return rows


def cmd_compare(config, trials, out=None, stdout=sys.stdout):
    setup = config.to_setup()
    rows = _simulate_rows(setup, trials, config["seed"], ("split", "centroid"))
    _print_rows(rows, stdout, f"# analytic vs Monte Carlo, {trials} trials, seed {config['seed']}")
    if out is not None:
        _emit(_rows_csv(rows), out, stdout)
    return rows


def _sweep_value(param, text):
    unit = _SWEEP_UNITS[param]
    if unit is None:
        return parse_quantity(text, "voltage") * 1e3 if text.strip().endswith("V") else float(text)
    return parse_quantity(text, unit)


def cmd_sweep(config, param, start=None, stop=None, steps=None, trials=None, engines=("analytic", "montecarlo"),
              out=None, fmt="csv", stdout=sys.stdout):
    setup = config.to_setup()
    trials = config["trials"] if trials is None else trials
    spec = reference_sweep(param, setup, engines=engines, trials=trials, seed=config["seed"])
    if param == "beam_radius" and "l_md" in config.explicit:
        spec = replace(spec, setup=replace(spec.setup, l_md=setup.l_md))
    try:
        spec = SweepSpec(
            param,
            spec.start if start is None else _sweep_value(param, start),
            spec.stop if stop is None else _sweep_value(param, stop),
            spec.steps if steps is None else steps,
            spec.setup,
            engines,
            trials,
            config["seed"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = run_sweep(spec)
    if fmt in ("csv", "both"):
        target = out if fmt == "csv" or out is None else str(Path(out).with_suffix(".csv"))
        _emit(format_csv(result), target, stdout)
    if fmt in ("svg", "both"):
        target = out if fmt == "svg" or out is None else str(Path(out).with_suffix(".svg"))
        _emit(sweep_svg(result), target, stdout)
    # summaries go to stderr so stdout stays pure CSV/SVG
    for (branch, source), fit in sorted(result.fits.items()):
        sys.stderr.write(
            f"fit {branch}/{source}: model={fit.model} slope={fit.slope:.6g} intercept={fit.intercept:.6g} "
            f"residual={fit.residual_norm:.3g}\n"
        )
    for key, value in sorted(result.extras.items()):
        sys.stderr.write(f"{key} = {value:.6g}\n")
    for note in result.annotations:
        sys.stderr.write(f"measured value (annotation only, not a target): {note}\n")
    return result


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load(args)
        if args.command == "analytic":
            cmd_analytic(config, stdout)
            small = scenario_small_interferometer(k0=config["k0"], tau=config["tau"])
            stdout.write(
                "[small interferometer]  phi/2 = %.4g deg, P_ps = %.4g, alpha = %.4g (predicted 260, measured 150)\n"
                % (small.phi_half_deg, small.P_ps, small.alpha)
            )
        elif args.command == "simulate":
            cmd_simulate(config, _trials(args, config), args.out, stdout)
        elif args.command == "compare":
            cmd_compare(config, _trials(args, config), args.out, stdout)
        elif args.command == "sweep":
            engines = tuple(e.strip() for e in args.engines.split(",") if e.strip())
            if args.steps is not None and args.steps < 2:
                raise UsageError(f"--steps must be >= 2, got {args.steps}")
            if "montecarlo" in engines:
                _trials(args, config)
            if args.format == "both" and args.out is None:
                raise UsageError("--format both needs --out")
            cmd_sweep(config, args.param, args.start, args.stop, args.steps, args.trials, engines,
                      args.out, args.format, stdout)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"wvasnr: error: {exc}\n")
        return 2
    except (WvaError, ValueError, OSError) as exc:
        sys.stderr.write(f"wvasnr: error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
