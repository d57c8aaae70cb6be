import math
from dataclasses import replace

import numpy as np
import pytest

from wvasnr.errors import InvalidParameterError
from wvasnr.experiments import (
    CSV_HEADER,
    Setup,
    SweepSpec,
    fit_trend,
    format_csv,
    reference_sweep,
    run_sweep,
    scenario_small_interferometer,
    sweep_beam_radius,
    sweep_detector_distance,
    sweep_drive_voltage,
    write_csv,
)

ANALYTIC = ("analytic",)


@pytest.fixture(scope="module")
def drive_sweep():
    return run_sweep(reference_sweep("drive_mV", trials=1000, seed=1))


@pytest.fixture(scope="module")
def radius_sweep():
    return run_sweep(reference_sweep("beam_radius", trials=1000, seed=2))


@pytest.fixture(scope="module")
def distance_sweep():
    return run_sweep(reference_sweep("detector_distance", trials=1000, seed=3))


@pytest.fixture(scope="module")
def power_sweep():
    return run_sweep(reference_sweep("power", trials=1000, seed=4))


def _mc_agrees(result):
    for r in result.rows:
        for branch in ("sd", "wva"):
            est = getattr(r, f"{branch}_mc")
            analytic = getattr(r, f"snr_{branch}_analytic")
            assert abs(est.snr - analytic) <= 3 * est.std_error, (branch, r.value)


# --- setup -------------------------------------------------------------------------

def test_setup_defaults():
    s = Setup()
    assert s.deflection().d == pytest.approx(1.30048e-8, rel=1e-5)
    assert s.detected_photons == pytest.approx(5.4423e10, rel=1e-4)
    assert s.snr_sd() == pytest.approx(1.4239, rel=1e-4)
    assert s.snr_wva() == pytest.approx(426.24, rel=1e-4)
    assert s.factors().alpha == pytest.approx(299.34, rel=1e-4)


def test_setup_rejects_geometry():
    with pytest.raises(InvalidParameterError):
        Setup(geometry="spherical")


def test_kick_scale():
    assert Setup().kick_scale == 1.0
    # with a = sigma the lens leaves the amplification unchanged
    assert Setup(geometry="diverging", lens_radius=1.7e-3).kick_scale == pytest.approx(1.0, rel=1e-15)


# --- sweep spec ------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(steps=1), dict(start=1.0, stop=1.0), dict(start=2.0, stop=1.0),
                                dict(parameter="colour"), dict(engines=()), dict(engines=("x",)), dict(trials=1)])
def test_sweep_spec_guards(kw):
    args = dict(parameter="drive_mV", start=0.0, stop=10.0, steps=3) | kw
    with pytest.raises(InvalidParameterError):
        SweepSpec(**args)


def test_sweep_spec_invalid_point():
    with pytest.raises(InvalidParameterError):
        SweepSpec("beam_radius", -1e-3, 1e-3, 3)


def test_sweep_dispatch_checks_parameter():
    with pytest.raises(InvalidParameterError):
        sweep_drive_voltage(SweepSpec("power", 1e-3, 2e-3, 2, engines=ANALYTIC))


# --- drive voltage ---------------------------------------------------------------

def test_drive_sweep_rows(drive_sweep):
    assert len(drive_sweep.rows) == 11
    first = drive_sweep.rows[0]
    assert first.value == 0.0 and first.snr_sd_analytic == 0.0 and first.snr_wva_analytic == 0.0


def test_drive_sweep_slopes(drive_sweep):
    alpha = Setup().factors().alpha
    assert drive_sweep.extras["slope_ratio_analytic"] == pytest.approx(alpha, rel=1e-12)
    assert abs(drive_sweep.extras["slope_ratio_analytic"] / 300 - 1) < 0.02
    for branch in ("sd", "wva"):
        fit = drive_sweep.fits[(branch, "analytic")]
        assert fit.residual_norm < 1e-9
        mc = drive_sweep.fits[(branch, "mc")]
        assert abs(mc.slope - fit.slope) <= 3 * mc.slope_se


def test_drive_sweep_mc(drive_sweep):
    _mc_agrees(drive_sweep)


# --- beam radius -------------------------------------------------------------------

def test_radius_sweep_needs_diverging():
    with pytest.raises(InvalidParameterError):
        sweep_beam_radius(SweepSpec("beam_radius", 1e-3, 2e-3, 3, engines=ANALYTIC))


def test_radius_sweep_ratios(radius_sweep):
    rows = radius_sweep.rows
    assert rows[0].snr_sd_analytic / rows[-1].snr_sd_analytic == pytest.approx(1.1 / 0.38, rel=1e-12)
    assert rows[-1].snr_wva_analytic / rows[0].snr_wva_analytic == pytest.approx(2.15 / 1.43, rel=1e-12)
    assert rows[-1].snr_wva_analytic / rows[0].snr_wva_analytic == pytest.approx(1.503, abs=5e-4)


def test_radius_sweep_fit(radius_sweep):
    ex = radius_sweep.extras
    assert ex["expected_intercept_over_slope"] == pytest.approx(1.05e-3, rel=1e-12)
    assert abs(ex["intercept_over_slope_analytic"] / ex["expected_intercept_over_slope"] - 1) < 1e-9
    assert radius_sweep.fits[("sd", "analytic")].residual_norm < 1e-12
    assert radius_sweep.fits[("wva", "analytic")].residual_norm < 1e-12


def test_radius_sweep_mc(radius_sweep):
    _mc_agrees(radius_sweep)


# --- detector distance -----------------------------------------------------------

def test_distance_sweep_wva_constant():
    spec = SweepSpec("detector_distance", 0.05, 0.5, 2, engines=ANALYTIC)
    values = [spec.setup_at(l).snr_wva() for l in (0.05, 0.14, 0.5)]
    for v in values[1:]:
        assert abs(v / values[0] - 1) < 1e-12


def test_distance_sweep_sd_doubles():
    spec = SweepSpec("detector_distance", 0.05, 0.5, 2, engines=ANALYTIC)
    assert spec.setup_at(0.28).snr_sd() / spec.setup_at(0.14).snr_sd() == pytest.approx(2.0, rel=1e-12)


def test_distance_sweep(distance_sweep):
    wva = np.array([r.snr_wva_analytic for r in distance_sweep.rows])
    np.testing.assert_allclose(wva, wva[0], rtol=1e-12)
    assert distance_sweep.fits[("sd", "analytic")].residual_norm < 1e-12
    mc = [r.wva_mc for r in distance_sweep.rows]
    for a in mc:
        for b in mc:
            assert abs(a.snr - b.snr) <= 3 * math.hypot(a.std_error, b.std_error)
    _mc_agrees(distance_sweep)


# --- power ---------------------------------------------------------------------------

def test_power_sweep(power_sweep):
    assert power_sweep.fits[("sd", "analytic")].residual_norm < 1e-12
    assert power_sweep.fits[("wva", "analytic")].residual_norm < 1e-12
    _mc_agrees(power_sweep)


# --- fits ------------------------------------------------------------------------------

@pytest.mark.parametrize("model,f", [
    ("linear0", lambda x: 3.0 * x),
    ("linear", lambda x: 3.0 * x + 2.0),
    ("inverse", lambda x: 3.0 / x),
    ("sqrt", lambda x: 3.0 * np.sqrt(x)),
])
def test_fit_trend_recovers_exact(model, f):
    x = np.linspace(0.5, 4.0, 8)
    fit = fit_trend(model, x, f(x))
    assert fit.slope == pytest.approx(3.0, rel=1e-12)
    assert fit.residual_norm < 1e-13


def test_fit_trend_constant():
    fit = fit_trend("constant", [1.0, 2.0, 3.0], [5.0, 5.0, 5.0])
    assert fit.intercept == pytest.approx(5.0) and fit.slope == 0.0


def test_fit_trend_unknown():
    with pytest.raises(InvalidParameterError):
        fit_trend("cubic", [1.0, 2.0], [1.0, 2.0])


# --- small interferometer -------------------------------------------------------------

def test_small_interferometer_phase_and_alpha():
    rep = scenario_small_interferometer()
    assert rep.P_ps == pytest.approx(390 / 2900, rel=1e-12)
    assert rep.P_ps == pytest.approx(0.1345, abs=1e-4)
    assert rep.phi_half_deg == pytest.approx(21.513, abs=1e-3)
    assert rep.alpha == pytest.approx(256.06, rel=1e-4)
    assert abs(rep.alpha / 260 - 1) < 0.05
    assert rep.alpha_predicted_reference == 260 and rep.alpha_measured_reference == 150


def test_small_interferometer_unity_point():
    rep = scenario_small_interferometer()
    at_unity = scenario_small_interferometer(drive_mV=rep.unity_snr_drive_mV)
    assert at_unity.snr_wva_ideal == pytest.approx(1.0, rel=1e-12)
    assert rep.unity_snr_deflection == pytest.approx(rep.d / rep.snr_wva_ideal, rel=1e-12)


def test_small_interferometer_rejects_power_ratio():
    with pytest.raises(InvalidParameterError):
        scenario_small_interferometer(output_power=3e-3)


# --- CSV -------------------------------------------------------------------------------

def test_csv_header_golden():
    spec = SweepSpec("drive_mV", 0.0, 10.0, 2, engines=ANALYTIC)
    text = format_csv(run_sweep(spec))
    lines = text.split("\n")
    assert lines[0] == "param,value_si,snr_sd_analytic,snr_wva_analytic,snr_sd_mc,snr_sd_mc_se,snr_wva_mc,snr_wva_mc_se"
    assert tuple(lines[0].split(",")) == CSV_HEADER
    assert lines[1] == "drive_mV,0.00000000e+00,0.00000000e+00,0.00000000e+00,,,,"
    assert text.endswith("\n") and "\r" not in text
    cells = lines[2].split(",")
    assert len(cells) == 8
    assert cells[2] == f"{Setup(drive_mV=10.0).snr_sd():.8e}"


def test_csv_byte_identical(tmp_path):
    spec = SweepSpec("power", 0.5e-3, 1.5e-3, 3, trials=200, seed=9)
    a = write_csv(run_sweep(spec), tmp_path / "a.csv").read_bytes()
    b = write_csv(run_sweep(spec), tmp_path / "b.csv").read_bytes()
    assert a == b
    assert len(a.decode().splitlines()) == 4


def test_csv_io_error_has_path(tmp_path):
    spec = SweepSpec("power", 0.5e-3, 1.5e-3, 2, engines=ANALYTIC)
    target = tmp_path / "missing" / "x.csv"
    with pytest.raises(OSError, match="missing"):
        write_csv(run_sweep(spec), target)


def test_annotations_present(drive_sweep):
    assert any("39" in a for a in drive_sweep.annotations)
