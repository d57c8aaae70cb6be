import io
import math
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from wvasnr.cli import cmd_analytic, main
from wvasnr.config import KEYS, parse_config, parse_quantity
from wvasnr.errors import ConfigError


def run(argv, monkeypatch=None, workers=None):
    if monkeypatch is not None and workers is not None:
        monkeypatch.setenv("WVASNR_WORKERS", str(workers))
    out = io.StringIO()
    code = main(argv, stdout=out)
    return code, out.getvalue()


# --- config ---------------------------------------------------------------------

def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    cfg = parse_config(p)
    assert cfg["sigma"] == 1.7e-3
    assert cfg["wavelength"] == 780e-9
    assert cfg["phi"] == pytest.approx(2 * math.radians(25), rel=1e-15)
    assert cfg["l_md"] == 0.14
    assert cfg["power"] == 1.32e-3
    assert cfg["tau"] == 10.5e-6
    assert cfg["drive"] == pytest.approx(12.8e-3, rel=1e-15)
    assert parse_config().values == cfg.values


def test_phi_half_deg(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("phi_half_deg = 25\n")
    assert parse_config(p)["phi"] == pytest.approx(0.8727, abs=1e-4)


def test_units_and_comments(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# beam\nsigma = 1.1mm   # detector radius\npower=390 uW\ndrive = 5mV\nphi = 50 deg\ntau=1us\n\n")
    cfg = parse_config(p)
    assert cfg["sigma"] == pytest.approx(1.1e-3, rel=1e-15)
    assert cfg["power"] == pytest.approx(390e-6, rel=1e-15)
    assert cfg["drive"] == pytest.approx(5e-3, rel=1e-15)
    assert cfg["phi"] == pytest.approx(math.radians(50), rel=1e-15)
    assert cfg["tau"] == pytest.approx(1e-6, rel=1e-15)
    assert cfg.explicit == {"sigma", "power", "drive", "phi", "tau"}


def test_negative_sigma_names_key_and_invariant():
    with pytest.raises(ConfigError) as exc:
        parse_config(overrides=["sigma=-1mm"])
    assert "sigma" in str(exc.value) and "positivity" in str(exc.value)


def test_unknown_key_reports_line(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("sigma = 1mm\nbogus = 3\n")
    with pytest.raises(ConfigError) as exc:
        parse_config(p)
    assert "line 2" in str(exc.value) and "bogus" in str(exc.value)


@pytest.mark.parametrize("text,fragment", [
    ("sigma 1mm\n", "line 1"),
    ("sigma = 1 kg\n", "unit"),
    ("trials = 1\n", "trials"),
    ("mode = fast\n", "mode"),
    ("phi = 0\n", "phi"),
    ("eta_q = 2\n", "eta_q"),
    ("k0 = 1e6\n", "k0"),
])
def test_config_errors(tmp_path, text, fragment):
    p = tmp_path / "c.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError, match=fragment):
        parse_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="nope.cfg"):
        parse_config(tmp_path / "nope.cfg")


def test_dump_reparse_idempotent(tmp_path):
    cfg = parse_config(overrides=["sigma=1.234mm", "phi_half_deg=31", "saturation_power=2mW", "S_xi=1e-9"])
    p = tmp_path / "dump.cfg"
    p.write_text(cfg.dump())
    again = parse_config(p)
    assert again.values == cfg.values
    assert again.dump() == cfg.dump()


def test_parse_quantity():
    assert parse_quantity("1.7mm", "length") == pytest.approx(1.7e-3, rel=1e-15)
    assert parse_quantity("  2e-3 ", "length") == 2e-3
    assert parse_quantity("25 deg", "angle") == pytest.approx(math.radians(25), rel=1e-15)
    with pytest.raises(ValueError):
        parse_quantity("abc", "length")


# --- analytic -----------------------------------------------------------------------

def test_cmd_analytic_defaults():
    out = io.StringIO()
    f = cmd_analytic(parse_config(), out)
    text = out.getvalue()
    assert abs(f.alpha / 300 - 1) < 0.02
    assert "alpha = 299.341" in text
    assert "P_ps = sin^2(phi/2) = 0.178606" in text
    for label in ("[photon budget]", "[split-detector SNR]", "[weak-value SNR]", "[focused-lens SNR]",
                  "[centroid noise, SD]", "[centroid noise, WVA]"):
        assert label in text
    assert "warning" not in text


def test_cmd_analytic_bright_port_warns():
    out = io.StringIO()
    f = cmd_analytic(parse_config(overrides=["phi_half_deg=90"]), out)
    assert f.alpha == pytest.approx(0.0, abs=1e-9)
    assert "no SNR gain" in out.getvalue()


def test_cmd_analytic_saturation_line():
    code, text = run(["--set", "saturation_power=0.1mW", "analytic"])
    assert code == 0 and "[saturation budget]" in text


# --- main / exit codes ---------------------------------------------------------------

def test_help_lists_flags_and_keys(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--set", "--seed", "--out", "--format", "WVASNR_WORKERS"):
        assert flag in text
    for key in KEYS:
        assert key in text
    for cmd in ("analytic", "simulate", "sweep", "compare"):
        assert cmd in text
    with pytest.raises(SystemExit):
        main(["sweep", "--help"])
    text = capsys.readouterr().out
    for flag in ("--param", "--from", "--to", "--steps", "--trials", "--engines", "--seed", "--format"):
        assert flag in text


def test_trials_one_is_usage_error(capsys):
    code, _ = run(["simulate", "--trials", "1"])
    assert code == 2
    err = capsys.readouterr().err
    assert "usage" in err and "trials" in err


def test_bad_config_exit_code(capsys):
    code, _ = run(["--set", "sigma=-1mm", "analytic"])
    assert code == 1
    assert "sigma" in capsys.readouterr().err


def test_unknown_subcommand_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_unwritable_out(tmp_path, capsys):
    code, _ = run(["--out", str(tmp_path / "no" / "x.csv"), "sweep", "--param", "power", "--engines", "analytic"])
    assert code == 1
    assert "x.csv" in capsys.readouterr().err


def test_global_flags_either_side():
    a = run(["--seed", "5", "--set", "trials=50", "compare"])[1]
    b = run(["compare", "--seed", "5", "--set", "trials=50"])[1]
    assert a == b and "seed 5" in a


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wvasnr", "analytic"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "alpha = 299.341" in proc.stdout


# --- simulate / compare ----------------------------------------------------------------

def test_simulate_ratio_and_csv(tmp_path):
    out = tmp_path / "sim.csv"
    code, text = run(["--seed", "42", "--out", str(out), "simulate", "--trials", "1000"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "setup,estimator,mode,trials,snr_analytic,snr_mc,snr_mc_se,z_score"
    sd, wva = (float(l.split(",")[5]) for l in lines[1:3])
    assert abs((wva / sd) / 299.341 - 1) < 0.05
    assert "WVA/SD empirical SNR ratio" in text


def test_compare_rows():
    code, text = run(["--set", "trials=200", "compare"])
    assert code == 0
    body = [l for l in text.splitlines() if l.startswith(("SD", "WVA"))]
    assert len(body) == 4
    assert all(abs(float(l.split()[-1])) < 4 for l in body)


# --- sweep -------------------------------------------------------------------------------

def test_sweep_drive_csv(tmp_path):
    out = tmp_path / "d.csv"
    code, _ = run(["--out", str(out), "sweep", "--param", "drive_mV", "--from", "0", "--to", "100",
                   "--steps", "11", "--engines", "analytic"])
    assert code == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 12
    values = [[float(c) for c in r.split(",")[1:4]] for r in rows[1:]]
    assert values[0][1:] == [0.0, 0.0]
    slope = values[-1][1] / values[-1][0]
    for v, sd, wva in values[1:]:
        assert sd / v == pytest.approx(slope, rel=1e-8)
        assert wva / sd == pytest.approx(299.341, rel=1e-5)


def test_sweep_beam_radius_units(tmp_path):
    out = tmp_path / "r.csv"
    code, _ = run(["--out", str(out), "sweep", "--param", "beam_radius", "--from", "0.38mm", "--to", "1.1mm",
                   "--steps", "5", "--engines", "analytic"])
    assert code == 0
    rows = [r.split(",") for r in out.read_text().splitlines()[1:]]
    assert float(rows[0][1]) == pytest.approx(0.38e-3, rel=1e-8)
    assert float(rows[0][2]) / float(rows[-1][2]) == pytest.approx(1.1 / 0.38, rel=1e-8)
    assert float(rows[-1][3]) / float(rows[0][3]) == pytest.approx(2.15 / 1.43, rel=1e-8)


def test_sweep_detector_distance_constant(tmp_path):
    code, text = run(["sweep", "--param", "detector_distance", "--engines", "analytic"])
    assert code == 0
    wva = {r.split(",")[3] for r in text.splitlines()[1:]}
    assert len(wva) == 1


def test_sweep_svg_is_xml(tmp_path):
    base = tmp_path / "p"
    code, _ = run(["--out", str(base), "--format", "both", "--set", "trials=50", "sweep", "--param", "power",
                   "--steps", "3"])
    assert code == 0
    root = ET.parse(base.with_suffix(".svg")).getroot()
    assert root.tag.endswith("svg")
    assert len(root.findall(".//{http://www.w3.org/2000/svg}circle")) == 6
    assert base.with_suffix(".csv").read_text().startswith("param,")


@pytest.mark.parametrize("argv", [
    ["sweep", "--param", "power", "--steps", "1"],
    ["sweep", "--param", "power", "--from", "2mW", "--to", "1mW"],
    ["--format", "both", "sweep", "--param", "power"],
])
def test_sweep_usage_errors(argv):
    assert run(argv)[0] == 2


# --- determinism (repeat runs and worker counts) --------------------------------------

def test_simulate_deterministic(monkeypatch):
    argv = ["--seed", "42", "simulate", "--trials", "2500"]
    outputs = {run(argv, monkeypatch, w)[1] for w in (1, 1, 3)}
    assert len(outputs) == 1


def test_sweep_deterministic(monkeypatch, tmp_path):
    blobs = set()
    for i, w in enumerate((1, 1, 2)):
        out = tmp_path / f"s{i}.csv"
        argv = ["--seed", "7", "--out", str(out), "sweep", "--param", "drive_mV", "--steps", "4", "--trials", "1500"]
        assert run(argv, monkeypatch, w)[0] == 0
        blobs.add(out.read_bytes())
    assert len(blobs) == 1
