import json
from pathlib import Path

import pytest

from spotlab.cli import main

SMALL_CONFIG = """\
# narrow, cheap configuration for CLI tests
scan.start_mhz = -600
scan.stop_mhz = 120
scan.coarse_step_mhz = 25
scan.fine_step_mhz = 5
scan.fine_halfwidth_mhz = 60
scan.atoms_per_frame = 20000
satspec.atoms = 5000
"""


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CONFIG)
    return str(path)


def test_isotopes_csv(capsys):
    assert main(["isotopes"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert len(lines) == 11  # header + 10 catalog lines
    assert lines[0].startswith("mass_number")


def test_isotopes_json(capsys):
    assert main(["isotopes", "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["lines"]) == 10


def test_beam_dump(tmp_path, capsys):
    out = tmp_path / "beam.csv"
    assert main(["beam", "--n", "500", "--dump", "--seed", "3",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config_sha256=")
    assert lines[1] == "isotope,x,y,z,vx,vy,vz"
    assert len(lines) == 2 + 500


def test_render_artifacts(tmp_path):
    assert main(["render", "--detuning", "0", "--atoms", "5000",
                 "--seed", "5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "frame.pgm").read_text().startswith("P2\n")
    assert (tmp_path / "centroids.csv").exists()
    payload = json.loads((tmp_path / "alignment.json").read_text())
    assert "perp_residual_m" in payload
    assert payload["_provenance"]["seed"] == 5


def test_scan_artifact(tmp_path):
    out = tmp_path / "scan.csv"
    assert main(["scan", "--start", "-20", "--stop", "20", "--step", "5",
                 "--atoms", "5000", "--seed", "6", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 + 9  # provenance + header + points


def test_fit_doppler_synthesize(tmp_path, capsys):
    assert main(["fit-doppler", "--synthesize", "--v", "260",
                 "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "doppler_fit.json").read_text())
    assert payload["v_mean_m_s"] == pytest.approx(260.0, abs=1e-6)
    points = (tmp_path / "doppler_points.csv").read_text().splitlines()
    assert len(points) == 2 + 8
    curve = (tmp_path / "doppler_curve.csv").read_text().splitlines()
    assert len(curve) == 2 + 101  # 40..140 deg at 1 deg steps


def test_fit_doppler_from_file(tmp_path):
    points = tmp_path / "points.csv"
    import math

    rows = ["theta_deg,f_hz,sigma_hz"]
    for theta in (63, 80, 100, 117):
        f = 751.52665e12 * (1 + 230.0 / 299792458.0 * math.cos(math.radians(theta)))
        rows.append(f"{theta},{f:.3f},60e6")
    points.write_text("\n".join(rows))
    assert main(["fit-doppler", "--in", str(points), "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "doppler_fit.json").read_text())
    assert payload["v_mean_m_s"] == pytest.approx(230.0, abs=1e-3)


def test_satspec_cmd(tmp_path, cfg_file):
    assert main(["--config", cfg_file, "satspec", "--start", "-560",
                 "--stop", "-460", "--step", "5", "--seed", "7",
                 "--out", str(tmp_path)]) == 0
    dips = json.loads((tmp_path / "satspec_dips.json").read_text())["dips"]
    assert any("176Yb" in d["lines"] for d in dips)


def test_report_deterministic(tmp_path, cfg_file):
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    assert main(["--config", cfg_file, "report", "--seed", "7",
                 "--out", str(out1)]) == 0
    assert main(["--config", cfg_file, "report", "--seed", "7",
                 "--out", str(out2)]) == 0
    for name in ("report.json", "shift_table_recovered.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    checks = json.loads((out1 / "report.json").read_text())["checks"]
    assert all(c["pass"] for c in checks)


def test_unknown_config_key_usage_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("oven.angel_deg = 90\n")
    assert main(["--config", str(bad), "isotopes"]) == 2


def test_missing_files_usage_error(tmp_path):
    assert main(["--config", str(tmp_path / "nope.cfg"), "isotopes"]) == 2
    assert main(["fit-doppler", "--in", str(tmp_path / "nope.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,number\n")
    assert main(["fit-doppler", "--in", str(bad)]) == 2


def test_bad_scan_range_domain_error(tmp_path):
    assert main(["scan", "--start", "0", "--stop", "10", "--step", "50",
                 "--atoms", "2000", "--out", str(tmp_path / "s.csv")]) == 3


def test_artifacts_embed_config_hash(tmp_path, cfg_file):
    out = tmp_path / "scan.csv"
    assert main(["--config", cfg_file, "scan", "--start", "-10", "--stop", "10",
                 "--step", "5", "--atoms", "2000", "--seed", "9",
                 "--out", str(out)]) == 0
    first = out.read_text().splitlines()[0]
    assert "config_sha256=" in first and "seed=9" in first
