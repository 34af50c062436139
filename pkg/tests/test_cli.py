import json, logging
from pathlib import Path

import numpy as np
import pytest
import yaml

from ghost_interference.config import load_config, parse_config
from ghost_interference.duality import two_slit_check
from ghost_interference.main import main
from ghost_interference.oracle import load_grid
from ghost_interference.records import validate_file
from ghost_interference.schema import ConfigError, UnknownConfigKey

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = {
    "source.sigma_per_m": 1.0e6,
    "source.omega_m": 1.0e-2,
    "geometry.z0_m": 1.0e-4,
    "geometry.epsilon_m": 3.0e-5,
    "geometry.lambda_m": 7.02e-7,
    "geometry.L1_m": 0.5,
    "geometry.L2_m": 0.5,
}

@pytest.fixture(autouse=True)
def restore_logging():
    # main() reconfigures the root logger onto the captured stderr
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)

def write_config(tmp_path, **extra):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({**BASE, **extra}), encoding="utf-8")
    return str(path)


# ---------- config ----------
def test_shipped_configs_parse():
    for name in ("default.yaml", "desk_scale.yaml", "duality_sweep.yaml"):
        cfg = load_config(str(CONFIGS / name))
        assert cfg.geometry.D == cfg.geometry.L1 + 2 * cfg.geometry.L2

def test_nested_and_dotted_keys_agree():
    nested = {"source": {"sigma_per_m": 1e6, "omega_m": 1e-2},
              "geometry": {"z0_m": 1e-4, "epsilon_m": 3e-5, "lambda_m": 7.02e-7, "L1_m": 0.5, "L2_m": 0.5}}
    assert parse_config(nested) == parse_config(dict(BASE))

def test_config_errors():
    with pytest.raises(UnknownConfigKey):
        parse_config({**BASE, "geometry.z0_mm": 1.0})
    with pytest.raises(ConfigError):
        parse_config({k: v for k, v in BASE.items() if k != "geometry.L2_m"})
    with pytest.raises(ConfigError):
        parse_config({**BASE, "run.mode": "guess"})
    with pytest.raises(ConfigError):
        parse_config({**BASE, "detector.g12": 0.5})
    with pytest.raises(ConfigError):
        parse_config({**BASE, "run.samples": 2.5})

def test_overrides_win(tmp_path):
    cfg = load_config(write_config(tmp_path, **{"run.seed": 1}), {"run.seed": 9, "run.mode": None})
    assert cfg.run.seed == 9
    assert cfg.run.mode == "analytic"

# ---------- commands ----------
def test_validate_command(capsys):
    path = str(CONFIGS / "default.yaml")
    assert main(["validate", "--config", path]) == 0
    assert f"[OK] config valid: {path}" in capsys.readouterr().out

def test_unknown_key_exits_with_config_code(tmp_path, capsys):
    assert main(["validate", "--config", write_config(tmp_path, **{"run.colour": "red"})]) == 2
    assert "unknown config keys" in capsys.readouterr().err

def test_missing_file_exits_with_config_code(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.yaml")]) == 2

def test_overlapping_slits_warn(tmp_path, capsys):
    path = write_config(tmp_path, **{"geometry.epsilon_m": 2.0e-4})
    assert main(["validate", "--config", path]) == 0
    assert "slits overlap" in capsys.readouterr().err

def test_ghost_run_writes_pattern_and_report(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["ghost", "--config", str(CONFIGS / "default.yaml"), "--out", str(out)]) == 0
    assert "[OK] wrote pattern" in capsys.readouterr().out
    data = np.loadtxt(out / "pattern.csv", delimiter=",", skiprows=1)
    assert data.shape == (2001, 2)
    assert (out / "pattern.csv").read_text().splitlines()[0] == "z2_m,density_analytic"
    np.testing.assert_allclose(data[:, 1].max(), 1.0)
    report = (out / "fringe_report.txt").read_text()
    width = float(next(l for l in report.splitlines() if l.startswith("primary_width_m")).split("=")[1])
    np.testing.assert_allclose(width, 1.053e-2, rtol=0.02)
    assert load_config(str(out / "config.yaml")).geometry.z0 == 1e-4

def test_duality_with_orthogonal_detector(tmp_path):
    path = write_config(tmp_path, **{"detector.g12": 0.0, "detector.g13": 0.0, "detector.g23": 0.0})
    out = tmp_path / "out"
    assert main(["duality", "--config", path, "--out", str(out)]) == 0
    (line,) = (out / "duality.jsonl").read_text().splitlines()
    rec = json.loads(line)
    assert rec["D"] == 1.0 and rec["V2"] == 0.0
    assert "violations = 0" in (out / "duality_report.txt").read_text()

def test_duality_sweep_is_deterministic(tmp_path):
    path = write_config(tmp_path, **{"run.sweep_count": 50})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["duality", "--config", path, "--out", str(a), "--seed", "3"]) == 0
    assert main(["duality", "--config", path, "--out", str(b), "--seed", "3"]) == 0
    assert (a / "duality.jsonl").read_bytes() == (b / "duality.jsonl").read_bytes()
    assert validate_file(str(a / "duality.jsonl")) == []

def test_duality_without_detector_or_sweep(tmp_path):
    assert main(["duality", "--config", write_config(tmp_path), "--out", str(tmp_path / "out")]) == 2

def test_numerical_guard_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, **{"source.omega_m": 1.0e-4, "run.sweep_count": 3})
    assert main(["duality", "--config", path, "--out", str(tmp_path / "out")]) == 3
    assert "DegenerateCorrelation" in capsys.readouterr().err

def _report_value(path, key):
    return next(l for l in path.read_text().splitlines() if l.startswith(key)).split("=")[1].strip()

def test_two_slit_duality_run(tmp_path):
    path = write_config(tmp_path, **{"detector.g12": 0.5, "run.two_slit": True})
    out = tmp_path / "out"
    assert main(["duality", "--config", path, "--out", str(out)]) == 0
    rec = json.loads((out / "duality.jsonl").read_text())
    cfg = load_config(path)
    expected = two_slit_check(0.5, cfg.source, cfg.geometry).report.visibility
    assert rec["meta"]["two_slit"] is True
    np.testing.assert_allclose(rec["V2"], expected, rtol=1e-12)
    np.testing.assert_allclose(rec["D"], 0.5)
    report = out / "duality_report.txt"
    assert _report_value(report, "relation") == "V2 + D <= 1"
    assert _report_value(report, "mirror_side_violations") == "0"

def test_two_slit_ghost_halves_the_width(tmp_path):
    path = tmp_path / "cfg.yaml"
    data = yaml.safe_load((CONFIGS / "default.yaml").read_text())
    path.write_text(yaml.safe_dump({**data, "run.two_slit": True}), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["ghost", "--config", str(path), "--out", str(out)]) == 0
    report = out / "fringe_report.txt"
    assert _report_value(report, "slits") == "AC"
    np.testing.assert_allclose(float(_report_value(report, "primary_width_m")), 1.053e-2 / 2, rtol=0.02)

def test_desk_run_compares_analytic_and_grid(tmp_path):
    out = tmp_path / "out"
    assert main(["ghost", "--config", str(CONFIGS / "desk_scale.yaml"), "--out", str(out)]) == 0
    assert (out / "pattern.csv").read_text().splitlines()[0] == "z2_m,density_analytic,density_oracle"
    assert float(_report_value(out / "fringe_report.txt", "rms_deviation_central_2_fringes")) <= 1e-2

def test_grid_dump_from_the_command_line(tmp_path, capsys):
    dump = tmp_path / "final.bin"
    args = ["ghost", "--config", str(CONFIGS / "desk_scale.yaml"), "--out", str(tmp_path / "out"),
            "--dump-grid", str(dump)]
    assert main(args + ["--mode", "oracle"]) == 0
    assert "[OK] wrote oracle grid" in capsys.readouterr().out
    grid = load_grid(str(dump))
    assert grid.spec.n1 == grid.spec.n2 == 1024
    assert main(args + ["--mode", "analytic"]) == 2
    assert "--dump-grid needs an oracle run" in capsys.readouterr().err

def test_written_config_keeps_overlap_phases(tmp_path):
    path = write_config(tmp_path, **{"detector.g12": 0.3, "detector.g13": 0.2, "detector.g23": 0.4,
                                     "detector.phase12": 0.5, "detector.phase23": -1.0})
    out = tmp_path / "out"
    assert main(["duality", "--config", path, "--out", str(out)]) == 0
    np.testing.assert_allclose(load_config(str(out / "config.yaml")).detector.gram,
                               load_config(path).detector.gram, atol=1e-15)

def test_sweep_report_counts_mirror_side(tmp_path):
    path = write_config(tmp_path, **{"run.sweep_count": 200})
    out = tmp_path / "out"
    assert main(["duality", "--config", path, "--out", str(out), "--seed", "7"]) == 0
    report = out / "duality_report.txt"
    assert _report_value(report, "violations") == "0"
    assert int(_report_value(report, "mirror_side_violations")) > 0
