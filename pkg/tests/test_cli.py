import json
import math
import os

import pytest

from qdcascade import cli
from qdcascade.config import ConfigError, load, parse_quantity


@pytest.mark.parametrize("value,kind,expected", [
    ("405 ps", "rate", 1 / 405),
    ("0.77 ns", "rate", 1 / 770),
    ("2 1/ns", "rate", 2e-3),
    ("335 GHz", "angular", 2 * math.pi * 0.335),
    ("2.1 rad/ps", "angular", 2.1),
    ("76 MHz", "frequency", 76e6),
    ("23 kHz", "frequency", 23e3),
    ("4 ps", "time", 4.0),
    ("1.5 ns", "time", 1500.0),
    (0.25, "number", 0.25),
    ("1e-08", "number", 1e-8),
])
def test_parse_quantity(value, kind, expected):
    assert parse_quantity(value, kind) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("value,kind", [("4 GHz", "time"), ("405 ps", "angular"), ("fast", "rate"),
                                        (True, "number"), ("0 ps", "rate")])
def test_parse_quantity_rejects(value, kind):
    with pytest.raises(ConfigError):
        parse_quantity(value, kind)


def test_empty_config_is_all_defaults():
    cfg = load()
    provs = {p for _, _, _, p in cfg.report()}
    assert provs <= {"measured", "default"}
    assert cfg["physics"]["gamma_b"] == pytest.approx(1 / 405)
    assert cfg.provenance["physics"]["gamma_b"] == "measured"


def test_unknown_keys_are_listed():
    with pytest.raises(ConfigError, match="physics.bogus.*solver.nope|solver.nope.*physics.bogus"):
        load({"physics": {"bogus": 1}, "solver": {"nope": 2}})
    with pytest.raises(ConfigError, match="nosuch"):
        load({"nosuch": {}})


def test_invariant_violation_names_field():
    with pytest.raises(ConfigError, match="pulse.sigma.*> 0"):
        load({"pulse": {"sigma": -1}})
    with pytest.raises(ConfigError, match="ramsey.quadrature_order"):
        load(overrides=["ramsey.quadrature_order=20"])


def test_overrides_and_units():
    cfg = load({"physics": {"delta_e": "335 GHz"}}, ["physics.gamma_b=405 ps", "rabi.points=7"])
    assert cfg["physics"]["delta_e"] == pytest.approx(2 * math.pi * 0.335)
    assert cfg["physics"]["gamma_b"] == pytest.approx(1 / 405)
    assert cfg["rabi"]["points"] == 7
    assert cfg.provenance["physics"]["delta_e"] == "override"


def test_validate_report(capsys):
    assert cli.main(["validate", "--override", "physics.delta_e=335 GHz"]) == 0
    out = capsys.readouterr().out
    assert "physics.delta_e = 2.10486707791 rad/ps  (override)" in out
    assert "physics.gamma_b = 0.00246913580247 1/ps  (measured)" in out
    assert cli.main(["validate", "--override", "pulse.sigma=-1"]) == 2
    assert "sigma" in capsys.readouterr().err


def _run(tmp_path, *args):
    out = tmp_path / "out"
    code = cli.main([args[0], "--out", str(out), *args[1:]])
    return code, out


def test_lifetime_command(tmp_path):
    code, out = _run(tmp_path, "lifetime")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["results"]["tau_b_ps"] == pytest.approx(405, rel=1e-2)
    assert summary["results"]["tau_x_ps"] == pytest.approx(771, rel=1e-2)
    assert summary["invariants"]["min_eigenvalue"] >= -1e-9
    assert "wall_time_s" in summary
    header = (out / "lifetime_b.csv").read_text().splitlines()
    assert header[0].startswith("# ")
    assert "t[ps],P_g[probability],P_x[probability],P_b[probability]" in header


def test_efficiency_command(tmp_path):
    code, out = _run(tmp_path, "efficiency")
    assert code == 0
    res = json.loads((out / "summary.json").read_text())["results"]
    assert res["eta"] == pytest.approx(0.0027, rel=0.01)


def test_rabi_command(tmp_path):
    code, out = _run(tmp_path, "rabi", "--override", "rabi.points=12")
    assert code == 0
    files = sorted(f for f in os.listdir(out) if f.endswith(".csv"))
    assert files == ["rabi_0GHz.csv", "rabi_22GHz.csv", "rabi_35GHz.csv", "rabi_57GHz.csv"]
    lines = (out / "rabi_0GHz.csv").read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")]
    assert header[0] == "omega_sq[rad2/ps2],power_rel[dimensionless],P_xx[probability],P_x[probability]"
    assert len(header) == 13


def test_trajectory_command(tmp_path):
    code, out = _run(tmp_path, "trajectory", "--override", "trajectory.samples=50")
    assert code == 0
    res = json.loads((out / "summary.json").read_text())["results"]
    assert res["window_complete"] and 0.9 < res["P_xx"] < 1


def test_output_is_deterministic_and_round_trips(tmp_path):
    args = ["--override", "ramsey.points=4", "--override", "ramsey.phases=8",
            "--override", "ramsey.quadrature_order=5", "--override", "ramsey.omega_half=1.29"]
    assert cli.main(["ramsey", "--out", str(tmp_path / "a"), "--threads", "1", *args]) == 0
    assert cli.main(["ramsey", "--out", str(tmp_path / "b"), "--threads", "3", *args]) == 0
    a = (tmp_path / "a" / "ramsey.csv").read_bytes()
    assert a == (tmp_path / "b" / "ramsey.csv").read_bytes()
    resolved = json.loads((tmp_path / "a" / "summary.json").read_text())["resolved_config"]
    cfg_file = tmp_path / "resolved.json"
    cfg_file.write_text(json.dumps(resolved))
    assert cli.main(["ramsey", "--config", str(cfg_file), "--out", str(tmp_path / "c")]) == 0
    assert a == (tmp_path / "c" / "ramsey.csv").read_bytes()


def test_yaml_config_file(tmp_path):
    f = tmp_path / "run.yaml"
    f.write_text("physics:\n  gamma_b: 405 ps\n  delta_e: 335 GHz\nlifetime:\n  duration: 2 ns\n")
    cfg = load(str(f))
    assert cfg["lifetime"]["duration"] == 2000.0


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["rabi", "--config", str(tmp_path / "missing.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("solver: [1, 2\n")
    assert cli.main(["rabi", "--config", str(bad)]) == 2
    code, _ = _run(tmp_path, "trajectory", "--override", "solver.min_step=0.5",
                   "--override", "solver.max_step_pulse=0.1", "--override", "trajectory.t_end=40")
    assert code == 3
    assert "StiffnessError" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    target = tmp_path / "file"
    target.write_text("")
    assert cli.main(["efficiency", "--out", str(target / "sub")]) == 1
