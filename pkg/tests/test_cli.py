import json
import os
from pathlib import Path

import pytest
from click.testing import CliRunner

import nemsizer
from nemsizer.cli import main

CONFIG_DIR = Path(nemsizer.__file__).parent / "configs"
SYMMETRIC = str(CONFIG_DIR / "symmetric.toml")
ASYMMETRIC = str(CONFIG_DIR / "asymmetric.toml")


@pytest.fixture
def runner():
    return CliRunner()


def test_validate_lists_periods(runner):
    r = runner.invoke(main, ["validate", "--config", SYMMETRIC])
    assert r.exit_code == 0
    lines = r.output.strip().splitlines()
    assert lines[0] == "period_id,month,peak,import_price,export_price"
    assert len(lines) == 1 + 12


def test_validate_json_format(runner):
    r = runner.invoke(main, ["validate", "--config", SYMMETRIC,
                             "--format", "json"])
    assert r.exit_code == 0
    rows = json.loads(r.output)
    assert len(rows) == 12
    assert rows[0]["period_id"] == 0


def test_missing_config_exits_1(runner):
    r = runner.invoke(main, ["size", "--config", "/no/such/file.toml"])
    assert r.exit_code == 1
    assert "error" in r.output or r.exception


def test_invalid_tariff_exits_1(runner, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(
        '[tariff]\nname = "bad"\n'
        "[[tariff.rule]]\n"
        "months = [1,2,3,4,5,6,7,8,9,10,11,12]\nhours = [0, 24]\n"
        "peak = false\nimport_price = 0.10\nexport_price = 0.50\n"
    )
    r = runner.invoke(main, ["validate", "--config", str(bad)])
    assert r.exit_code == 1


def test_numerical_failure_exits_2(runner, monkeypatch):
    from nemsizer import cli as cli_mod
    from nemsizer.stochastic import NumericalError

    def boom(*a, **k):
        raise NumericalError("quadrature did not converge")

    monkeypatch.setattr(cli_mod.sizing, "solve_capacity", boom)
    r = runner.invoke(main, ["size", "--config", SYMMETRIC])
    assert r.exit_code == 2


def test_size_json_payload(runner):
    r = runner.invoke(main, ["size", "--config", ASYMMETRIC])
    assert r.exit_code == 0
    payload = json.loads(r.output)
    assert set(payload) == {"g_star", "classification", "interval",
                            "F_at_gstar", "c_g", "flat_bound"}
    assert payload["classification"] == "interior"
    assert 0 < payload["g_star"] < 13


def test_size_overrides(runner):
    base = json.loads(
        runner.invoke(main, ["size", "--config", ASYMMETRIC]).output
    )
    high = json.loads(
        runner.invoke(
            main, ["size", "--config", ASYMMETRIC, "--pv-cost", "1e6"]
        ).output
    )
    assert high["classification"] == "at_zero"
    assert high["g_star"] == 0.0
    assert base["g_star"] > 0


def test_curve_monotone(runner):
    r = runner.invoke(main, ["curve", "--config", ASYMMETRIC,
                             "--gmin", "0", "--gmax", "10", "--steps", "8"])
    assert r.exit_code == 0
    rows = r.output.strip().splitlines()[1:]
    values = [float(line.split(",")[1]) for line in rows]
    assert len(values) == 8
    assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))


def test_calibrate_csv(runner):
    r = runner.invoke(main, ["calibrate", "--config", SYMMETRIC])
    assert r.exit_code == 0
    lines = r.output.strip().splitlines()
    assert lines[0] == "period_id,a,b,mean_cf,cf_sigma,cf_max"
    assert len(lines) == 1 + 12


def test_dispatch_probabilities_sum(runner):
    r = runner.invoke(main, ["dispatch", "--config", ASYMMETRIC,
                             "--capacity", "5.0"])
    assert r.exit_code == 0
    for line in r.output.strip().splitlines()[1:]:
        parts = line.split(",")
        total = float(parts[1]) + float(parts[2]) + float(parts[3])
        assert abs(total - 1.0) < 1e-6


def test_sensitivity_json(runner):
    r = runner.invoke(main, ["sensitivity", "--config", ASYMMETRIC])
    assert r.exit_code == 0
    payload = json.loads(r.output)
    assert set(payload) == {"import_price", "export_price", "pv_cost"}
    rep = payload["pv_cost"]
    assert rep["case"] == "interior"
    assert rep["value"] < 0
    assert rep["fd_check"] == pytest.approx(rep["value"], rel=1e-3)


def test_sign_table_csv(runner):
    r = runner.invoke(main, ["sign-table", "--config", ASYMMETRIC])
    assert r.exit_code == 0
    lines = r.output.strip().splitlines()
    assert lines[0].startswith("variable,parameter,regime")
    assert len(lines) == 1 + 48


def test_synth_data_seed_determinism(runner, tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    out3 = tmp_path / "c.csv"
    assert runner.invoke(main, ["synth-data", "--seed", "9",
                                "--out", str(out1)]).exit_code == 0
    assert runner.invoke(main, ["synth-data", "--seed", "9",
                                "--out", str(out2)]).exit_code == 0
    assert runner.invoke(main, ["synth-data", "--seed", "10",
                                "--out", str(out3)]).exit_code == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_bytes() != out3.read_bytes()


def test_seed_env_fallback(runner, monkeypatch, tmp_path):
    out_env = tmp_path / "env.csv"
    out_flag = tmp_path / "flag.csv"
    monkeypatch.setenv("NEM_SIZER_SEED", "77")
    assert runner.invoke(main, ["synth-data",
                                "--out", str(out_env)]).exit_code == 0
    monkeypatch.delenv("NEM_SIZER_SEED")
    assert runner.invoke(main, ["synth-data", "--seed", "77",
                                "--out", str(out_flag)]).exit_code == 0
    assert out_env.read_bytes() == out_flag.read_bytes()


def test_sweep_csv_shape(runner):
    r = runner.invoke(main, ["sweep", "--config", ASYMMETRIC, "--grid", "2"])
    assert r.exit_code == 0
    lines = r.output.strip().splitlines()
    assert lines[0].startswith("dpi_plus,dpi_minus,g_star")
    assert len(lines) == 1 + 4


def test_out_flag_writes_file(runner, tmp_path):
    out = tmp_path / "size.json"
    r = runner.invoke(main, ["size", "--config", ASYMMETRIC,
                             "--out", str(out)])
    assert r.exit_code == 0
    assert json.loads(out.read_text())["classification"] == "interior"


def test_unknown_flag_rejected(runner):
    r = runner.invoke(main, ["size", "--config", ASYMMETRIC, "--frobnicate"])
    assert r.exit_code == 2  # click usage error
