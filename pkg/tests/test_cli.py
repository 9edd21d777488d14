"""Tests for the command-line front end."""

from __future__ import annotations

import json

import numpy as np
import pytest

from chiralwind import __version__, cli
from chiralwind.oracle import MCEstimate, Report


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


# ---------------------------------------------------------------------------
# configuration handling
# ---------------------------------------------------------------------------


def test_runconfig_defaults_valid():
    cfg = cli.RunConfig()
    assert cfg.n == 4 and cfg.grid >= 16 and cfg.samples >= 1


@pytest.mark.parametrize("kwargs", [
    {"n": 3},
    {"n": 0},
    {"samples": 0},
    {"grid": 15},
    {"seed": -1},
    {"rel_tol": 0.0},
    {"coeffs": "trig"},
])
def test_runconfig_rejects_bad_values(kwargs):
    with pytest.raises(cli.ConfigError):
        cli.RunConfig(**kwargs)


def test_toml_config_with_flag_override(tmp_path):
    conf = tmp_path / "run.toml"
    conf.write_text(
        f'n = 2\nseed = 5\ngrid = 32\nout = "{tmp_path}"\n'
        '[coeffs]\ntype = "trig"\n')
    assert run_cli("flow", "--config", conf, "--grid", 48) == 0
    rows = [ln for ln in (tmp_path / "flow.csv").read_text().splitlines()
            if not ln.startswith("#")]
    assert len(rows) == 1 + 49  # header + grid+1 points


def test_unknown_config_key_exits_2(tmp_path, capsys):
    conf = tmp_path / "run.toml"
    conf.write_text("n = 4\nbogus = 1\n")
    assert run_cli("flow", "--config", conf) == 2
    assert "bogus" in capsys.readouterr().err


def test_malformed_toml_exits_2(tmp_path, capsys):
    conf = tmp_path / "run.toml"
    conf.write_text("n = [broken")
    assert run_cli("flow", "--config", conf) == 2
    assert "TOML" in capsys.readouterr().err


def test_odd_n_exits_2(tmp_path, capsys):
    assert run_cli("flow", "--n", 5, "--out", tmp_path) == 2
    assert "even" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("--version")
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------


def test_flow_schema_and_provenance(tmp_path):
    assert run_cli("flow", "--out", tmp_path, "--grid", 100, "--n", 4) == 0
    lines = (tmp_path / "flow.csv").read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    assert any(__version__ in ln for ln in comments)
    assert any('"seed"' in ln for ln in comments)
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0].split(",")[:3] == ["p", "reDet", "imDet"]
    assert len(body) == 1 + 101
    # p, reDet, imDet, 2n H eigenvalues, n complex K eigenvalues
    assert len(body[1].split(",")) == 3 + 8 + 8


def test_flow_accepts_fourier_field(tmp_path):
    conf = tmp_path / "run.toml"
    conf.write_text(
        f'n = 4\ngrid = 32\nout = "{tmp_path}"\n'
        '[coeffs]\ntype = "fourier"\na = [0.5, 1.0]\nb = [1.0, -0.5]\n')
    assert run_cli("flow", "--config", conf) == 0


def test_flow_rerun_bit_identical(tmp_path):
    run_cli("flow", "--out", tmp_path / "a", "--grid", 32)
    run_cli("flow", "--out", tmp_path / "b", "--grid", 32)
    csv_a = (tmp_path / "a" / "flow.csv").read_text()
    csv_b = (tmp_path / "b" / "flow.csv").read_text()
    assert csv_a.replace(str(tmp_path / "a"), "") == csv_b.replace(str(tmp_path / "b"), "")


# ---------------------------------------------------------------------------
# winding
# ---------------------------------------------------------------------------


def test_winding_histogram_parity_and_bookkeeping(tmp_path):
    assert run_cli("winding", "--out", tmp_path, "--samples", 40,
                   "--grid", 64) == 0
    payload = json.loads((tmp_path / "winding.json").read_text())
    assert payload["version"] == __version__
    assert payload["config"]["samples"] == 40
    assert all(int(k) % 2 == 0 for k in payload["counts"])
    assert sum(payload["counts"].values()) == payload["total"]
    assert payload["total"] + payload["rejected"] == 40
    assert len(payload["w_values"]) == payload["total"]


def test_winding_rerun_bit_identical(tmp_path):
    run_cli("winding", "--out", tmp_path, "--samples", 25, "--grid", 64)
    first = (tmp_path / "winding.json").read_bytes()
    run_cli("winding", "--out", tmp_path, "--samples", 25, "--grid", 64)
    assert (tmp_path / "winding.json").read_bytes() == first


# ---------------------------------------------------------------------------
# z
# ---------------------------------------------------------------------------


def test_z_emits_analytic_mc_report(tmp_path):
    assert run_cli("z", "--out", tmp_path, "--samples", 40000) == 0
    payload = json.loads((tmp_path / "z.json").read_text())
    assert payload["route"] == "reduced"
    assert payload["analytic"]["k"] == 1
    assert payload["analytic"]["momenta"] == {"q": [1.1], "p": [0.3]}
    assert payload["report"]["pass"] is True
    assert payload["report"]["mc"]["scheme"] == "mom"
    assert payload["config"]["seed"] == 20260814


def test_z_routes_agree(tmp_path):
    run_cli("z", "--out", tmp_path / "r", "--samples", 2048)
    run_cli("z", "--out", tmp_path / "a", "--samples", 2048,
            "--route", "alternative")
    zr = json.loads((tmp_path / "r" / "z.json").read_text())["analytic"]["value"]
    za = json.loads((tmp_path / "a" / "z.json").read_text())["analytic"]["value"]
    vr = complex(zr["re"], zr["im"])
    va = complex(za["re"], za["im"])
    assert abs(vr - va) / abs(vr) < 1e-3


def test_z_equal_momenta_exit_2(tmp_path, capsys):
    assert run_cli("z", "--out", tmp_path, "--q", 0.7, "--p", 0.7,
                   "--samples", 10) == 2
    assert "pairing" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# spherical
# ---------------------------------------------------------------------------


def test_spherical_payload(tmp_path):
    assert run_cli("spherical", "--out", tmp_path, "--n", 8,
                   "--samples", 3000) == 0
    payload = json.loads((tmp_path / "spherical.json").read_text())
    rc = payload["real_count"]
    assert rc["asymptotic"] == pytest.approx(float(np.sqrt(np.pi * 8 / 2.0)))
    assert abs(rc["mean"] - rc["asymptotic"]) < 1.0
    assert payload["char_poly"]["target"] == 2.0 ** 8


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def test_validate_smoke_passes(tmp_path):
    assert run_cli("validate", "--out", tmp_path,
                   "--budget-scale", 0.02) == 0
    payload = json.loads((tmp_path / "validate.json").read_text())
    assert payload["all_pass"] is True
    assert len(payload["reports"]) >= 12
    assert payload["budget_scale"] == 0.02


def test_validate_failure_exits_1(tmp_path, monkeypatch):
    bad = Report(label="forced", analytic=1.0, err_est=0.0,
                 mc=MCEstimate(mean=2.0, stderr=0.0, n_samples=1,
                               n_batches=1, scheme="mean"),
                 abs_diff=1.0, sigma_combined=0.0, passed=False)

    monkeypatch.setattr(cli, "validate_suite", lambda **kw: [bad])
    assert run_cli("validate", "--out", tmp_path) == 1
    payload = json.loads((tmp_path / "validate.json").read_text())
    assert payload["all_pass"] is False
