import csv
import json
import shutil
import subprocess

import pytest

from robust_tandem.cli import main


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_lfd_command(tmp_path, capsys):
    cfg = _write(tmp_path, {"eps": {"eps0": 0.01, "eps1": 0.01}, "N": 3})
    out = str(tmp_path / "r")
    assert main(["lfd", "--config", cfg, "--out", out]) == 0
    data = json.loads((tmp_path / "r_lfd.json").read_text())
    assert data["lfds"][0]["c_hi"] == pytest.approx(4.974937185533, rel=1e-9)
    assert (tmp_path / "r_manifest.json").exists()


def test_chain_preset_writes_both_rules(tmp_path):
    out = str(tmp_path / "fig")
    assert main(["chain", "--preset", "fig-rules", "--out", out]) == 0
    a = _rows(tmp_path / "fig_chain_phi_A.csv")
    b = _rows(tmp_path / "fig_chain_phi_B.csv")
    assert a[0] == ["k", "P_F", "P_M", "P_e"] and len(a) == 31 and len(b) == 31
    assert float(a[1][3]) == pytest.approx(0.38125, abs=1e-11)


def test_figure_rules_summary(tmp_path):
    out = str(tmp_path / "f")
    assert main(["figure", "--preset", "fig-rules", "--out", out]) == 0
    s = json.loads((tmp_path / "f_summary.json").read_text())
    assert s["phi_B"]["sup_attained_at"] == "asymptote"


def test_optimize_objective_override(tmp_path):
    out = str(tmp_path / "o")
    assert main(["optimize", "--objective", "asymptotic-dd", "--out", out]) == 0
    rep = json.loads((tmp_path / "o_optimize.json").read_text())
    assert rep["objective"] == "AsymptoticDD"
    assert rep["value"] == pytest.approx(0.2539277, abs=1e-6)


def test_simulate_and_manifest_round_trip(tmp_path):
    cfg = _write(tmp_path, {"N": 4, "n_samples": 20000, "rule": {"t1": "lower", "t0": 1.1, "p": 1.0},
                            "contamination": {"kind": "least_favorable"}})
    first = str(tmp_path / "a")
    assert main(["simulate", "--config", cfg, "--out", first, "--seed", "7"]) == 0
    manifest = json.loads((tmp_path / "a_manifest.json").read_text())
    assert manifest["config"]["seed"] == 7
    cfg2 = _write(tmp_path, manifest["config"], "replay.json")
    second = str(tmp_path / "b")
    assert main(["simulate", "--config", cfg2, "--out", second]) == 0
    assert (tmp_path / "a_simulate.csv").read_text() == (tmp_path / "b_simulate.csv").read_text()
    header = _rows(tmp_path / "a_simulate.csv")[0]
    assert header == ["k", "P_F_hat", "P_M_hat", "P_e_hat", "se"]


def test_config_errors_exit_2(tmp_path, capsys):
    bad_json = _write(tmp_path, '{"N": 3,\n "eps": }')
    assert main(["chain", "--config", bad_json, "--out", str(tmp_path / "x")]) == 2
    assert "line 2" in capsys.readouterr().err
    bad_field = _write(tmp_path, {"N": 0})
    assert main(["chain", "--config", bad_field, "--out", str(tmp_path / "x")]) == 2
    assert "'N'" in capsys.readouterr().err
    assert main(["chain", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["figure", "--out", str(tmp_path / "x")]) == 2


def test_domain_error_exit_1(tmp_path, capsys):
    cfg = _write(tmp_path, {"rule": "phi-delta:0.05", "eps": {"eps0": 0.01, "eps1": 0.05}})
    assert main(["chain", "--config", cfg, "--out", str(tmp_path / "x")]) == 1
    assert "SchemeInapplicableError" in capsys.readouterr().err


def test_console_script_installed():
    exe = shutil.which("robust-tandem")
    if exe is None:
        pytest.skip("console script not on PATH")
    res = subprocess.run([exe, "--help"], capture_output=True, text=True, check=True)
    assert "figure" in res.stdout
