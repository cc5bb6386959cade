import csv
import json

import numpy as np
import pytest

from groupmte.cli import run_command, _parse_grid, _parse_points
from groupmte.errors import ConfigError
from groupmte.io import load_dataset_csv


def _read_rows(path):
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _read_header(path):
    with open(path) as fh:
        first = fh.readline()
    assert first.startswith("# ")
    return json.loads(first[2:])


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "data.csv"
    code = run_command(["simulate", "--g", "800", "--seed", "11",
                        "--out", str(path)])
    assert code == 0
    return path


def test_parse_grid():
    axis = _parse_grid("0.3:0.7:5")
    assert np.allclose(axis, [0.3, 0.4, 0.5, 0.6, 0.7])
    for bad in ("0.3:0.7", "a:b:c", "0:0.5:3", "0.5:0.3:3"):
        with pytest.raises(ConfigError):
            _parse_grid(bad)


def test_parse_points():
    assert _parse_points("0.3,0.7;0.5,0.5") == [(0.3, 0.7), (0.5, 0.5)]
    with pytest.raises(ConfigError):
        _parse_points("0.3")


def test_simulate_output_loads_back(data_csv):
    data = load_dataset_csv(data_csv)
    assert data.n_groups == 800
    header = _read_header(data_csv)
    assert header["seed"] == 11 and header["g"] == 800


def test_seed_required_for_stochastic_commands(tmp_path, capsys):
    code = run_command(["simulate", "--g", "100", "--out",
                        str(tmp_path / "x.csv")])
    assert code == 2
    record = json.loads(capsys.readouterr().err.strip())
    assert record["exit_code"] == 2
    assert "seed" in record["message"]


def test_unknown_command_and_missing_subcommand(capsys):
    assert run_command(["frobnicate"]) == 2
    assert run_command([]) == 2
    capsys.readouterr()


def test_missing_input_file_is_a_data_error(tmp_path, capsys):
    code = run_command(["estimate-parametric", "--in",
                        str(tmp_path / "absent.csv"), "--out",
                        str(tmp_path / "o.csv")])
    assert code == 3
    record = json.loads(capsys.readouterr().err.strip())
    assert record["error"] == "DataError"


def test_numeric_failure_exit_code(data_csv, tmp_path, capsys):
    # An absolute shift of 0.5 pushes fitted propensities out of [0, 1].
    code = run_command(["prte", "--in", str(data_csv), "--policy", "absolute",
                        "--eps", "0.5", "--out", str(tmp_path / "p.csv")])
    assert code == 4
    record = json.loads(capsys.readouterr().err.strip())
    assert record["error"] == "InfeasiblePolicyError"


def test_estimate_parametric_grid_output(data_csv, tmp_path):
    out = tmp_path / "fit.csv"
    code = run_command(["estimate-parametric", "--in", str(data_csv),
                        "--grid", "0.4:0.6:3", "--out", str(out)])
    assert code == 0
    rows = _read_rows(out)
    assert len(rows) == 9
    assert set(rows[0]) == {"p0", "p1", "mcse_1", "mcse_0", "mcde_1", "mcde_0"}
    header = _read_header(out)
    assert 0.0 < abs(header["rho_hat"]) < 1.0
    vals = np.array([float(r["mcse_1"]) for r in rows])
    assert np.all(np.isfinite(vals))


def test_bootstrap_cli_and_thread_env(data_csv, tmp_path, monkeypatch):
    out1 = tmp_path / "b1.csv"
    args = ["bootstrap", "--in", str(data_csv), "--b", "50", "--seed", "5",
            "--points", "0.5,0.5", "--out"]
    assert run_command(args + [str(out1)]) == 0
    rows = _read_rows(out1)
    assert [r["target"] for r in rows][0] == "rho"
    assert len(rows) == 1 + 4  # rho + 4 effect targets at one point
    for r in rows:
        assert float(r["lower_0.9"]) <= float(r["upper_0.9"])
        assert float(r["lower_0.95"]) <= float(r["lower_0.9"])
    out2 = tmp_path / "b2.csv"
    monkeypatch.setenv("GROUPMTE_THREADS", "2")
    assert run_command(args + [str(out2)]) == 0
    assert _read_rows(out1) == _read_rows(out2)  # bit-identical across threads
    monkeypatch.setenv("GROUPMTE_THREADS", "soup")
    assert run_command(args + [str(tmp_path / "b3.csv")]) == 2


def test_config_file_merge_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"g": 150, "seed": 9}))
    out = tmp_path / "sim.csv"
    code = run_command(["simulate", "--config", str(cfg), "--seed", "10",
                        "--out", str(out)])
    assert code == 0
    header = _read_header(out)
    assert header["g"] == 150  # from the config file
    assert header["seed"] == 10  # flag wins over the config file
    assert load_dataset_csv(out).n_groups == 150


def test_local_effects_cli(data_csv, tmp_path):
    out = tmp_path / "local.csv"
    assert run_command(["local-effects", "--in", str(data_csv),
                        "--out", str(out)]) == 0
    rows = _read_rows(out)
    assert len(rows) == 12
    assert {(r["effect"], r["method"]) for r in rows} == {
        ("LACSE", "line"), ("LACDE", "line"), ("LACSE", "rectangle"),
        ("LACDE", "rectangle"), ("ACSE", "full"), ("ACDE", "full")}


def test_prte_cli_instrument_strata(data_csv, tmp_path):
    out = tmp_path / "prte.csv"
    assert run_command(["prte", "--in", str(data_csv), "--policy",
                        "instrument", "--eps", "0.3", "--j", "0",
                        "--out", str(out)]) == 0
    row = _read_rows(out)[0]
    shares = [float(row[f"stratum_{k}"]) for k in (1, 2, 3, 4)]
    assert abs(sum(shares) - 1.0) < 1e-12
    assert float(row["delta_p"]) > 0.0


def test_diagnostics_cli(data_csv, tmp_path):
    out = tmp_path / "diag.csv"
    assert run_command(["diagnostics", "--in", str(data_csv),
                        "--cell-width", "0.25", "--out", str(out)]) == 0
    rows = _read_rows(out)
    checks = {r["check"] for r in rows}
    assert checks == {"nesting-inequalities", "index-sufficiency"}
    header = _read_header(out)
    assert "nesting_summary" in header and "index_summary" in header


def test_naive_mte_cli(data_csv, tmp_path):
    out = tmp_path / "naive.csv"
    assert run_command(["naive-mte", "--in", str(data_csv), "--bandwidth",
                        "0.3", "--grid", "0.4:0.6:3", "--out", str(out)]) == 0
    rows = _read_rows(out)
    assert len(rows) == 3
    assert all(np.isfinite(float(r["naive_mte"])) for r in rows)


def test_estimate_semiparametric_cli(data_csv, tmp_path):
    out = tmp_path / "semi.csv"
    assert run_command(["estimate-semiparametric", "--in", str(data_csv),
                        "--h1", "0.7", "--grid", "0.5:0.5:1",
                        "--out", str(out)]) == 0
    row = _read_rows(out)[0]
    assert set(row) == {"p0", "p1", "b4", "mtr_00", "mtr_01", "mtr_10",
                        "mtr_11", "mcse_1", "mcse_0", "mcde_1", "mcde_0"}
    assert np.isfinite(float(row["b4"]))
