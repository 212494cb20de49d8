import csv
import json

import numpy as np
import pytest

from qtdg import cli
from qtdg.errors import SingularMatrix


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_convergence_csv(tmp_path, capsys):
    code = cli.main(["convergence", "--problem", "exp_diffusion", "--pmin", "1", "--pmax", "2",
                     "--levels", "2,4,8", "--out", str(tmp_path)])
    assert code == 0
    path = tmp_path / "exp_diffusion_sipg.csv"
    rows = _rows(path)
    assert list(rows[0]) == list(cli.CSV_COLUMNS)
    assert len(rows) == 6
    assert rows[0]["rate_L2"] == "" and float(rows[2]["rate_L2"]) > 1.8 and float(rows[5]["rate_L2"]) > 2.8
    assert float(rows[1]["h_actual"]) == pytest.approx(np.sqrt(2) / 4)
    assert float(rows[1]["h_nominal"]) == pytest.approx(0.25)
    assert "finest rates" in capsys.readouterr().out


def test_csv_byte_stable_and_thread_independent(tmp_path, monkeypatch):
    args = ["convergence", "--problem", "smooth_dar", "--pmin", "2", "--pmax", "3",
            "--levels", "2,4", "--epsilon", "sipg,nipg", "--gamma", "8p2"]
    outs = []
    for k, threads in enumerate(("1", "1", "3")):
        monkeypatch.setenv("QTDG_THREADS", threads)
        d = tmp_path / f"r{k}"
        assert cli.main(args + ["--out", str(d)]) == 0
        outs.append([(d / f"smooth_dar_{v}.csv").read_bytes() for v in ("sipg", "nipg")])
    assert outs[0] == outs[1] == outs[2]


def test_run_config(tmp_path):
    cfg = {"problem": "poly_reaction", "space": "qt", "degrees": [2], "levels": [2, 4],
           "epsilon": -1, "gamma": 32, "output": str(tmp_path / "o")}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["run", "--config", str(path)]) == 0
    rows = _rows(tmp_path / "o" / "poly_reaction_sipg.csv")
    assert all(float(r["err_Linf"]) < 1e-8 for r in rows)


def test_gamma_table_config():
    cfg = cli.ExperimentConfig.from_dict({"problem": "exp_diffusion", "degrees": [1, 2],
                                          "levels": [2], "gamma": {"1": 5, "2": 40}})
    rec = cli.run(cfg, write=False)
    assert set(rec.reports) == {("qt", -1, 1, 2), ("qt", -1, 2, 2)}


def test_compare_dofs(tmp_path):
    assert cli.main(["compare", "--problem", "exp_diffusion", "--pmin", "1", "--pmax", "4",
                     "--levels", "2", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "exp_diffusion_sipg_compare.csv")
    per_el = {(r["space"], int(r["p"])): int(r["dofs"]) // 8 for r in rows}
    assert per_el[("qt", 4)] == 9 and per_el[("full", 4)] == 15
    assert per_el[("qt", 1)] == per_el[("full", 1)] == 3


def test_snapshot_file(tmp_path):
    out = tmp_path / "snap.txt"
    assert cli.main(["snapshot", "--problem", "advdom_neumann", "--nu", "0.1", "--p", "2",
                     "--n", "4", "--out", str(out)]) == 0
    vals = np.loadtxt(out)
    assert vals.shape == (101 * 101,) and np.all(np.isfinite(vals))


@pytest.mark.parametrize("argv", [
    ["convergence", "--problem", "nope", "--levels", "2"],
    ["convergence", "--problem", "exp_diffusion", "--levels", "4,2"],
    ["convergence", "--problem", "exp_diffusion", "--epsilon", "7"],
    ["snapshot", "--problem", "exp_diffusion", "--nu", "0.1", "--out", "x"],
    ["snapshot", "--problem", "reactdom", "--nu", "0.5", "--out", "x"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert cli.main(argv + (["--out", str(tmp_path)] if argv[0] != "snapshot" else [])) == 2
    err = capsys.readouterr().err
    assert err.startswith("qtdg: ") and err.count("\n") == 1


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"problem": "exp_diffusion", "colour": "red"}))
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_numerical_failure_exit_3(tmp_path, monkeypatch, capsys):
    def broken(system):
        raise SingularMatrix("forced")
    monkeypatch.setattr(cli, "solve", broken)
    code = cli.main(["convergence", "--problem", "exp_diffusion", "--pmin", "1", "--pmax", "1",
                     "--levels", "2", "--out", str(tmp_path)])
    assert code == 3
    assert "solve failed: SingularMatrix" in capsys.readouterr().err


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("QTDG_THREADS", "many")
    assert cli.main(["convergence", "--problem", "exp_diffusion", "--pmin", "1", "--pmax", "1",
                     "--levels", "2", "--out", str(tmp_path)]) == 2
