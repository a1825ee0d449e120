import json

import pytest

from wienerchaos import cli
from wienerchaos.stein import PairingCheck


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def run_cfg(tmp_path, cfg, out="out", **kw):
    p = write(tmp_path, cfg)
    code = cli.run(p, out=tmp_path / out, **kw)
    return code, tmp_path / out


def all_numbers_have_source(node):
    if isinstance(node, dict):
        if "value" in node:
            assert "source" in node and isinstance(node["source"], str)
            return
        for v in node.values():
            all_numbers_have_source(v)
    elif isinstance(node, list):
        for v in node:
            all_numbers_have_source(v)
    else:
        assert not isinstance(node, float), "bare float in report"


def test_stein_check_report(tmp_path):
    code, out = run_cfg(tmp_path, {"version": 1, "kind": "stein-check",
                                   "params": {"orders": [1, 3], "z_grid": [-2.0, 0.5]}})
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["max_residual"]["value"] < 1e-10
    assert rep["max_residual"]["source"] == "measured"
    lines = (out / "curves.csv").read_text().splitlines()
    assert lines[0].startswith("q,z,closed_form")
    assert len(lines) == 5
    all_numbers_have_source(rep)


@pytest.mark.parametrize("cfg", [
    "not json",
    {"version": 2, "kind": "stein-check"},
    {"version": 1, "kind": "nope"},
    {"version": 1, "kind": "stein-check", "extra": 1},
    {"version": 1, "kind": "stein-check", "params": {"orderz": [1]}},
    {"version": 1, "kind": "stein-check", "params": {"orders": [0]}},
    {"version": 1, "kind": "sheet", "params": {"eps_ladder": [1.5]}},
    {"version": 1, "kind": "sheet", "params": {"d": 3, "n": 10}},
    {"version": 1, "kind": "toeplitz", "params": {"pair": "no-such-pair"}},
    {"version": 1, "kind": "toeplitz", "params": {"pair": "cauchy-pair", "m": 5000}},
    {"version": 1, "kind": "breuer-major", "params": {"H": 0.7}},
    {"version": 1, "kind": "breuer-major", "params": {"H": 0.3, "q": 3}},
    {"version": 1, "kind": "breuer-major", "params": {"H": 0.3, "T_ladder": [2000], "n": 10}},
    {"version": 1, "kind": "chaos2-report", "params": {}},
])
def test_invalid_configs_exit_2_without_files(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    out = tmp_path / "out"
    assert cli.run(p, out=out) == 2
    assert not out.exists()


def test_unconverged_exit_3(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "verify_stein_hermite_pairing",
                        lambda q, z, tol: PairingCheck(q, z, 0.0, 1e-3, 1e-2, False))
    code, out = run_cfg(tmp_path, {"version": 1, "kind": "stein-check",
                                   "params": {"orders": [1], "z_grid": [0.0]}})
    assert code == 3
    rep = json.loads((out / "report.json").read_text())
    assert rep["unconverged"]


def test_curves_identical_across_workers(tmp_path):
    cfg = {"version": 1, "kind": "sheet", "seed": 17,
           "params": {"d": 1, "eps_ladder": [0.05, 0.01], "m": 80, "n": 30000}}
    a = run_cfg(tmp_path, cfg, "a", workers=1)
    b = run_cfg(tmp_path, cfg, "b", workers=3)
    c = run_cfg(tmp_path, cfg, "c", workers=1)
    assert a[0] == b[0] == c[0] == 0
    ca, cb, cc = ((d[1] / "curves.csv").read_bytes() for d in (a, b, c))
    assert ca == cb == cc
    assert (a[1] / "report.json").read_bytes() == (b[1] / "report.json").read_bytes()


def test_seed_override_changes_draws(tmp_path):
    cfg = {"version": 1, "kind": "chaos2-report", "seed": 1,
           "params": {"eigenvalues": [0.5, -0.3, 0.2], "n": 20000}}
    a = run_cfg(tmp_path, cfg, "a")
    b = run_cfg(tmp_path, cfg, "b", seed=2)
    assert (a[1] / "curves.csv").read_bytes() != (b[1] / "curves.csv").read_bytes()
    assert json.loads((b[1] / "report.json").read_text())["seed"] == 2


def test_list_builtins_contents():
    inv = cli.list_builtins()
    assert "cauchy-pair" in inv["spectral_pairs"]
    assert "sheet-kernel" in inv["kernel_families"]
    assert len(inv["kernel_families"]["sheet-kernel"]["eps_ladder"]) == 5


def test_every_builtin_runs(tmp_path):
    inv = cli.list_builtins()
    for i, name in enumerate(inv["spectral_pairs"]):
        code, out = run_cfg(tmp_path, {"version": 1, "kind": "toeplitz",
                                       "params": {"pair": name, "T_ladder": [5.0], "m": 60, "jmax": 3}},
                            f"pair{i}")
        assert code == 0, name
        assert json.loads((out / "report.json").read_text())["pair"] == name
    fam = inv["kernel_families"]["sheet-kernel"]
    code, _ = run_cfg(tmp_path, {"version": 1, "kind": "sheet",
                                 "params": {"eps_ladder": fam["eps_ladder"], "m": 60}}, "sheet")
    assert code == 0
    code, _ = run_cfg(tmp_path, {"version": 1, "kind": "chaos2-report",
                                 "params": {"family": "sheet-kernel", "eps": fam["eps_ladder"][0], "m": 60}},
                      "fam")
    assert code == 0
    for kind in inv["experiment_kinds"]:
        assert kind in cli.PLANNERS


def test_tabulated_pair(tmp_path):
    import math
    rows = ["lambda,value"] + [f"{x},{1 / (math.pi * (1 + x * x))!r}" for x in
                               [k * 0.05 for k in range(0, 801)]]
    (tmp_path / "f.csv").write_text("\n".join(rows) + "\n")
    code, out = run_cfg(tmp_path, {"version": 1, "kind": "toeplitz",
                                   "params": {"tabulated": {"f": "f.csv", "g": "f.csv", "tail_exponent": 2.0},
                                              "T_ladder": [5.0], "m": 40, "jmax": 2}})
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["sigma2_inf"]["value"] == pytest.approx(5.0, rel=1e-3)


def test_breuer_major_report(tmp_path):
    code, out = run_cfg(tmp_path, {"version": 1, "kind": "breuer-major", "seed": 4,
                                   "params": {"H": 0.5, "q": 2, "T_ladder": [10.0, 20.0], "n": 20000,
                                              "mesh_levels": 2}})
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["sigma2_inf"]["value"] == pytest.approx(4 / 3, abs=1e-9)
    assert rep["gamma_hat"]["value"] < 0
    assert len(rep["mesh_halving"]) == 2
    assert "derivative_covariance" in rep["horizons"][0]["monte_carlo"]
    all_numbers_have_source(rep)
    lines = (out / "curves.csv").read_text().splitlines()
    assert lines[0] == "T,z,measured,se,predicted,underpowered"
    assert len(lines) == 11
    assert "-0," not in "\n".join(lines)


def test_main_entry(capsys, tmp_path):
    assert cli.main(["list-builtins"]) == 0
    assert "cauchy-pair" in capsys.readouterr().out
    assert cli.main(["bogus"]) == 2
    p = write(tmp_path, {"version": 1, "kind": "stein-check", "params": {"orders": [2], "z_grid": [0.0]}})
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o"), "--seed", "3", "--workers", "2"]) == 0


def test_shipped_configs_validate():
    from pathlib import Path
    root = Path(__file__).resolve().parent.parent / "configs"
    files = sorted(root.glob("*.json"))
    assert files
    for f in files:
        cfg = cli.load_config(f)
        ctx = cli.Context(cli.RandomSource(0), 1, f.parent)
        cli.PLANNERS[cfg["kind"]](cfg.get("params", {}), ctx)
