import json
import os

import jsonschema
import numpy as np
import pytest

from pyramid_eq.cli import ConfigError, load_scenario, main

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "pyramid_eq", "schemas")

BASE = """
[params]
theta = 0.5
theta_prime = 0.5
N = 10
N_prime = 10
c = 0.5
k_top = 1.0

[bE]
kind = "exponential"

[bL]
kind = "exponential"

[grid]
n = 12

[alpha]
density = "uniform"

[solver]
delta = 0.0

[outputs]
directory = "out"

[run]
seed = 3

[gurus]
population = 110

[sweep]
N = [2.0, 10.0]
theta = [0.5]
"""


def write_config(tmp_path, text=BASE, name="scenario.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def load_schema(name):
    with open(os.path.join(SCHEMA_DIR, name), "r", encoding="utf-8") as fh:
        return json.load(fh)


def test_solve_writes_artifacts_and_validates_schemas(tmp_path):
    cfg_path = write_config(tmp_path)
    assert main(["solve", "--config", cfg_path, "--quiet"]) == 0
    out = tmp_path / "out"
    for fname in ("wages.csv", "matching_eps.csv", "matching_lambda.csv",
                  "duality.json", "occupations.json", "specialization.json"):
        assert (out / fname).exists(), fname
    duality = json.loads((out / "duality.json").read_text())
    jsonschema.validate(duality, load_schema("duality.schema.json"))
    assert duality["converged"] is True
    assert duality["lp"]["gap"] <= 1e-6
    occ = json.loads((out / "occupations.json").read_text())
    jsonschema.validate(occ, load_schema("occupations.schema.json"))
    spec = json.loads((out / "specialization.json").read_text())
    jsonschema.validate(spec, load_schema("specialization.schema.json"))
    wages = np.loadtxt(out / "wages.csv", delimiter=",", skiprows=1)
    assert wages.shape == (12, 7)


def test_bad_theta_exits_one_with_bound_name(tmp_path, capsys):
    cfg_path = write_config(tmp_path, BASE.replace("theta = 0.5", "theta = 1.2", 1))
    assert main(["solve", "--config", cfg_path]) == 1
    err = capsys.readouterr().err
    assert "theta = 1.2" in err and "0 < theta < 1" in err
    assert ":3:" in err  # line-referenced message


def test_unwritable_output_dir_exits_one(tmp_path):
    cfg_path = write_config(tmp_path)
    blocked = tmp_path / "blocked"
    blocked.write_text("a regular file where the output directory should go\n")
    code = main(["solve", "--config", cfg_path, "--out", str(blocked / "sub"), "--quiet"])
    assert code == 1


def test_single_node_scenario_gap_zero(tmp_path):
    text = BASE.replace("N = 10", "N = 2").replace("N_prime = 10", "N_prime = 1")
    text = text.replace("c = 0.5", "c = 0.0").replace("n = 12", "n = 1")
    cfg_path = write_config(tmp_path, text)
    assert main(["solve", "--config", cfg_path, "--quiet"]) == 0
    duality = json.loads((tmp_path / "out" / "duality.json").read_text())
    assert duality["lp"]["gap"] <= 1e-9
    assert duality["lp"]["value"] == pytest.approx(0.25, abs=1e-12)


def test_determinism_bit_identical(tmp_path):
    cfg_path = write_config(tmp_path)
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    for args in (["--out", str(out1)], ["--out", str(out2)]):
        assert main(["solve", "--config", cfg_path, "--quiet", *args]) == 0
        assert main(["phase", "--config", cfg_path, "--quiet", *args]) == 0
        assert main(["gurus", "--config", cfg_path, "--quiet", *args]) == 0
        assert main(["sweep", "--config", cfg_path, "--quiet", *args]) == 0
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    for name in names:
        b1 = (out1 / name).read_bytes()
        b2 = (out2 / name).read_bytes()
        assert b1 == b2, f"{name} differs between identical runs"


def test_gurus_artifacts_and_inadmissible(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    assert main(["gurus", "--config", cfg_path, "--quiet"]) == 0
    h = json.loads((tmp_path / "out" / "hierarchy.json").read_text())
    jsonschema.validate(h, load_schema("hierarchy.schema.json"))
    assert h["levels"][0] == [90, 9, 11]
    tree = (tmp_path / "out" / "hierarchy.txt").read_text()
    assert "110 = 90 + 9 + (9 + 1 + 1)" in tree

    bad = write_config(tmp_path, BASE.replace("population = 110", "population = 117"),
                       name="bad.toml")
    assert main(["gurus", "--config", bad, "--quiet"]) == 1
    err = capsys.readouterr().err
    assert "nearest admissible" in err and "110" in err


def test_phase_requires_solve_artifacts(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    assert main(["phase", "--config", cfg_path, "--quiet",
                 "--out", str(tmp_path / "fresh")]) == 1
    assert "run solve first" in capsys.readouterr().err
    assert main(["phase", "--config", cfg_path, "--quiet", "--solve",
                 "--out", str(tmp_path / "fresh")]) == 0
    report = json.loads((tmp_path / "fresh" / "phase.json").read_text())
    jsonschema.validate(report, load_schema("phase.schema.json"))
    for fname in ("v.svg", "vprime_loglog.svg", "density.svg"):
        data = (tmp_path / "fresh" / fname).read_text()
        assert data.startswith("<svg ") and data.rstrip().endswith("</svg>")


def test_sweep_rows_and_regimes(tmp_path):
    cfg_path = write_config(tmp_path)
    assert main(["sweep", "--config", cfg_path, "--quiet"]) == 0
    rows = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("N,theta,regime")
    assert len(rows) == 3
    assert rows[1].split(",")[2] == "critical"       # N=2, theta=0.5
    assert rows[2].split(",")[2] == "supercritical"  # N=10, theta=0.5


def test_grid_override_and_delta_override(tmp_path):
    cfg_path = write_config(tmp_path)
    cfg = load_scenario(cfg_path, grid_n_override=7, delta_override=0.125)
    assert cfg.grid.n == 7
    assert cfg.solver.delta == 0.125


def test_tabulated_alpha_roundtrip(tmp_path):
    dens = tmp_path / "alpha.csv"
    rows = ["skill,density"]
    n = 8
    for i in range(n):
        rows.append(f"{i / n},{1.0 + i / n}")
    dens.write_text("\n".join(rows) + "\n")
    text = BASE.replace('density = "uniform"', 'density = "tabulated"\nfile = "alpha.csv"')
    text = text.replace("n = 12", "n = 8")
    cfg_path = write_config(tmp_path, text)
    cfg = load_scenario(cfg_path)
    samples = 1.0 + np.arange(n) / n
    assert cfg.alpha.weights == pytest.approx(samples / samples.sum())


def test_validate_subcommand(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    assert main(["validate", "--config", cfg_path]) == 0
    out = capsys.readouterr().out
    assert "doubling" in out and "ok" in out


def test_config_rejects_unknown_density(tmp_path):
    cfg_path = write_config(tmp_path, BASE.replace('"uniform"', '"gaussianish"'))
    with pytest.raises(ConfigError, match="unknown density"):
        load_scenario(cfg_path)


def test_nonconverged_solve_exits_two_with_artifacts(tmp_path):
    text = BASE.replace("[solver]\ndelta = 0.0",
                        "[solver]\ndelta = 0.0\ntol = 1e-15\nmax_iter = 1")
    cfg_path = write_config(tmp_path, text)
    assert main(["solve", "--config", cfg_path, "--quiet"]) == 2
    duality = json.loads((tmp_path / "out" / "duality.json").read_text())
    assert duality["converged"] is False
    assert (tmp_path / "out" / "wages.csv").exists()


def test_sweep_parallelism_is_deterministic(tmp_path, monkeypatch):
    cfg_path = write_config(tmp_path)
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    monkeypatch.delenv("PYRAMID_EQ_THREADS", raising=False)
    assert main(["sweep", "--config", cfg_path, "--quiet", "--out", str(serial)]) == 0
    monkeypatch.setenv("PYRAMID_EQ_THREADS", "3")
    assert main(["sweep", "--config", cfg_path, "--quiet", "--out", str(parallel)]) == 0
    assert (serial / "sweep.csv").read_bytes() == (parallel / "sweep.csv").read_bytes()
