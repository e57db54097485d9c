import csv
import json

import numpy as np
import pytest

from pgibbs.cli import main, read_obs
from pgibbs.errors import ConfigError
from pgibbs.models import FiniteHMM, StochVolModel
from pgibbs.ssm import simulate


@pytest.fixture
def sv_obs(tmp_path):
    _, y = simulate(StochVolModel(0.9, 0.3, 0.7), 8, 0)
    p = tmp_path / "y.csv"
    p.write_text("t,y\n" + "".join(f"{t},{float(v)!r}\n" for t, v in enumerate(y.ravel())))
    return p


@pytest.fixture
def hmm_obs(tmp_path):
    p = tmp_path / "yd.csv"
    p.write_text("t,y\n0,0\n1,1\n")
    return p


def test_read_obs_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,value\n0,1\n")
    with pytest.raises(ConfigError):
        read_obs(p)


def test_smc_run(sv_obs, capsys):
    assert main(["--seed", "3", "smc", "run", "--model", "sv", "--particles", "50", "--obs", str(sv_obs)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert np.isfinite(out["log_likelihood_estimate"])
    assert main(["smc", "run", "--model", "sv", "--particles", "50", "--obs", str(sv_obs), "--seed", "3"]) == 0
    assert json.loads(capsys.readouterr().out) == out


def test_smc_bad_particles(sv_obs, capsys):
    assert main(["smc", "run", "--model", "sv", "--particles", "0", "--obs", str(sv_obs)]) == 2
    assert "InvalidN" in capsys.readouterr().err


def test_pg_run_writes_csv(sv_obs, tmp_path):
    out = tmp_path / "o"
    rc = main(["pg", "run", "--model", "sv", "--particles", "20", "--iters", "5", "--obs", str(sv_obs),
               "--chains", "2", "--out", str(out)])
    assert rc == 0
    files = sorted(p.name for p in out.iterdir())
    assert files


def test_invariance_check(capsys):
    assert main(["pg", "invariance-check", "--grid", "tiny", "--seeds", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[-1] == "PASS overall" and all(line.startswith("PASS") for line in lines)


def test_minorize_bounds(capsys):
    assert main(["minorize", "bounds", "--kind", "fully-adapted", "--sigma-minus", "1", "--sigma-plus", "1",
                 "--lambda", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["floor"] == pytest.approx(0.367879, abs=1e-6)


def test_minorize_exact_and_enumerate(hmm_obs, capsys):
    assert main(["minorize", "exact", "--model", "mixing-hmm", "--obs", str(hmm_obs), "--particles", "3"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert len(rep["B"]) == 2 and 0 < rep["epsilon"] <= 1
    assert main(["oracle", "enumerate", "--model", "mixing-hmm", "--obs", str(hmm_obs), "--particles", "2"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["from", "00", "01", "10", "11"]
    P = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    assert np.allclose(P.sum(axis=1), 1, atol=1e-12)


def test_oracle_rejects_continuous(sv_obs):
    assert main(["oracle", "enumerate", "--model", "sv", "--obs", str(sv_obs), "--particles", "2"]) == 2


def test_run_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "constants"}))
    assert main(["--config", str(cfg), "run", "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "constants.json").exists()
    capsys.readouterr()
    assert main(["--seed", "5", "--config", str(cfg), "run"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 5
    cfg.write_text(json.dumps({"kind": "constants", "seed": 3}))
    assert main(["--config", str(cfg), "run"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 3
    assert main(["run"]) == 2
    cfg.write_text(json.dumps({"kind": "scaling", "params": {"gamma": 0.6}}))
    assert main(["--config", str(cfg), "run"]) == 2


def test_scaling_rejects_gamma(capsys):
    assert main(["scaling", "sweep", "--model", "sv", "--gamma", "0.5", "--alpha", "0.5", "--Ts", "5"]) == 2
