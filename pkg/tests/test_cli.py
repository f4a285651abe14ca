from __future__ import annotations

import csv
import io
import json

import pytest

from orbitindex.cli import main
from orbitindex.errors import ConfigError
from orbitindex.scenario import ScenarioConfig, load_config, parse_pairs


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_config_parsing(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("# scenario\nN = 256\nk = 0.5  # energy\nprofile = f2\n")
    cfg = load_config(str(f), ["epsilon=2e-3"])
    assert (cfg.N, cfg.k, cfg.profile, cfg.epsilon) == (256, 0.5, "f2", 2e-3)


@pytest.mark.parametrize("line", ["N = 300", "N = 8192", "epsilon = 0", "bogus = 1", "N = many", "no equals"])
def test_bad_config(line):
    with pytest.raises(ConfigError):
        parse_pairs([line])


def test_config_exit_code(capsys):
    code, _, err = run(capsys, "indices", "run", "--set", "N=100")
    assert code == 4 and "power of two" in err


def test_profile_validate(capsys):
    code, out, _ = run(capsys, "profile", "validate")
    rep = json.loads(out)
    assert code == 0 and rep["validation"]["passed"]
    assert rep["version"] and rep["config"]["profile"] == "fstar"


def test_corrupted_anchor_exits_at_validation(capsys):
    code, _, err = run(capsys, "profile", "validate", "--set", "fstar_anchor=2,0.9,0.25")
    assert code == 2
    code, _, err = run(capsys, "scenario", "paper-s2", "--set", "fstar_anchor=2,0.9,0.25")
    assert code == 2 and "f'(2)=1" in err


def test_orbit_find_writes_trajectory(capsys, tmp_path):
    path = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "orbit", "find", "--trajectory-csv", str(path))
    assert code == 0
    assert json.loads(out)["orbit"]["rho"] == pytest.approx(2.0, abs=1e-10)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "r", "theta", "rdot", "thetadot", "E", "J"] and len(rows) == 4098


def test_cylinder_scan(capsys):
    code, out, _ = run(capsys, "cylinder", "scan", "--set", "k_min=0.48", "--set", "k_max=0.52", "--set", "k_count=5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 5
    assert [float(r["k"]) for r in rows] == sorted(float(r["k"]) for r in rows)
    mid = rows[2]
    assert float(mid["k"]) == 0.5 and int(mid["chi"]) == -1
    assert float(mid["Tprime"]) == pytest.approx(4 * 3.141592653589793, rel=1e-8)


def test_empty_scan(capsys):
    code, out, _ = run(capsys, "cylinder", "scan", "--set", "k_count=0")
    assert code == 0 and out.strip() == "k,rho,a,T,Tprime,chi,status"


def test_scenario_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "scenario", "paper-s2", "--out", str(a))[0] == 0
    assert run(capsys, "scenario", "paper-s2", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    s, t = rep["orbits"]["fstar"], rep["orbits"]["f2"]
    assert (s["chi"], t["chi"]) == (-1, 1)
    assert (s["i_free"] - s["i_T"], t["i_free"] - t["i_T"]) == (1, 0)
    assert rep["config"] == ScenarioConfig().as_dict()


def test_scenario_indices_stable_in_N(capsys, tmp_path):
    def indices(N):
        path = tmp_path / f"{N}.json"
        assert run(capsys, "scenario", "paper-s2", "--set", f"N={N}", "--out", str(path))[0] == 0
        rep = json.loads(path.read_text())["orbits"]
        return {k: (v["i_T"], v["i_free"], v["mu_cz"], v["mu_rab"]) for k, v in rep.items()}

    assert indices(256) == indices(1024)


def test_indices_run_f2(capsys):
    code, out, _ = run(capsys, "indices", "run", "--set", "profile=f2", "--set", "N=256")
    res = json.loads(out)["orbit"]
    assert code == 0 and res["mu_cz"] == "7/2" and res["mu_rab"] == "3"


def test_selftest_and_fault_injection(capsys):
    code, out, _ = run(capsys, "selftest", "--set", "trials=40")
    assert code == 0 and json.loads(out)["passed"]
    code, out, err = run(capsys, "selftest", "--set", "trials=10", "--flip-crossing-sign")
    assert code == 3 and "shear_calibration" in err
    assert json.loads(out)["failed"] == ["shear_calibration"]
