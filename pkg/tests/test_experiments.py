import json
import math

import numpy as np
import pytest

from semiwave.cli import main
from semiwave.experiments import (InitialData, SGrid, Scenario, StageError, criterion_experiment,
                                  criterion_summary, gaussian_fixture, hardy_experiment,
                                  hardy_family, hardy_verdict_from, load_config,
                                  ode_exact_scenario, rate_experiment, run_scenario,
                                  scenario_from_config, scenario_to_config)
from semiwave.model import ProblemSpec
from semiwave.wave_solver import Grid, Policy

SPEC = ProblemSpec(p=3, q=2)
KAPPA = math.sqrt(2)


def test_ode_exact_all_pass(ode_exact_run):
    res = ode_exact_run
    assert res.bundle.status == "pass"
    assert abs(res.cone.T0 - 1.0) < 1e-4
    H = [r.H for r in res.reports]
    assert all(b < a for a, b in zip(H, H[1:]))
    assert max(r.D for r in res.reports) < 1e-6
    assert all(abs(r.E0 - 4 / 3) < 1e-4 for r in res.reports)


def test_ode_exact_scaled_norm(ode_exact_run):
    # (T-t)^{2/(p-1)} ||u||_{L2(B)} / (T-t)^{1/2} = kappa * sqrt(|B|) = 2 for N = 1
    rows, v = rate_experiment(ode_exact_run.scenario, ode_exact_run)
    phys = np.array([r["phys_u"] for r in rows])
    assert np.all(np.abs(phys - KAPPA * math.sqrt(2)) < 1e-4)
    assert v.passed


def test_fixture_lyapunov_and_rate(fixture_run):
    b = fixture_run.bundle
    assert b.verdicts["lyapunov"].status == "pass"
    assert b.verdicts["lyapunov"].threshold_s is not None
    assert b.verdicts["rate_window"].status == "pass"
    assert b.verdicts["rate_window"].details["agree"]
    assert b.status == "pass" and b.exit_code == 0


def test_fixture_sensitivity_reported(fixture_run):
    sens = fixture_run.bundle.notes["T0_sensitivity"]
    assert set(sens) == {"T0-1%", "T0+1%"}
    for entry in sens.values():
        assert entry["status"] in ("pass", "fail", "inconclusive", "skipped")


def test_fixture_frames_near_kappa(fixture_run):
    last = fixture_run.frames[-1]
    mid = len(last.w) // 2
    assert abs(last.w[mid] - KAPPA) < 0.01


def test_zero_data_scenario():
    sc = Scenario(spec=SPEC, initial=InitialData("zero"), grid=Grid.line(3.0, 1 / 32),
                  policy=Policy(max_steps=500))
    res = run_scenario(sc)
    assert res.cone is None
    assert res.bundle.status == "inconclusive" and res.bundle.exit_code == 3
    with pytest.raises(ValueError, match="no blow-up point"):
        rate_experiment(sc, res)


def test_criterion_zero_amplitude():
    row = criterion_experiment(SPEC, InitialData("constant"), [0.0])[0]
    assert row["H"] > 0 and not row["blew_up"]


def test_criterion_constant_sweep():
    amps = [0, 1, 2, 3, 4, 5, 6, 8]
    rows = criterion_experiment(SPEC, InitialData("constant"), amps)
    for r in rows:
        c = r["amplitude"]
        # u_t = 0 at s3 = 0 gives w_s = -c, so E = (4/3)(5c^2/2 - c^4/4)
        assert r["E"] == pytest.approx(4 / 3 * (2.5 * c**2 - c**4 / 4), abs=1e-10)
    neg = [r for r in rows if r["H"] < 0]
    assert len(neg) >= 3
    assert all(r["blew_up"] for r in neg)
    assert criterion_summary(rows).passed


def test_criterion_gaussian_family():
    rows = criterion_experiment(SPEC, InitialData("gaussian", width=1.0), [0.5, 5.0, 10.0],
                                grid=Grid.line(3.0, 1 / 128))
    assert all(r["implication_ok"] for r in rows)
    assert rows[-1]["H"] < 0 and rows[-1]["blew_up"]


def test_hardy_family_size_and_stability():
    assert len(hardy_family(1.0)) == 50
    res = hardy_experiment(1.0, 64)
    v = hardy_verdict_from(res)
    assert v.passed
    assert res["cap"] < 10


def test_stage_error_names_stage():
    sc = ode_exact_scenario()
    sc.s_grid = SGrid(1.0, 4.0, 0.1, min_cone_nodes=10_000)
    with pytest.raises(StageError) as exc:
        run_scenario(sc)
    assert exc.value.stage == "cone"


def test_contamination_downgrades():
    sc = ode_exact_scenario()
    sc.grid = Grid.line(1.0, 1 / 64, "reflecting")
    res = run_scenario(sc)
    assert res.trace.contaminated
    assert res.bundle.status == "inconclusive"
    assert all(v.status != "pass" for v in res.bundle.verdicts.values())


def test_config_round_trip(tmp_path):
    sc = gaussian_fixture()
    path = tmp_path / "s.ini"
    path.write_text(scenario_to_config(sc))
    back = scenario_from_config(load_config(path))
    assert back.spec == sc.spec
    assert back.grid == sc.grid
    assert back.initial == sc.initial
    assert back.s_grid == sc.s_grid and back.cone == "auto"


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_scenario(ode_exact_scenario(), a)
    run_scenario(ode_exact_scenario(), b)
    for name in ("functionals.csv", "rate_window.csv", "trace/supnorm.csv", "verdicts.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    first = (a / "functionals.csv").read_text().splitlines()[1].split(",")
    assert all(v == f"{float(v):.17g}" for v in first)


# -- command line ---------------------------------------------------------

ODE_INI = """
[problem]
p = 3.0
q = 2.0
[ode]
v0 = 1.0
v1 = 0.0
"""

EXACT_INI = """
[problem]
p = 3.0
q = 2.0
[initial]
kind = ode_exact
T = 1.0
[grid]
L = 2.0
h = 1/64
boundary = reflecting
[similarity]
stop_offset = 4.0
"""


def _cfg(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_ode(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["ode", "--config", _cfg(tmp_path, ODE_INI), "--out", str(out)]) == 0
    rep = json.loads((out / "fit.json").read_text())
    assert abs(rep["kappa_est"] - KAPPA) / KAPPA < 0.01
    assert (out / "ode_trace.csv").exists()
    assert "kappa" in capsys.readouterr().out


def test_cli_evolve_then_similarity(tmp_path):
    cfg = _cfg(tmp_path, EXACT_INI)
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "ev")]) == 0
    man = json.loads((tmp_path / "ev" / "trace" / "manifest.json").read_text())
    assert abs(man["cone"]["T0"] - 1) < 1e-4
    code = main(["similarity", "--config", cfg, "--trace", str(tmp_path / "ev" / "trace"),
                 "--out", str(tmp_path / "sim")])
    assert code == 0
    assert (tmp_path / "sim" / "functionals.csv").exists()
    assert len(list((tmp_path / "sim" / "frames").glob("*.csv"))) == len(man["s_values"])
    code = main(["verify-lyapunov", "--config", cfg, "--trace", str(tmp_path / "ev" / "trace"),
                 "--out", str(tmp_path / "vl")])
    assert code == 0
    v = json.loads((tmp_path / "vl" / "verdicts.json").read_text())
    assert v["verdicts"]["lyapunov"]["status"] == "pass"


def test_cli_rate_and_run(tmp_path):
    cfg = _cfg(tmp_path, EXACT_INI)
    assert main(["rate", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "all")]) == 0
    v = json.loads((tmp_path / "all" / "verdicts.json").read_text())
    assert set(v["verdicts"]) == {"lyapunov", "criterion", "rate_window", "spacetime_Lp1",
                                  "corollary31", "hardy"}


def test_cli_criterion_and_hardy(tmp_path):
    cfg = _cfg(tmp_path, "[problem]\np = 3\nq = 2\n[criterion]\namplitudes = 0, 4, 5, 6\n")
    assert main(["criterion", "--config", cfg, "--out", str(tmp_path / "c")]) == 0
    lines = (tmp_path / "c" / "criterion.csv").read_text().splitlines()
    assert len(lines) == 5
    assert main(["hardy", "--config", cfg, "--out", str(tmp_path / "h")]) == 0


def test_cli_inconclusive_on_contamination(tmp_path):
    cfg = _cfg(tmp_path, EXACT_INI.replace("L = 2.0", "L = 1.0"))
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "x")]) == 3


def test_cli_fail_exit_code(tmp_path):
    # a tolerance no fit can meet turns the kappa verdict into a failure
    cfg = _cfg(tmp_path, ODE_INI + "kappa_rtol = 1e-15\n")
    assert main(["ode", "--config", cfg, "--out", str(tmp_path / "f")]) == 2


def test_cli_bad_config(tmp_path, capsys):
    cfg = _cfg(tmp_path, "[problem]\np = 3\nq = 5\n")
    assert main(["ode", "--config", cfg, "--out", str(tmp_path / "b")]) == 1
    assert "error" in capsys.readouterr().err
