import json
import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from semiwave.model import PerturbationF, PerturbationG, ProblemSpec
from semiwave.ode import (estimate_blowup_time, fit_rate, fit_report, integrate_ode,
                          inverse_power_fit, value_at, write_fit_json, write_trace_csv)

SQRT2 = math.sqrt(2.0)


def _oracle_T(spec_rhs, v0, v1, threshold=1e8):
    """Adaptive DOP853 run to the threshold, tightening rtol until T settles."""
    def hit(t, y):
        return y[0] - threshold
    hit.terminal = True
    last = None
    for rtol in (1e-9, 1e-11, 1e-13):
        sol = solve_ivp(lambda t, y: [y[1], spec_rhs(y[0], y[1])], (0, 100), [v0, v1],
                        method="DOP853", rtol=rtol, atol=1e-12, events=hit)
        T = sol.t_events[0][0]
        if last is not None and abs(T - last) < 1e-8:
            break
        last = T
    return T


@pytest.fixture(scope="module")
def exact_trace():
    return integrate_ode(ProblemSpec(p=3, q=2), SQRT2, SQRT2, output_times=(0.5,))


@pytest.fixture(scope="module")
def rest_trace():
    return integrate_ode(ProblemSpec(p=3, q=2), 1.0, 0.0)


def test_exact_solution_midpoint(exact_trace):
    v, vp = value_at(exact_trace, 0.5)
    assert abs(v - 2 * SQRT2) <= 1e-8
    assert abs(vp - 4 * SQRT2) <= 1e-7


def test_exact_solution_time_and_rate(exact_trace):
    fit = estimate_blowup_time(exact_trace, 3.0)
    assert fit.reliable
    assert abs(fit.T - 1.0) <= 1e-6
    assert abs(fit_rate(exact_trace, fit.T, 3.0) - SQRT2) <= 1e-8


def test_rest_start_matches_adaptive_oracle(rest_trace):
    T_oracle = _oracle_T(lambda v, w: v**3, 1.0, 0.0)
    fit = estimate_blowup_time(rest_trace, 3.0)
    assert fit.reliable
    assert abs(fit.T - T_oracle) <= 1e-5


def test_rest_start_matches_energy_integral(rest_trace):
    # v'^2/2 = (v^4 - 1)/4 gives T = ∫_1^∞ dv / sqrt((v^4 - 1)/2)
    T_exact, _ = quad(lambda v: 1 / math.sqrt((v**4 - 1) / 2), 1, np.inf, epsabs=1e-13)
    assert abs(estimate_blowup_time(rest_trace, 3.0).T - T_exact) <= 1e-8


def test_rest_start_rate(rest_trace):
    T = estimate_blowup_time(rest_trace, 3.0).T
    assert abs(fit_rate(rest_trace, T, 3.0) - SQRT2) / SQRT2 <= 0.01


def test_zero_data_is_equilibrium():
    tr = integrate_ode(ProblemSpec(p=3, q=2), 0.0, 0.0)
    assert not tr.reached_threshold
    assert np.all(tr.v == 0)
    assert tr.status.startswith("no blow-up detected")
    assert not estimate_blowup_time(tr, 3.0).reliable


def test_oscillatory_perturbation_keeps_rate():
    spec = ProblemSpec(p=3, q=2, f=PerturbationF.bounded_osc(1.0))
    tr = integrate_ode(spec, 5.0, 0.0)
    T_oracle = _oracle_T(lambda v, w: v**3 + math.sin(v), 5.0, 0.0)
    fit = estimate_blowup_time(tr, 3.0)
    assert abs(fit.T - T_oracle) <= 1e-5
    assert abs(fit_rate(tr, fit.T, 3.0) - SQRT2) / SQRT2 <= 0.02


def test_truncated_trace_is_unreliable():
    tr = integrate_ode(ProblemSpec(p=3, q=2), 1.0, 0.0, max_steps=50)
    assert not tr.reached_threshold
    fit = estimate_blowup_time(tr, 3.0)
    assert not fit.reliable
    assert fit.reason == "threshold not reached"


def test_fit_requires_window_points():
    t = np.array([0.0, 0.1])
    fit = inverse_power_fit(t, np.array([1e3, 1e4]), 3.0)
    assert not fit.reliable


@pytest.mark.parametrize("p", [2.0, 3.0, 5.0])
def test_fit_recovers_synthetic_profile(p):
    from semiwave.model import kappa_of
    t = 1 - np.geomspace(1, 1e-12, 400)
    v = kappa_of(p) * (1 - t) ** (-2 / (p - 1))
    fit = inverse_power_fit(t, v, p)
    assert fit.reliable
    assert abs(fit.T - 1) < 1e-9


def test_output_times_hit_exactly():
    tr = integrate_ode(ProblemSpec(p=3, q=2), 1.0, 0.0, output_times=(0.3, 1.2))
    assert 0.3 in tr.times and 1.2 in tr.times
    with pytest.raises(KeyError):
        value_at(tr, 0.31)


def test_threshold_validation():
    with pytest.raises(ValueError):
        integrate_ode(ProblemSpec(p=3, q=2), 10.0, 0.0, stop_threshold=5.0)


def test_exports(tmp_path, exact_trace):
    write_trace_csv(exact_trace, tmp_path / "t.csv")
    data = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1], exact_trace.v)
    write_fit_json(exact_trace, tmp_path / "f.json")
    rep = json.loads((tmp_path / "f.json").read_text())
    assert rep["reliable"] and abs(rep["T"] - 1) < 1e-6
    assert fit_report(exact_trace)["kappa"] == pytest.approx(SQRT2)


def test_blowup_time_fourth_order_in_dt0():
    spec = ProblemSpec(p=3, q=2)
    T = [estimate_blowup_time(integrate_ode(spec, 1.0, 0.0, dt0=dt), 3.0).T
         for dt in (4e-3, 2e-3, 1e-3)]
    assert abs(T[0] - T[1]) / abs(T[1] - T[2]) >= 8


def test_rate_at_lower_threshold():
    tr = integrate_ode(ProblemSpec(p=3, q=2), 1.0, 0.0, stop_threshold=1e6)
    fit = estimate_blowup_time(tr, 3.0)
    assert fit.reliable
    assert abs(fit_rate(tr, fit.T, 3.0) - SQRT2) / SQRT2 <= 0.01


@pytest.mark.parametrize("f", [PerturbationF.zero(), PerturbationF.power_q(1.0),
                               PerturbationF.power_q(-1.0), PerturbationF.bounded_osc(-1.0)])
@pytest.mark.parametrize("g", [PerturbationG.zero(), PerturbationG.linear(1.0),
                               PerturbationG.linear(-1.0), PerturbationG.saturating(1.0)])
def test_rate_robust_to_perturbations(f, g):
    tr = integrate_ode(ProblemSpec(p=3, q=2, f=f, g=g), 2.0, 0.0)
    fit = estimate_blowup_time(tr, 3.0)
    assert fit.reliable, fit.reason
    assert abs(fit_rate(tr, fit.T, 3.0) - SQRT2) / SQRT2 <= 0.02
