import math

import numpy as np
import pytest

from semiwave.model import ProblemSpec
from semiwave.ode import estimate_blowup_time, integrate_ode, value_at
from semiwave.wave_solver import (ConeSpec, FieldState, Grid, Overflow, Policy, discrete_energy,
                                  estimate_local_blowup_time, evolve_until_blowup,
                                  extract_cone_section, grid_gradient, load_trace, save_trace,
                                  section_from_state, stable_cfl, step)

SPEC = ProblemSpec(p=3, q=2)


def _const(grid, c, ct=0.0):
    n = grid.size
    return FieldState(0.0, np.full(n, c), np.full(n, ct))


def _bump(grid, amp=1.0, width=0.5):
    x = grid.points
    return FieldState(0.0, amp * np.exp(-((x / width) ** 2)), np.zeros_like(x))


@pytest.fixture(scope="module")
def gaussian_trace():
    g = Grid.line(4.0, 1 / 512)
    return evolve_until_blowup(_bump(g, 10.0, 1.0), SPEC, g)


@pytest.fixture(scope="module")
def constant_trace():
    g = Grid.line(3.0, 1 / 64, "reflecting")
    return evolve_until_blowup(_const(g, 1.0), SPEC, g, Policy(snapshot_times=(1.0,)))


def test_zero_state_stays_zero():
    g = Grid.line(1.0, 0.05)
    s = FieldState(0.0, np.zeros(g.size), np.zeros(g.size))
    for _ in range(20):
        s = step(s, SPEC, g, 0.04)
    assert np.all(s.u == 0) and np.all(s.ut == 0)


def test_cfl_violation_raises():
    g = Grid.line(1.0, 0.05)
    with pytest.raises(ValueError, match="CFL"):
        step(_const(g, 0.0), SPEC, g, 0.05)


def test_overflow_raises():
    g = Grid.line(1.0, 0.05)
    with pytest.raises(Overflow):
        step(_const(g, 1e200), SPEC, g, 0.01)


@pytest.mark.parametrize("mode", ["line", "radial"])
def test_constant_data_follows_ode(mode):
    """Error against the ODE at t = 1 shrinks like dt^2."""
    ode = integrate_ode(SPEC, 1.0, 0.0, output_times=(1.0,))
    v_ref, _ = value_at(ode, 1.0)
    errs = []
    for h in (1 / 32, 1 / 64):
        g = Grid.line(3.0, h, "reflecting") if mode == "line" else Grid.radial(3, 3.0, h, "reflecting")
        tr = evolve_until_blowup(_const(g, 1.0), SPEC, g,
                                 Policy(snapshot_times=(1.0,), t_max=1.0, nl_factor=10.0))
        u = tr.snapshot_at(1.0).u
        assert np.ptp(u) <= 1e-12 * abs(u[0])
        errs.append(abs(u[0] - v_ref))
    assert errs[1] < 1e-3
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_self_convergence_order():
    T = 0.5
    sol = {}
    for k in (128, 256, 512):
        g = Grid.line(4.0, 1 / k)
        tr = evolve_until_blowup(_bump(g, 1.0, 0.5), SPEC, g,
                                 Policy(snapshot_times=(T,), t_max=T, nl_factor=10.0))
        sol[k] = tr.snapshot_at(T).u
    e1 = np.max(np.abs(sol[128] - sol[256][::2]))
    e2 = np.max(np.abs(sol[256][::2] - sol[512][::4]))
    assert abs(math.log2(e1 / e2) - 2.0) <= 0.1


def test_linear_shadow_energy_conserved():
    g = Grid.line(1.0, 1 / 64, "periodic")
    x = g.points
    s = FieldState(0.0, np.sin(math.pi * x) + 0.3 * np.cos(3 * math.pi * x), np.cos(2 * math.pi * x))
    dt = 0.8 * g.h
    e0 = discrete_energy(s, g, dt)
    for _ in range(2000):
        s = step(s, SPEC, g, dt, linear=True)
    assert abs(discrete_energy(s, g, dt) - e0) <= 1e-12 * e0


def test_stable_cfl_values():
    assert stable_cfl("line", 1) == pytest.approx(1.0)
    # origin stencil of the radial Laplacian: spectral radius 6/h^2 for N = 3
    assert stable_cfl("radial", 3) == pytest.approx(2 / math.sqrt(6), rel=1e-6)
    assert stable_cfl("radial", 5) < stable_cfl("radial", 3) < stable_cfl("radial", 2)


def test_large_constant_blows_up_at_ode_time():
    g = Grid.line(3.0, 1 / 32, "reflecting")
    tr = evolve_until_blowup(_const(g, 5.0), SPEC, g, Policy(u_max=1e6))
    assert tr.blew_up and tr.supnorm[-1] >= 1e6
    ode = integrate_ode(SPEC, 5.0, 0.0, stop_threshold=1e6)
    assert abs(tr.times[-1] - ode.times[-1]) < 1e-4
    T_ode = estimate_blowup_time(ode, 3.0).T
    assert abs(tr.local_blowup[tr.x_observe] - T_ode) < 1e-4


def test_zero_data_runs_out_of_steps():
    g = Grid.line(1.0, 1 / 32)
    tr = evolve_until_blowup(_const(g, 0.0), SPEC, g, Policy(max_steps=300))
    assert not tr.blew_up
    assert tr.stop_reason == "max_steps reached"
    assert len(tr.times) == 301
    fit = estimate_local_blowup_time(tr, 0.0, 3.0)
    assert not fit.reliable and fit.reason.startswith("not blowing up here")


def test_constant_run_local_times_agree(constant_trace):
    T_ode = estimate_blowup_time(integrate_ode(SPEC, 1.0, 0.0), 3.0).T
    Ts = [estimate_local_blowup_time(constant_trace, x, 3.0).T for x in (-1.0, 0.0, 0.5, 2.0)]
    assert np.ptp(Ts) <= 1e-12
    assert abs(Ts[0] - T_ode) <= 1e-4


def test_gaussian_fixture_clean_blowup(gaussian_trace):
    tr = gaussian_trace
    assert tr.blew_up and not tr.contaminated
    assert tr.x_observe == 0.0
    assert 0.18 < tr.local_blowup[0.0] < 0.19


def test_gaussian_blowup_time_minimal_at_centre(gaussian_trace):
    h = gaussian_trace.grid.h
    Ts = [estimate_local_blowup_time(gaussian_trace, k * h, 3.0) for k in (0, 4, 8, 16)]
    assert all(f.reliable for f in Ts)
    vals = [f.T for f in Ts]
    assert vals == sorted(vals) and vals[0] < vals[-1]
    assert vals[0] == pytest.approx(gaussian_trace.local_blowup[0.0])


def test_short_domain_is_contaminated():
    g = Grid.line(1.0, 1 / 64, "reflecting")
    tr = evolve_until_blowup(_const(g, 1.0), SPEC, g)
    assert tr.blew_up and tr.contaminated


def test_section_of_constant_run(constant_trace):
    sec = extract_cone_section(constant_trace, ConeSpec(0.0, 1.85), 1.0)
    assert np.ptp(sec.u) == 0
    assert np.all(np.abs(sec.ux) <= 1e-12)
    assert np.all(np.abs(sec.x) < 0.85)


def test_section_below_grid_spacing(constant_trace):
    h = constant_trace.grid.h
    sec = extract_cone_section(constant_trace, ConeSpec(0.3 * h, 1.0 + 0.2 * h), 1.0)
    assert len(sec.x) == 1 and sec.x[0] == 0.0


def test_section_on_nodes_is_exact(gaussian_trace):
    g = gaussian_trace.grid
    T0 = gaussian_trace.local_blowup[0.0]
    t = T0 - 0.1
    tr = evolve_until_blowup(_bump(g, 10.0, 1.0), SPEC, g, Policy(snapshot_times=(t,), t_max=t))
    snap = tr.snapshot_at(t)
    cone = ConeSpec(0.0, T0)
    sec = extract_cone_section(tr, cone, t)
    idx = np.flatnonzero(np.abs(g.points) < 0.1)
    assert np.array_equal(sec.u, snap.u[idx])
    for kind in ("linear", "cubic"):
        sec2 = extract_cone_section(tr, cone, t, g.points[idx], kind)
        assert np.max(np.abs(sec2.u - snap.u[idx])) <= 1e-12 * np.max(np.abs(snap.u))


def test_section_leaving_grid_rejected(constant_trace):
    with pytest.raises(ValueError):
        extract_cone_section(constant_trace, ConeSpec(2.5, 2.0), 1.0)


def test_radial_gradient_and_section():
    g = Grid.radial(3, 2.0, 1 / 64)
    r = g.points
    u = np.exp(-r**2)
    gr = grid_gradient(u, g)
    assert gr[0] == 0
    assert np.max(np.abs(gr[1:-1] + 2 * r[1:-1] * u[1:-1])) < 1e-3
    sec = section_from_state(FieldState(0.0, u, np.zeros_like(u)), g, ConeSpec(0.0, 0.5),
                             np.linspace(0.01, 0.49, 7), "cubic")
    assert np.allclose(sec.u, np.exp(-sec.x**2), atol=1e-7)


def test_snapshot_lookup(constant_trace):
    assert constant_trace.snapshot_at(1.0).t == 1.0
    with pytest.raises(KeyError):
        constant_trace.snapshot_at(0.5)


def test_trace_save_load_round_trip(tmp_path, constant_trace):
    save_trace(constant_trace, tmp_path, {"note": "x"})
    tr, man = load_trace(tmp_path)
    assert man["note"] == "x"
    assert np.array_equal(tr.snapshot_at(1.0).u, constant_trace.snapshot_at(1.0).u)
    assert np.array_equal(tr.supnorm, constant_trace.supnorm)
    assert tr.local_blowup == constant_trace.local_blowup


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid.line(1.0, 0.3)
    with pytest.raises(ValueError):
        Grid("radial", 1.0, 0.1, 3, "periodic")
    assert Grid.line(1.0, 0.25, "periodic").size == 8


def test_finite_propagation_speed():
    g = Grid.line(2.0, 1 / 128)
    x = g.points
    u0 = np.where(np.abs(x) < 0.25, (0.25**2 - x**2) ** 3 * 500, 0.0)
    state = FieldState(0.0, u0, np.zeros_like(x))
    lo, hi = np.flatnonzero(state.u)[[0, -1]]
    dt = 0.5 * g.h
    for _ in range(40):
        state = step(state, SPEC, g, dt)
        new_lo, new_hi = np.flatnonzero(state.u)[[0, -1]]
        assert lo - new_lo <= 1 and new_hi - hi <= 1
        lo, hi = new_lo, new_hi
