"""Explicit leapfrog solver for u_tt = Δu + |u|^{p-1}u + f(u) + g(u_t).

Supports a 1D line and radially symmetric N-D grids. Time steps are capped
both by the CFL number and by the nonlinear time scale max|u|^{-(p-1)/2},
so the run can follow the solution into the blow-up regime and stop at a
threshold instead of overflowing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from ._io import write_csv, write_json
from .model import ProblemSpec, eval_f, eval_g, power
from .ode import BlowupTimeFit, inverse_power_fit

BOUNDARIES = ("absorbing", "reflecting", "periodic")


@dataclass(frozen=True)
class Grid:
    """Uniform grid: ``line`` on [-L, L] or ``radial`` on [0, L] in dimension N."""

    mode: str
    L: float
    h: float
    N: int = 1
    boundary: str = "absorbing"

    def __post_init__(self):
        if self.mode not in ("line", "radial"):
            raise ValueError(f"unknown grid mode {self.mode!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.mode == "radial" and self.boundary == "periodic":
            raise ValueError("radial grids cannot be periodic")
        if self.mode == "line" and self.N != 1:
            raise ValueError("line grids are one-dimensional")
        cells = self.span / self.h
        if abs(cells - round(cells)) > 1e-9 * cells or round(cells) < 2:
            raise ValueError("the grid span must be a whole number (>= 2) of cells")

    @classmethod
    def line(cls, L, h, boundary="absorbing"):
        return cls("line", float(L), float(h), 1, boundary)

    @classmethod
    def radial(cls, N, L, h, boundary="absorbing"):
        return cls("radial", float(L), float(h), int(N), boundary)

    @property
    def span(self):
        return 2 * self.L if self.mode == "line" else self.L

    @property
    def points(self) -> np.ndarray:
        n = int(round(self.span / self.h))
        if self.mode == "radial":
            return self.h * np.arange(n + 1)
        k = np.arange(n) if self.boundary == "periodic" else np.arange(n + 1)
        return -self.L + self.h * k

    @property
    def size(self):
        return len(self.points)

    def edge_distance(self, x0: float) -> float:
        if self.mode == "radial":
            return self.L - abs(x0)
        return self.L - abs(x0)

    def check_cone_room(self, x0: float, T0: float, margin: float) -> None:
        if self.edge_distance(x0) < T0 + margin:
            raise ValueError(
                f"grid half-width {self.L} too small for cone at x0={x0}, T0={T0} (margin {margin})"
            )


@dataclass(frozen=True)
class FieldState:
    t: float
    u: np.ndarray
    ut: np.ndarray


@dataclass(frozen=True)
class ConeSpec:
    x0: float
    T0: float
    delta0: float = 0.5

    def __post_init__(self):
        if not 0 < self.delta0 < 1:
            raise ValueError("delta0 must lie in (0, 1)")
        if not self.T0 > 0:
            raise ValueError("T0 must be positive")


@dataclass
class Policy:
    cfl: float = 0.9
    u_max: float = 1e6
    max_steps: int = 200_000
    t_max: float = math.inf
    snapshot_times: tuple = ()
    nl_factor: float = 0.01
    max_probes: int = 1025
    margin: float | None = None


@dataclass
class EvolutionTrace:
    grid: Grid
    policy: Policy
    p: float
    snapshots: list
    times: np.ndarray
    supnorm: np.ndarray
    probe_index: np.ndarray
    probe_u: np.ndarray
    blew_up: bool
    stop_reason: str
    contaminated: bool
    x_observe: float
    final: FieldState
    local_blowup: dict = field(default_factory=dict)

    @property
    def probe_x(self):
        return self.grid.points[self.probe_index]

    @property
    def supnorm_series(self):
        return np.column_stack([self.times, self.supnorm])

    def snapshot_at(self, t: float, tol: float = 1e-12) -> FieldState:
        for snap in self.snapshots:
            if abs(snap.t - t) <= tol * max(1.0, abs(t)):
                return snap
        raise KeyError(f"no snapshot at t={t!r}; request it through Policy.snapshot_times")


class Overflow(FloatingPointError):
    """Raised when a step produces non-finite values; carries the last finite state."""

    def __init__(self, state: FieldState, step: int | None = None):
        super().__init__(f"overflow at step {step} (t={state.t})")
        self.state = state
        self.step = step


# -- spatial operator -------------------------------------------------------

def _laplacian(u, grid: Grid):
    h = grid.h
    lap = np.empty_like(u)
    if grid.mode == "line":
        if grid.boundary == "periodic":
            return (np.roll(u, -1) - 2 * u + np.roll(u, 1)) / h**2
        lap[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
        lap[0] = 2 * (u[1] - u[0]) / h**2
        lap[-1] = 2 * (u[-2] - u[-1]) / h**2
        return lap
    N = grid.N
    r = grid.points
    lap[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2 + (N - 1) / r[1:-1] * (u[2:] - u[:-2]) / (2 * h)
    lap[0] = 2 * N * (u[1] - u[0]) / h**2
    lap[-1] = 2 * (u[-2] - u[-1]) / h**2
    return lap


def _boundary_velocity_terms(u, ut, grid: Grid):
    """Outgoing-wave closure, written as velocity-dependent corrections to the Laplacian
    at the edge nodes (ghost value from u_t = -du/dn)."""
    acc = np.zeros_like(u)
    if grid.boundary != "absorbing":
        return acc
    h = grid.h
    if grid.mode == "line":
        acc[0] = -2 * ut[0] / h
        acc[-1] = -2 * ut[-1] / h
        return acc
    R, N = grid.L, grid.N
    ur = -ut[-1] - (N - 1) / (2 * R) * u[-1]
    acc[-1] = 2 * ur / h + (N - 1) / R * ur
    return acc


@lru_cache(maxsize=None)
def stable_cfl(mode: str, N: int) -> float:
    """Largest leapfrog Courant number for the spatial stencil.

    The radial origin row has spectral radius above 4/h^2 (6/h^2 for N = 3),
    so radial grids get a reduced limit 2/sqrt(lambda_max) instead of 1.
    """
    if mode == "line" or N == 1:
        return 1.0
    g = Grid.radial(N, 1.0, 1.0 / 64, "reflecting")
    A = np.array([_laplacian(e, g) for e in np.eye(g.size)]).T
    lam = float(np.max(np.abs(np.linalg.eigvals(A).real))) * g.h**2
    return 2.0 / math.sqrt(lam)


def _force(u, spec: ProblemSpec, grid: Grid, linear: bool):
    acc = _laplacian(u, grid)
    if not linear:
        acc += power(u, spec.p)
        if spec.f.kind != "zero":
            acc += eval_f(spec, u)
    return acc


def _damping(u, ut, spec: ProblemSpec, grid: Grid, linear: bool):
    acc = _boundary_velocity_terms(u, ut, grid)
    if not linear and spec.g.kind != "zero":
        acc += eval_g(spec, ut)
    return acc


def _kdk(state: FieldState, spec, grid, dt, linear, force_n=None):
    u, v = state.u, state.ut
    fn = _force(u, spec, grid, linear) if force_n is None else force_n
    a_n = fn + _damping(u, v, spec, grid, linear)
    v_half = v + 0.5 * dt * a_n
    u_new = u + dt * v_half
    v_pred = v + dt * a_n
    f_new = _force(u_new, spec, grid, linear)
    v_new = v_half + 0.5 * dt * (f_new + _damping(u_new, v_pred, spec, grid, linear))
    return FieldState(state.t + dt, u_new, v_new), f_new


def step(state: FieldState, spec: ProblemSpec, grid: Grid, dt: float,
         linear: bool = False, cfl_max: float = 0.9) -> FieldState:
    """One kick-drift-kick step; g(u_t) is explicit, predicted at the new level.

    ``linear=True`` drops the power nonlinearity and both perturbations.
    """
    cfl_max = min(cfl_max, 0.9 * stable_cfl(grid.mode, grid.N))
    if dt > cfl_max * grid.h * (1 + 1e-12):
        raise ValueError(f"dt={dt} violates CFL <= {cfl_max} for h={grid.h}")
    with np.errstate(over="ignore", invalid="ignore"):
        new, _ = _kdk(state, spec, grid, dt, linear)
    if not (np.all(np.isfinite(new.u)) and np.all(np.isfinite(new.ut))):
        raise Overflow(state)
    return new


def discrete_energy(state: FieldState, grid: Grid, dt: float | None = None) -> float:
    """Linear wave energy ½∫u_t² + ½∫|∇u|² on the grid.

    Given the step ``dt``, the leapfrog shadow term -dt²/8 ∫(Δ_h u)² is
    included; on a periodic line that sum is conserved to round-off by the
    linear scheme.
    """
    h = grid.h
    wt = np.full(state.u.shape, h)
    if grid.mode == "line" and grid.boundary == "periodic":
        du = (np.roll(state.u, -1) - state.u) / h
        grad2 = h * np.sum(du**2)
    else:
        wt[0] = wt[-1] = h / 2
        du = np.diff(state.u) / h
        if grid.mode == "radial":
            r = grid.points
            rm = 0.5 * (r[1:] + r[:-1])
            wt = wt * r ** (grid.N - 1)
            grad2 = h * np.sum(rm ** (grid.N - 1) * du**2)
        else:
            grad2 = h * np.sum(du**2)
    e = 0.5 * np.sum(wt * state.ut**2) + 0.5 * grad2
    if dt is not None:
        e -= dt**2 / 8 * np.sum(wt * _laplacian(state.u, grid) ** 2)
    return float(e)


def _observe_point(u0, grid: Grid) -> int:
    """Index of max |u0|, ties resolved towards the grid centre."""
    a = np.abs(u0)
    cand = np.flatnonzero(a == a.max())
    centre = 0.0
    return int(cand[np.argmin(np.abs(grid.points[cand] - centre))])


def _probe_indices(grid: Grid, max_probes: int, must: int) -> np.ndarray:
    n = grid.size
    stride = max(1, math.ceil(n / max_probes))
    idx = set(range(0, n, stride))
    idx.add(n - 1)
    # every node near the observation point, for local blow-up fits
    idx.update(range(max(0, must - 32), min(n, must + 33)))
    return np.array(sorted(idx))


def evolve_until_blowup(init: FieldState, spec: ProblemSpec, grid: Grid,
                        policy: Policy | None = None, linear: bool = False,
                        x_observe: float | None = None) -> EvolutionTrace:
    """March until sup|u| >= u_max, t_max, or max_steps.

    Every step is recorded in the sup-norm series and at the probe nodes;
    full fields are stored only at ``policy.snapshot_times``, which the
    step size is adjusted to hit exactly.
    """
    policy = policy or Policy()
    if not (np.all(np.isfinite(init.u)) and np.all(np.isfinite(init.ut))):
        raise ValueError("initial data must be finite")
    if len(init.u) != grid.size or len(init.ut) != grid.size:
        raise ValueError("initial data does not match the grid")
    pts = grid.points
    obs = _observe_point(init.u, grid) if x_observe is None else int(np.argmin(np.abs(pts - x_observe)))
    probes = _probe_indices(grid, policy.max_probes, obs)
    margin = policy.margin if policy.margin is not None else max(10 * grid.h, 0.1)
    expo = -(spec.p - 1) / 2.0
    dt_cfl = min(policy.cfl, 0.9 * stable_cfl(grid.mode, grid.N)) * grid.h

    pending = sorted(float(t) for t in policy.snapshot_times if t >= init.t)
    snaps = []
    state = init
    times, sup, pu = [state.t], [float(np.max(np.abs(state.u)))], [state.u[probes].copy()]
    force = None
    blew_up = False
    reason = "max_steps reached"
    for n in range(policy.max_steps):
        while pending and pending[0] <= state.t + 1e-15 * max(1.0, abs(state.t)):
            snaps.append(FieldState(pending.pop(0), state.u.copy(), state.ut.copy()))
        if sup[-1] >= policy.u_max:
            blew_up, reason = True, "u_max reached"
            break
        if state.t >= policy.t_max:
            reason = "t_max reached"
            break
        dt = dt_cfl
        if sup[-1] > 0:
            dt = min(dt, policy.nl_factor * sup[-1] ** expo)
        target = None
        if pending and state.t + dt >= pending[0]:
            target = pending[0]
        if state.t + dt >= policy.t_max and (target is None or policy.t_max < target):
            target = policy.t_max
        if target is not None:
            dt = target - state.t
        with np.errstate(over="ignore", invalid="ignore"):
            new, fnew = _kdk(state, spec, grid, dt, linear, force)
        if not (np.all(np.isfinite(new.u)) and np.all(np.isfinite(new.ut))):
            reason = f"overflow at step {n}"
            blew_up = True
            break
        if target is not None:
            new = FieldState(target, new.u, new.ut)
        state, force = new, fnew
        times.append(state.t)
        sup.append(float(np.max(np.abs(state.u))))
        pu.append(state.u[probes].copy())
    else:
        if sup[-1] >= policy.u_max:
            blew_up, reason = True, "u_max reached"
    while pending and pending[0] <= state.t:
        snaps.append(FieldState(pending.pop(0), state.u.copy(), state.ut.copy()))

    x_obs = float(pts[obs])
    contaminated = grid.edge_distance(x_obs) < state.t + margin
    trace = EvolutionTrace(
        grid=grid, policy=policy, p=spec.p, snapshots=snaps, times=np.array(times),
        supnorm=np.array(sup), probe_index=probes, probe_u=np.array(pu),
        blew_up=blew_up, stop_reason=reason, contaminated=bool(contaminated),
        x_observe=x_obs, final=state,
    )
    if blew_up:
        fit = estimate_local_blowup_time(trace, x_obs, spec.p)
        if fit.reliable:
            trace.local_blowup[x_obs] = fit.T
    return trace


def estimate_local_blowup_time(trace: EvolutionTrace, x0: float, p: float,
                               window_factor: float = 100.0) -> BlowupTimeFit:
    """Inverse-power extrapolation of |u(x0, t)| recorded at the nearest probe.

    An unreliable fit (``reliable=False``) means "not blowing up here".
    """
    px = trace.probe_x
    j = int(np.argmin(np.abs(px - x0)))
    if abs(px[j] - x0) > 0.5 * trace.grid.h + 1e-12:
        raise ValueError(f"x0={x0} is not a recorded probe location")
    fit = inverse_power_fit(trace.times, np.abs(trace.probe_u[:, j]), p, window_factor)
    if not fit.reliable:
        return BlowupTimeFit(fit.T, False, fit.residual, fit.n_window,
                             f"not blowing up here ({fit.reason})")
    return fit


@dataclass(frozen=True)
class ConeSection:
    t: float
    x0: float
    radius: float
    x: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    ux: np.ndarray
    mode: str = "line"


def grid_gradient(u, grid: Grid):
    h = grid.h
    if grid.mode == "line" and grid.boundary == "periodic":
        return (np.roll(u, -1) - np.roll(u, 1)) / (2 * h)
    g = np.gradient(u, h, edge_order=2)
    if grid.mode == "radial":
        g[0] = 0.0
    return g


def _interp(grid: Grid, values, xq, kind):
    x = grid.points
    if grid.mode == "radial":
        xs = np.concatenate([-x[:0:-1], x])
        vs = np.concatenate([values[:0:-1], values])
        xq = np.abs(xq)
    else:
        xs, vs = x, values
    if kind == "linear":
        return np.interp(xq, xs, vs)
    if kind == "cubic":
        return CubicSpline(xs, vs)(xq)
    raise ValueError(f"unknown interpolation {kind!r}")


def _interp_odd(grid: Grid, values, xq, kind):
    """Interpolate an odd-in-r radial field (the radial derivative)."""
    if grid.mode != "radial":
        return _interp(grid, values, xq, kind)
    x = grid.points
    xs = np.concatenate([-x[:0:-1], x])
    vs = np.concatenate([-values[:0:-1], values])
    if kind == "linear":
        return np.interp(xq, xs, vs)
    return CubicSpline(xs, vs)(xq)


def extract_cone_section(trace: EvolutionTrace, cone: ConeSpec, t: float,
                         points=None, interp: str = "linear") -> ConeSection:
    """Restrict the snapshot at time t to the ball B(x0, T0 - t).

    With ``points=None`` the section is the set of grid nodes strictly inside
    the ball (the nearest node if none is). Otherwise the fields are
    interpolated at the given points, which must lie in the ball.
    """
    if not t < cone.T0:
        raise ValueError(f"t={t} must precede the cone apex T0={cone.T0}")
    return section_from_state(trace.snapshot_at(t), trace.grid, cone, points, interp)


def section_from_state(state: FieldState, grid: Grid, cone: ConeSpec, points=None,
                       interp: str = "linear") -> ConeSection:
    t = state.t
    if not t < cone.T0:
        raise ValueError(f"t={t} must precede the cone apex T0={cone.T0}")
    radius = cone.T0 - t
    if grid.mode == "radial" and cone.x0 != 0:
        raise ValueError("radial cones must be centred at the origin")
    lo, hi = grid.points[0], grid.points[-1]
    if cone.x0 + radius > hi + 1e-12 or (grid.mode == "line" and cone.x0 - radius < lo - 1e-12):
        raise ValueError(f"ball B({cone.x0}, {radius}) exits the grid")
    grad = grid_gradient(state.u, grid)
    if points is None:
        pts = grid.points
        inside = np.flatnonzero(np.abs(pts - cone.x0) < radius)
        if inside.size == 0:
            inside = np.array([int(np.argmin(np.abs(pts - cone.x0)))])
        return ConeSection(t, cone.x0, radius, pts[inside], state.u[inside], state.ut[inside],
                           grad[inside], grid.mode)
    xq = np.asarray(points, dtype=float)
    if np.any(np.abs(xq - cone.x0) > radius * (1 + 1e-12)):
        raise ValueError("requested points leave the ball")
    return ConeSection(t, cone.x0, radius, xq,
                       _interp(grid, state.u, xq, interp),
                       _interp(grid, state.ut, xq, interp),
                       _interp_odd(grid, grad, xq, interp), grid.mode)


# -- export ---------------------------------------------------------------

def write_snapshot_csv(state: FieldState, grid: Grid, path) -> None:
    write_csv(path, ["x", "u", "ut"], zip(grid.points, state.u, state.ut))


def read_snapshot_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def save_trace(trace: EvolutionTrace, out_dir, extra: dict | None = None) -> Path:
    """Write one CSV per snapshot, the sup-norm series and a JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, snap in enumerate(trace.snapshots):
        name = f"snapshot_{k:04d}.csv"
        write_snapshot_csv(snap, trace.grid, out / name)
        files.append({"t": snap.t, "file": name})
    write_csv(out / "supnorm.csv", ["t", "supnorm"], zip(trace.times, trace.supnorm))
    pol = asdict(trace.policy)
    pol["snapshot_times"] = [float(t) for t in trace.policy.snapshot_times]
    manifest = {
        "grid": asdict(trace.grid), "policy": pol, "p": trace.p,
        "blew_up": trace.blew_up, "stop_reason": trace.stop_reason,
        "contaminated": trace.contaminated, "x_observe": trace.x_observe,
        "t_stop": trace.final.t,
        "local_blowup": [{"x0": x, "T": T} for x, T in trace.local_blowup.items()],
        "snapshots": files,
    }
    if extra:
        manifest.update(extra)
    write_json(manifest, out / "manifest.json")
    return out


def load_trace(out_dir) -> tuple[EvolutionTrace, dict]:
    """Rebuild a snapshot-only trace from :func:`save_trace` output."""
    out = Path(out_dir)
    with open(out / "manifest.json") as fh:
        man = json.load(fh)
    grid = Grid(**man["grid"])
    pol = dict(man["policy"])
    pol["snapshot_times"] = tuple(pol["snapshot_times"])
    pol = {k: (math.inf if v is None and k == "t_max" else v) for k, v in pol.items()}
    snaps = []
    for item in man["snapshots"]:
        _, u, ut = read_snapshot_csv(out / item["file"])
        snaps.append(FieldState(float(item["t"]), u, ut))
    sup = np.loadtxt(out / "supnorm.csv", delimiter=",", skiprows=1, ndmin=2)
    last = snaps[-1] if snaps else FieldState(man["t_stop"], np.zeros(grid.size), np.zeros(grid.size))
    trace = EvolutionTrace(
        grid=grid, policy=Policy(**pol), p=man["p"], snapshots=snaps, times=sup[:, 0],
        supnorm=sup[:, 1], probe_index=np.array([], dtype=int), probe_u=np.zeros((len(sup), 0)),
        blew_up=man["blew_up"], stop_reason=man["stop_reason"], contaminated=man["contaminated"],
        x_observe=man["x_observe"], final=last,
        local_blowup={d["x0"]: d["T"] for d in man["local_blowup"]},
    )
    return trace, man
