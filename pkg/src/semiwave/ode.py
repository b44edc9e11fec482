"""Blow-up ODE v'' = v^p + f(v) + g(v') and its rate fit.

The integrator is classic RK4 with a step that shrinks like
(1 + |v|)^{-(p-1)/2}, so reaching a threshold V costs O(log V) steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._io import write_csv, write_json
from .model import ProblemSpec, eval_f, eval_g, kappa_of


@dataclass(frozen=True)
class OdeTrace:
    times: np.ndarray
    v: np.ndarray
    vprime: np.ndarray
    p: float
    reached_threshold: bool
    status: str
    blowup_estimate: tuple[float, float] | None = None


@dataclass(frozen=True)
class BlowupTimeFit:
    T: float
    reliable: bool
    residual: float
    n_window: int
    reason: str = ""


def _scalar_rhs(spec: ProblemSpec):
    p = spec.p
    fz = spec.f.kind == "zero"
    gz = spec.g.kind == "zero"

    def rhs(v, w):
        acc = abs(v) ** (p - 1) * v
        if not fz:
            acc += float(eval_f(spec, v))
        if not gz:
            acc += float(eval_g(spec, w))
        return acc

    return rhs


def integrate_ode(spec: ProblemSpec, v0: float, v1: float, stop_threshold: float = 1e8,
                  dt0: float = 1e-3, max_steps: int = 500_000, t_max: float = math.inf,
                  output_times=()) -> OdeTrace:
    """Integrate from (v0, v1) at t = 0 until v >= stop_threshold.

    ``output_times`` are hit exactly by shortening the step that would pass
    them. Running out of ``max_steps`` or ``t_max``, or sitting on an
    equilibrium, ends the trace with ``reached_threshold=False``.
    """
    if not stop_threshold > max(1.0, abs(v0)):
        raise ValueError("stop_threshold must exceed max(1, |v0|)")
    rhs = _scalar_rhs(spec)
    expo = -(spec.p - 1) / 2.0
    pending = sorted(t for t in output_times if t > 0)

    t, v, w = 0.0, float(v0), float(v1)
    ts, vs, ws = [t], [v], [w]
    status = "step budget exhausted"
    reached = False
    for _ in range(max_steps):
        if v >= stop_threshold:
            reached, status = True, "threshold reached"
            break
        a = rhs(v, w)
        if a == 0.0 and w == 0.0:
            status = "equilibrium"
            break
        if t >= t_max:
            status = "t_max reached"
            break
        dt = dt0 * (1.0 + abs(v)) ** expo
        dt = min(dt, t_max - t)
        while pending and pending[0] <= t:
            pending.pop(0)
        if pending and t + dt > pending[0]:
            dt = pending[0] - t
        k1v, k1w = w, a
        k2v, k2w = w + 0.5 * dt * k1w, rhs(v + 0.5 * dt * k1v, w + 0.5 * dt * k1w)
        k3v, k3w = w + 0.5 * dt * k2w, rhs(v + 0.5 * dt * k2v, w + 0.5 * dt * k2w)
        k4v, k4w = w + dt * k3w, rhs(v + dt * k3v, w + dt * k3w)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        w = w + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        t = pending.pop(0) if pending and dt == pending[0] - t else t + dt
        if not (math.isfinite(v) and math.isfinite(w)):
            status = "overflow"
            break
        ts.append(t)
        vs.append(v)
        ws.append(w)
    else:
        if v >= stop_threshold:
            reached, status = True, "threshold reached"

    trace = OdeTrace(np.array(ts), np.array(vs), np.array(ws), spec.p, reached,
                     status if reached else f"no blow-up detected ({status})")
    if reached:
        fit = estimate_blowup_time(trace, spec.p)
        if fit.reliable:
            trace = OdeTrace(trace.times, trace.v, trace.vprime, spec.p, True, trace.status,
                             (fit.T, fit_rate(trace, fit.T, spec.p)))
    return trace


def value_at(trace: OdeTrace, t: float) -> tuple[float, float]:
    """(v, v') at a recorded time; ``t`` must be one of the trace times."""
    i = int(np.searchsorted(trace.times, t))
    if i >= len(trace.times) or trace.times[i] != t:
        raise KeyError(f"t={t} is not a recorded time; pass it in output_times")
    return float(trace.v[i]), float(trace.vprime[i])


def _fit_window(times, values, p, window_factor):
    kappa = kappa_of(p)
    mask = np.abs(values) >= window_factor * kappa
    return times[mask], np.abs(values[mask])


def inverse_power_fit(times, values, p, window_factor: float = 100.0,
                      reached: bool = True) -> BlowupTimeFit:
    """Blow-up time from z = |v|^{-(p-1)/2} on the asymptotic window.

    z is nearly linear in t there. A quadratic on the upper half of the window
    absorbs lower-order corrections; T is its first root past the data.
    """
    if not reached:
        return BlowupTimeFit(math.nan, False, math.nan, 0, "threshold not reached")
    t, v = _fit_window(np.asarray(times), np.asarray(values), p, window_factor)
    if len(t) < 3:
        return BlowupTimeFit(math.nan, False, math.nan, len(t), "too few points in fit window")
    z = v ** (-(p - 1) / 2.0)
    if np.any(np.diff(z) >= 0):
        return BlowupTimeFit(math.nan, False, math.nan, len(t), "non-monotone tail window")
    # lower-order terms bend z on the early window; fit a quadratic on its upper half
    tail = v >= math.sqrt(v[0] * v[-1])
    if tail.sum() < 3:
        tail[:] = True
    tt, zt = t[tail] - t[-1], z[tail]
    scale = max(-tt[0], np.finfo(float).tiny)
    c2, c1, c0 = np.polyfit(tt / scale, zt, 2)
    if c1 >= 0:
        return BlowupTimeFit(math.nan, False, math.nan, len(t), "fitted curve does not decrease")
    roots = np.roots([c2, c1, c0]) if c2 != 0 else np.array([-c0 / c1])
    roots = roots[np.isreal(roots)].real
    ahead = roots[roots > 0]
    if len(ahead) == 0:
        T = t[-1] + scale * float(roots[np.argmin(np.abs(roots))]) if len(roots) else math.nan
        return BlowupTimeFit(float(T), False, math.nan, len(t), "root precedes last sample")
    T = t[-1] + scale * float(ahead.min())
    resid = float(np.max(np.abs(zt - np.polyval([c2, c1, c0], tt / scale))) / zt[0])
    return BlowupTimeFit(float(T), True, resid, len(t))


def estimate_blowup_time(trace: OdeTrace, p: float, window_factor: float = 100.0) -> BlowupTimeFit:
    return inverse_power_fit(trace.times, trace.v, p, window_factor, trace.reached_threshold)


def fit_rate(trace: OdeTrace, T: float, p: float, window_factor: float = 100.0) -> float:
    """Median of v (T - t)^{2/(p-1)} over the fit window."""
    t, v = _fit_window(trace.times, trace.v, p, window_factor)
    if len(t) == 0 or not math.isfinite(T):
        return math.nan
    return float(np.median(v * (T - t) ** (2.0 / (p - 1))))


def write_trace_csv(trace: OdeTrace, path) -> None:
    write_csv(path, ["t", "v", "vprime"], zip(trace.times, trace.v, trace.vprime))


def fit_report(trace: OdeTrace) -> dict:
    fit = estimate_blowup_time(trace, trace.p)
    kappa_est = fit_rate(trace, fit.T, trace.p) if fit.reliable else math.nan
    return {
        "T": fit.T, "kappa_est": kappa_est, "kappa": kappa_of(trace.p),
        "residual": fit.residual, "reliable": fit.reliable, "reason": fit.reason,
        "n_window": fit.n_window, "status": trace.status,
    }


def write_fit_json(trace: OdeTrace, path) -> None:
    write_json(fit_report(trace), path)
