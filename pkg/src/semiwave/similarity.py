"""Similarity variables y = (x - x0)/(T0 - t), s = -log(T0 - t), w = (T0 - t)^{2/(p-1)} u."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ._io import fmt
from .model import DerivedConstants, ProblemSpec, eval_f, eval_g
from .wave_solver import ConeSection, ConeSpec, EvolutionTrace, extract_cone_section


@dataclass(frozen=True)
class SimilarityFrame:
    """(w, w_s, ∇w) at nodes y of the unit ball at similarity time s.

    In radial mode ``y`` holds radii in (0, 1) and ``gradw`` is ∂w/∂r.
    """

    s: float
    x0: float
    T0: float
    p: float
    y: np.ndarray
    w: np.ndarray
    ws: np.ndarray
    gradw: np.ndarray
    mode: str = "line"
    N: int = 1

    @property
    def t(self):
        return self.T0 - math.exp(-self.s)

    def replace(self, **kw):
        d = dict(s=self.s, x0=self.x0, T0=self.T0, p=self.p, y=self.y, w=self.w, ws=self.ws,
                 gradw=self.gradw, mode=self.mode, N=self.N)
        d.update(kw)
        return SimilarityFrame(**d)


def to_similarity(section: ConeSection, cone: ConeSpec, t: float, p: float, N: int = 1) -> SimilarityFrame:
    tau = cone.T0 - t
    if not tau > 0:
        raise ValueError(f"t={t} must precede T0={cone.T0}")
    a = 2.0 / (p - 1)
    y = (section.x - cone.x0) / tau
    w = tau**a * section.u
    gradw = tau ** (a + 1) * section.ux
    ws = tau ** (a + 1) * section.ut - y * gradw - a * w
    return SimilarityFrame(-math.log(tau), cone.x0, cone.T0, p, y, w, ws, gradw, section.mode, N)


def from_similarity(frame: SimilarityFrame) -> ConeSection:
    """Exact inverse of :func:`to_similarity`, returning u, u_t, ∇u on B(x0, e^{-s})."""
    tau = math.exp(-frame.s)
    a = 2.0 / (frame.p - 1)
    x = frame.x0 + tau * frame.y
    u = tau ** (-a) * frame.w
    ux = tau ** (-a - 1) * frame.gradw
    ut = tau ** (-a - 1) * (frame.ws + frame.y * frame.gradw + a * frame.w)
    return ConeSection(frame.T0 - tau, frame.x0, tau, x, u, ut, ux, frame.mode)


def sample_frame(trace: EvolutionTrace, cone: ConeSpec, s: float, nodes, p: float,
                 interp: str = "cubic") -> SimilarityFrame:
    """Frame at similarity time s with y at ``nodes`` (cubic interpolation from the grid)."""
    tau = math.exp(-s)
    t = cone.T0 - tau
    section = extract_cone_section(trace, cone, t, cone.x0 + tau * np.asarray(nodes), interp)
    frame = to_similarity(section, cone, t, p, trace.grid.N)
    # y from the exact nodes, not x/tau round-off
    return frame.replace(y=np.asarray(nodes, dtype=float).copy(), s=s)


# -- differentiation on the nodes -----------------------------------------

def _bary_weights(x):
    n = len(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    logw -= logw.max()
    return sign * np.exp(logw)


def diff_matrix(x) -> np.ndarray:
    """Polynomial differentiation matrix on distinct nodes (barycentric form)."""
    x = np.asarray(x, dtype=float)
    wb = _bary_weights(x)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (wb[None, :] / wb[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def _node_derivative(frame: SimilarityFrame, values, parity: int = 1):
    """d/dy of nodal values; in radial mode ``parity`` is +1 for even fields, -1 for odd."""
    v = np.asarray(values, dtype=float)
    if frame.mode == "radial":
        r = frame.y
        xs = np.concatenate([-r[::-1], r])
        vs = np.concatenate([parity * v[::-1], v])
        base = vs[len(r)]
        return (diff_matrix(xs) @ (vs - (base if parity == 1 else 0.0)))[len(r):]
    # subtracting a nodal value keeps constants exactly flat
    return diff_matrix(frame.y) @ (v - v[0])


# -- right-hand side of the similarity equation ---------------------------

def perturbation_terms(frame: SimilarityFrame, spec: ProblemSpec):
    """e^{-2ps/(p-1)} f(e^{2s/(p-1)} w) and the matching g term, nodewise."""
    p, s = spec.p, frame.s
    scale = math.exp(-2 * p * s / (p - 1))
    fterm = scale * np.asarray(eval_f(spec, math.exp(2 * s / (p - 1)) * frame.w))
    arg = frame.ws + frame.y * frame.gradw + 2.0 / (p - 1) * frame.w
    gterm = scale * np.asarray(eval_g(spec, math.exp((p + 1) * s / (p - 1)) * arg))
    return fterm * np.ones_like(frame.w), gterm * np.ones_like(frame.w)


def perturbation_bounds(frame: SimilarityFrame, spec: ProblemSpec):
    """Nodewise envelopes for the two perturbation terms, valid for s >= 0.

    From |f(x)| <= M(1+|x|^q) and |g(x)| <= M(1+|x|): the f term is at most
    2M e^{-2(p-q)s/(p-1)} (1 + |w|^p) when 0 <= q, and the g term at most
    M e^{-2ps/(p-1)} + M e^{-s}|w_s + y·∇w + 2w/(p-1)|.
    """
    p, q, M, s = spec.p, spec.q, spec.M, frame.s
    w = np.abs(frame.w)
    if q >= 0:
        fb = 2 * M * math.exp(-2 * (p - q) * s / (p - 1)) * (1 + w**p)
    else:
        fb = M * math.exp(-2 * p * s / (p - 1)) + M * math.exp(-2 * (p - q) * s / (p - 1)) * w**q
    arg = np.abs(frame.ws + frame.y * frame.gradw + 2.0 / (p - 1) * frame.w)
    gb = M * math.exp(-2 * p * s / (p - 1)) + M * math.exp(-s) * arg
    return fb, gb


def eval_rhs(frame: SimilarityFrame, spec: ProblemSpec, constants: DerivedConstants,
             margin: float = 0.005):
    """w_ss from the similarity equation at nodes with |y| <= 1 - margin.

    Returns ``(nodes, values)``. First y-derivatives of w come from the
    frame's ``gradw``; w_yy and ∇w_s are polynomial derivatives on the nodes.
    """
    if not 0 < margin < 1:
        raise ValueError("margin must lie in (0, 1)")
    keep = np.abs(frame.y) <= 1 - margin
    if not np.any(keep):
        raise ValueError(f"no node satisfies |y| <= {1 - margin}; margin too small for the stencil")
    p, alpha = spec.p, constants.alpha
    y, w, ws, wy = frame.y, frame.w, frame.ws, frame.gradw
    wyy = _node_derivative(frame, wy, parity=-1)
    wsy = _node_derivative(frame, ws, parity=1)
    if frame.mode == "radial":
        N = frame.N
        op = (1 - y**2) * wyy + (N - 1) / y * wy - (N + 1) * y * wy - 2 * alpha * y * wy
    else:
        op = (1 - y**2) * wyy - 2 * (alpha + 1) * y * wy
    fterm, gterm = perturbation_terms(frame, spec)
    rhs = (op - (2 * p + 2) / (p - 1) ** 2 * w + np.abs(w) ** (p - 1) * w
           - (p + 3) / (p - 1) * ws - 2 * y * wsy + fterm + gterm)
    return y[keep], rhs[keep]


# -- the delta-rescaled family --------------------------------------------

def _interp_in_s(history, s_src):
    """Cubic Hermite in s for w (slopes w_s), linear for w_s and ∇w."""
    frames = sorted(history, key=lambda f: f.s)
    ss = np.array([f.s for f in frames])
    if not ss[0] - 1e-12 <= s_src <= ss[-1] + 1e-12:
        raise ValueError(f"source time s={s_src:.6g} outside the history range "
                         f"[{ss[0]:.6g}, {ss[-1]:.6g}]")
    j = int(np.clip(np.searchsorted(ss, s_src) - 1, 0, len(ss) - 2)) if len(ss) > 1 else 0
    if len(ss) == 1 or abs(s_src - ss[j]) < 1e-14:
        f = frames[j]
        return f.w, f.ws, f.gradw
    if abs(s_src - ss[j + 1]) < 1e-14:
        f = frames[j + 1]
        return f.w, f.ws, f.gradw
    f0, f1 = frames[j], frames[j + 1]
    H = f1.s - f0.s
    x = (s_src - f0.s) / H
    h00, h10 = 2 * x**3 - 3 * x**2 + 1, x**3 - 2 * x**2 + x
    h01, h11 = -2 * x**3 + 3 * x**2, x**3 - x**2
    w = h00 * f0.w + h10 * H * f0.ws + h01 * f1.w + h11 * H * f1.ws
    ws = (1 - x) * f0.ws + x * f1.ws
    gw = (1 - x) * f0.gradw + x * f1.gradw
    return w, ws, gw


def _spatial_interp(frame: SimilarityFrame, values, zq, odd=False):
    y = frame.y
    if frame.mode == "radial":
        xs = np.concatenate([-y[::-1], y])
        vs = np.concatenate([(-1 if odd else 1) * values[::-1], values])
    else:
        xs, vs = y, values
    return CubicSpline(xs, vs)(zq)


def delta_rescale(w_history, delta: float, s_eval: float) -> SimilarityFrame:
    """w̃(y, s) = λ^{-2/(p-1)} w(y/λ, -log(δ + e^{-s})) with λ = 1 + δe^s.

    The returned frame keeps the node set of the history; w_s and ∇w of the
    rescaled family follow from the chain rule.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    frames = list(w_history)
    ref = frames[0]
    a = 2.0 / (ref.p - 1)
    lam = 1.0 + delta * math.exp(s_eval)
    s_src = -math.log(delta + math.exp(-s_eval))
    w, ws, gw = _interp_in_s(frames, s_src)
    z = ref.y / lam
    base = ref.replace(w=w, ws=ws, gradw=gw, s=s_src)
    wz = _spatial_interp(base, w, z)
    wsz = _spatial_interp(base, ws, z)
    gwz = _spatial_interp(base, gw, z, odd=True)
    new_w = lam ** (-a) * wz
    new_grad = lam ** (-a - 1) * gwz
    new_ws = lam ** (-a - 1) * (wsz - a * (lam - 1) * wz - (lam - 1) * z * gwz)
    return ref.replace(s=s_eval, w=new_w, ws=new_ws, gradw=new_grad, T0=ref.T0 - delta)


# -- export ---------------------------------------------------------------

def write_frame_csv(frame: SimilarityFrame, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# s={fmt(frame.s)} x0={fmt(frame.x0)} T0={fmt(frame.T0)} p={fmt(frame.p)}\n")
        fh.write("y,w,ws,gradw\n")
        for row in zip(frame.y, frame.w, frame.ws, frame.gradw):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_frame_csv(path, mode: str = "line", N: int = 1) -> SimilarityFrame:
    with open(path) as fh:
        head = fh.readline().lstrip("# ").split()
    meta = {k: float(v) for k, v in (item.split("=") for item in head)}
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    return SimilarityFrame(meta["s"], meta["x0"], meta["T0"], meta["p"],
                           data[:, 0], data[:, 1], data[:, 2], data[:, 3], mode, N)
