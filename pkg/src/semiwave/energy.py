"""Weighted quadrature on the unit ball and the similarity-variable functionals.

Integrals carry the degenerate weight rho = (1 - |y|^2)^alpha. One node set
(Gauss-Jacobi for the exponent alpha - 1) serves three weight vectors: rho/(1-|y|^2)
(Gaussian), rho (the same weights times 1 - |y|^2) and the plain Lebesgue
measure (interpolatory on the same nodes).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import beta as beta_fn, eval_jacobi, eval_legendre, gamma as gamma_fn, roots_jacobi

from ._io import jsonable, write_csv, write_json
from .model import DerivedConstants, ProblemSpec, eval_F


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere S^{N-1} (2 for N = 1)."""
    return 2.0 * math.pi ** (N / 2) / gamma_fn(N / 2)


@dataclass(frozen=True)
class BallQuadrature:
    alpha: float
    mode: str
    N: int
    nodes: np.ndarray
    weights_rho: np.ndarray
    weights_rho_sing: np.ndarray
    weights_plain: np.ndarray
    plain_exact: bool = True

    def __len__(self):
        return len(self.nodes)

    @property
    def one_minus_y2(self):
        return 1.0 - self.nodes**2


def _interpolatory(values_basis: np.ndarray, moments: np.ndarray) -> np.ndarray:
    # values_basis[k, i] = P_k(x_i)
    return np.linalg.solve(values_basis, moments)


def _jacobi_recurrence(n, a, b):
    """Coefficients of the orthonormal Jacobi recurrence, in long double."""
    LD = np.longdouble
    k = np.arange(n, dtype=LD)
    a, b = LD(a), LD(b)
    s = 2 * k + a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        diag = (b * b - a * a) / (s * (s + 2))
        off = 2 / (s + 2) * np.sqrt((k + 1) * (k + a + 1) * (k + b + 1) * (k + a + b + 1)
                                    / ((s + 1) * (s + 3)))
    # k = 0 entries have removable singularities when a + b is 0 or -1
    diag[0] = (b - a) / (a + b + 2)
    off[0] = 2 / (a + b + 2) * np.sqrt((a + 1) * (b + 1) / (a + b + 3))
    return diag, off


def gauss_jacobi(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Jacobi rule for (1-x)^a (1+x)^b on (-1, 1).

    Starts from scipy's Golub-Welsch nodes, then polishes in long double:
    Newton steps on the orthonormal p_n, weights from the Christoffel
    function 1/sum_{k<n} p_k(x)^2. Moment errors stay near 1e-14 even when
    a is close to -1, where the eigenvector weights lose two or three digits.
    """
    LD = np.longdouble
    diag, off = _jacobi_recurrence(n, a, b)
    mu0 = LD(2.0) ** LD(a + b + 1) * LD(beta_fn(a + 1, b + 1))

    def run(x):
        p_prev, p = np.zeros_like(x), np.full_like(x, 1 / np.sqrt(mu0))
        d_prev, d = np.zeros_like(x), np.zeros_like(x)
        ssq = p * p
        for k in range(n):
            back = off[k - 1] if k > 0 else 0
            pn = ((x - diag[k]) * p - back * p_prev) / off[k]
            dn = (p + (x - diag[k]) * d - back * d_prev) / off[k]
            p_prev, p, d_prev, d = p, pn, d, dn
            if k < n - 1:
                ssq = ssq + p * p
        return p, d, ssq

    x = roots_jacobi(n, a, b)[0].astype(LD)
    for _ in range(3):
        p, d, _ = run(x)
        x = x - p / d
    _, _, ssq = run(x)
    return x.astype(float), (1 / ssq).astype(float)


def build_quadrature(alpha: float, node_count: int, mode: str = "line", N: int = 1) -> BallQuadrature:
    """Gauss-Jacobi rule on B for the weights rho, rho/(1-|y|^2) and 1.

    ``mode="line"`` integrates over (-1, 1); ``mode="radial"`` integrates radial
    functions over the N-ball, folding in the r^{N-1} surface factor through
    the substitution u = r^2.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if node_count < 8:
        raise ValueError("node_count must be at least 8")
    n = int(node_count)
    a = alpha - 1.0
    k = np.arange(n)[:, None]
    if mode == "line":
        if N != 1:
            raise ValueError("line quadrature is one-dimensional")
        y, w_sing = gauss_jacobi(n, a, a)
        w_rho = w_sing * (1.0 - y**2)
        mom = np.zeros(n)
        mom[0] = 2.0
        w_plain = _interpolatory(eval_legendre(k, y[None, :]), mom)
        nodes = y
        fallback = w_sing * (1.0 - y**2) ** (1.0 - alpha)
    elif mode == "radial":
        if N < 2:
            raise ValueError("radial quadrature needs N >= 2")
        b = (N - 2) / 2.0
        t, wt = gauss_jacobi(n, a, b)
        nodes = np.sqrt((1.0 + t) / 2.0)
        area = sphere_area(N)
        w_sing = area / 2.0 * 2.0 ** (-a - b - 1) * wt
        w_rho = w_sing * (1.0 - nodes**2)
        mom = np.zeros(n)
        mom[0] = 2.0 ** (b + 1) / (b + 1)
        w_plain = area / 2.0 * 2.0 ** (-b - 1) * _interpolatory(eval_jacobi(k, 0.0, b, t[None, :]), mom)
        fallback = w_sing * (1.0 - nodes**2) ** (1.0 - alpha)
    else:
        raise ValueError(f"unknown quadrature mode {mode!r}")
    exact = bool(np.all(w_plain > 0))
    if not exact:
        # interpolatory weights lose positivity for large alpha
        w_plain = fallback
    return BallQuadrature(alpha=alpha, mode=mode, N=N, nodes=nodes, weights_rho=w_rho,
                          weights_rho_sing=w_sing, weights_plain=w_plain, plain_exact=exact)


def integrate(quad: BallQuadrature, values, weight: str = "rho") -> float:
    w = {"rho": quad.weights_rho, "sing": quad.weights_rho_sing, "plain": quad.weights_plain}[weight]
    return float(np.dot(w, values))


def _check_nodes(frame, quad: BallQuadrature):
    if len(frame.y) != len(quad.nodes) or not np.allclose(frame.y, quad.nodes, rtol=0, atol=1e-13):
        raise ValueError("frame is not sampled at the quadrature nodes")


# -- functionals ----------------------------------------------------------

def compute_E0(frame, quad: BallQuadrature) -> float:
    _check_nodes(frame, quad)
    p = frame.p
    w, ws, gw = frame.w, frame.ws, frame.gradw
    dens = (0.5 * ws**2 + 0.5 * quad.one_minus_y2 * gw**2
            + (p + 1) / (p - 1) ** 2 * w**2 - np.abs(w) ** (p + 1) / (p + 1))
    return integrate(quad, dens)


def compute_I(frame, quad: BallQuadrature, spec: ProblemSpec) -> float:
    _check_nodes(frame, quad)
    if spec.f.kind == "zero":
        return 0.0
    p, s = spec.p, frame.s
    F = eval_F(spec, np.exp(2 * s / (p - 1)) * frame.w)
    return -math.exp(-2 * (p + 1) * s / (p - 1)) * integrate(quad, F)


def compute_J(frame, quad: BallQuadrature, gamma: float) -> float:
    _check_nodes(frame, quad)
    return -math.exp(-gamma * frame.s) * integrate(quad, frame.w * frame.ws)


def dissipation(frame, quad: BallQuadrature) -> float:
    """∫_B w_s^2 rho/(1-|y|^2) dy."""
    _check_nodes(frame, quad)
    return integrate(quad, frame.ws**2, "sing")


def hardy_ratio(frame, quad: BallQuadrature) -> float:
    """∫w²|y|²rho/(1-|y|²) divided by ∫|∇w|²rho(1-|y|²) + ∫w²rho; nan if w ≡ 0."""
    _check_nodes(frame, quad)
    y2 = quad.nodes**2
    lhs = integrate(quad, frame.w**2 * y2, "sing")
    den = integrate(quad, frame.gradw**2 * quad.one_minus_y2) + integrate(quad, frame.w**2)
    if den <= 0:
        return math.nan
    return lhs / den


def norm_bundle(frame, quad: BallQuadrature) -> tuple[float, float]:
    """Unweighted ‖w‖_{H¹(B)} and ‖w_s‖_{L²(B)}."""
    h1 = math.sqrt(max(integrate(quad, frame.w**2 + frame.gradw**2, "plain"), 0.0))
    l2 = math.sqrt(max(integrate(quad, frame.ws**2, "plain"), 0.0))
    return h1, l2


@dataclass(frozen=True)
class FunctionalReport:
    s: float
    E0: float
    I: float
    J: float
    E: float
    H: float
    D: float
    norm_H1: float
    norm_ws_L2: float
    Lp1_rho: float
    resolution: float = 0.0

    @property
    def bundle(self):
        return self.norm_H1 + self.norm_ws_L2


def lyapunov_H(E: float, s: float, constants: DerivedConstants, p: float) -> float:
    g = constants.gamma
    return E * math.exp((p + 3) / (2 * g) * math.exp(-g * s)) + constants.theta * math.exp(-2 * g * s)


def compute_H(frame, quad: BallQuadrature, spec: ProblemSpec, constants: DerivedConstants,
              resolution: float = 0.0) -> FunctionalReport:
    """Evaluate every functional at the frame's s.

    ``resolution`` is the grid spacing measured in y units (h e^s); it only
    feeds the tolerance policy of :func:`lyapunov_check`.
    """
    E0 = compute_E0(frame, quad)
    I = compute_I(frame, quad, spec)
    J = compute_J(frame, quad, constants.gamma)
    E = E0 + I + J
    H = lyapunov_H(E, frame.s, constants, spec.p)
    h1, l2 = norm_bundle(frame, quad)
    return FunctionalReport(
        s=float(frame.s), E0=E0, I=I, J=J, E=E, H=H, D=dissipation(frame, quad),
        norm_H1=h1, norm_ws_L2=l2, Lp1_rho=integrate(quad, np.abs(frame.w) ** (spec.p + 1)),
        resolution=resolution,
    )


# -- verdicts -------------------------------------------------------------

@dataclass
class Verdict:
    name: str
    passed: bool
    margin: float
    tol: float
    threshold_s: float | None = None
    status: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.passed else "fail"

    def to_dict(self):
        return jsonable(asdict(self))


def _trapz_cumulative(s, vals):
    s = np.asarray(s, dtype=float)
    vals = np.asarray(vals, dtype=float)
    out = np.zeros_like(s)
    out[1:] = np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(s))
    return out


LYAPUNOV_C = 1.0


def lyapunov_check(reports, alpha: float, c: float = LYAPUNOV_C, tol: float | None = None,
                   min_tail: int = 3) -> Verdict:
    """Pairwise test of H(s2) - H(s1) + alpha ∫_{s1}^{s2} D ds <= tol.

    The per-pair tolerance defaults to c (h² + Δs²) max(1, |H(s1)|, |H(s2)|),
    where h is the larger y-resolution of the two reports and Δs the local
    sampling step. The empirical S0 is the earliest sample from which every
    later pair passes, with at least ``min_tail`` samples in that tail. The
    monotone form H(s2) <= H(s1) + tol is checked on the same pairs.
    """
    reports = sorted(reports, key=lambda r: r.s)
    if len(reports) < 3:
        raise ValueError("lyapunov_check needs at least 3 reports")
    s = np.array([r.s for r in reports])
    if np.any(np.diff(s) <= 0):
        raise ValueError("report s values must be strictly increasing")
    H = np.array([r.H for r in reports])
    cumD = _trapz_cumulative(s, [r.D for r in reports])
    res = np.array([r.resolution for r in reports])
    ds = np.diff(s)
    ds_at = np.concatenate([ds[:1], np.maximum(ds[1:], ds[:-1]), ds[-1:]])
    n = len(reports)
    ok_from = np.ones(n, dtype=bool)     # all pairs (i, j>i) pass
    ok_mono = np.ones(n, dtype=bool)
    pairs = []
    worst = -math.inf
    for i in range(n):
        for j in range(i + 1, n):
            m = H[j] - H[i] + alpha * (cumD[j] - cumD[i])
            if tol is None:
                h = max(res[i], res[j])
                d = max(ds_at[i], ds_at[j])
                t = c * (h**2 + d**2) * max(1.0, abs(H[i]), abs(H[j]))
            else:
                t = tol
            pairs.append((float(s[i]), float(s[j]), float(m), float(t)))
            worst = max(worst, m - t)
            if m > t:
                ok_from[i] = False
            if H[j] - H[i] > t:
                ok_mono[i] = False
    # suffix: S0 index is the first i such that every i' >= i passes
    S0_idx = None
    for i in range(n - 1, -1, -1):
        if not ok_from[i]:
            break
        S0_idx = i
    passed = S0_idx is not None and n - S0_idx >= min_tail
    mono_ok = passed and bool(np.all(ok_mono[S0_idx:]))
    # margin: worst raw left-hand side over the tail; slack: worst (lhs - tol)
    tail = [(m, t) for (s1, _, m, t) in pairs if S0_idx is not None and s1 >= s[S0_idx]]
    if not tail:
        tail = [(m, t) for (*_, m, t) in pairs]
    return Verdict(
        name="lyapunov", passed=bool(passed and mono_ok),
        margin=float(max(m for m, _ in tail)),
        tol=float(max(t for *_, t in pairs)),
        threshold_s=float(s[S0_idx]) if S0_idx is not None else None,
        details={"pairs": [{"s1": a, "s2": b, "margin": m, "tol": t} for a, b, m, t in pairs],
                 "worst_slack_tail": float(max(m - t for m, t in tail)),
                 "worst_slack_all_pairs": float(worst), "monotone": mono_ok, "c": c},
    )


def spacetime_Lp1(reports) -> float:
    """Trapezoid-in-s integral of ∫|w|^{p+1}rho over the given reports."""
    reports = sorted(reports, key=lambda r: r.s)
    if len(reports) < 2:
        return 0.0
    s = [r.s for r in reports]
    return float(_trapz_cumulative(s, [r.Lp1_rho for r in reports])[-1])


def sliding_windows(reports, width: float = 1.0) -> list[tuple[float, float]]:
    """(s, ∫_s^{s+width}) for every sample s whose window end is also sampled."""
    reports = sorted(reports, key=lambda r: r.s)
    s = np.array([r.s for r in reports])
    out = []
    for i, si in enumerate(s):
        j = int(np.argmin(np.abs(s - (si + width))))
        if abs(s[j] - (si + width)) < 1e-9 and j > i:
            out.append((float(si), spacetime_Lp1(reports[i:j + 1])))
    return out


def spacetime_check(reports, width: float = 1.0, factor: float = 3.0) -> Verdict:
    win = sliding_windows(reports, width)
    if not win:
        return Verdict("spacetime_Lp1", False, math.nan, factor, status="inconclusive",
                       details={"reason": f"s-range shorter than one window of width {width}"})
    vals = np.array([v for _, v in win])
    med = float(np.median(vals))
    ratio = float(vals.max() / med) if med > 0 else (0.0 if vals.max() == 0 else math.inf)
    ok = bool(np.all(np.isfinite(vals)) and ratio <= factor)
    return Verdict("spacetime_Lp1", ok, ratio, factor, threshold_s=win[0][0],
                   details={"windows": [{"s": a, "value": b} for a, b in win], "median": med})


def corollary31_check(reports, M0_cap: float, C_cap: float | None = None) -> Verdict:
    """E stays in [-C_cap, M0_cap] and the cumulative dissipation stays below M0_cap."""
    reports = sorted(reports, key=lambda r: r.s)
    C_cap = M0_cap if C_cap is None else C_cap
    s = [r.s for r in reports]
    E = np.array([r.E for r in reports])
    cumD = _trapz_cumulative(s, [r.D for r in reports])
    ok = bool(np.all(np.isfinite(E)) and E.max() <= M0_cap and E.min() >= -C_cap
              and cumD[-1] <= M0_cap)
    margin = float(max(E.max() - M0_cap, -C_cap - E.min(), cumD[-1] - M0_cap))
    return Verdict("corollary31", ok, margin, M0_cap,
                   details={"E_min": float(E.min()), "E_max": float(E.max()),
                            "cumulative_dissipation": float(cumD[-1]), "C_cap": C_cap})


# -- export ---------------------------------------------------------------

REPORT_COLUMNS = ["s", "E0", "I", "J", "E", "H", "D", "normH1", "normWsL2", "Lp1rho"]


def write_reports_csv(reports, path) -> None:
    rows = [(r.s, r.E0, r.I, r.J, r.E, r.H, r.D, r.norm_H1, r.norm_ws_L2, r.Lp1_rho)
            for r in sorted(reports, key=lambda r: r.s)]
    write_csv(path, REPORT_COLUMNS, rows)


def write_verdict_json(verdict: Verdict, path) -> None:
    write_json(verdict.to_dict(), path)
