"""Problem instances, perturbation families and derived constants.

The equation is u_tt = Δu + |u|^{p-1}u + f(u) + g(u_t) with f and g drawn
from a closed set of families, each with a closed-form antiderivative of f.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

import numpy as np

F_KINDS = ("zero", "powerq", "osc")
G_KINDS = ("zero", "linear", "saturating")


@dataclass(frozen=True)
class PerturbationF:
    """f(u): ``zero``, ``powerq`` (a|u|^{q-1}u) or ``osc`` (a sin u)."""

    kind: str = "zero"
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in F_KINDS:
            raise ValueError(f"unknown f family {self.kind!r}; expected one of {F_KINDS}")

    @classmethod
    def zero(cls):
        return cls("zero", 0.0)

    @classmethod
    def power_q(cls, a):
        return cls("powerq", float(a))

    @classmethod
    def bounded_osc(cls, a):
        return cls("osc", float(a))


@dataclass(frozen=True)
class PerturbationG:
    """g(v): ``zero``, ``linear`` (b v) or ``saturating`` (b v/(1+|v|))."""

    kind: str = "zero"
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in G_KINDS:
            raise ValueError(f"unknown g family {self.kind!r}; expected one of {G_KINDS}")

    @classmethod
    def zero(cls):
        return cls("zero", 0.0)

    @classmethod
    def linear(cls, b):
        return cls("linear", float(b))

    @classmethod
    def saturating(cls, b):
        return cls("saturating", float(b))


def critical_exponent(N: int) -> float:
    """Conformal exponent 1 + 4/(N-1); infinite for N = 1."""
    return math.inf if N == 1 else 1.0 + 4.0 / (N - 1)


@dataclass(frozen=True)
class ProblemSpec:
    p: float
    q: float
    M: float = 1.0
    N: int = 1
    f: PerturbationF = field(default_factory=PerturbationF)
    g: PerturbationG = field(default_factory=PerturbationG)
    theta: float | None = None

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"need p > 1, got p={self.p}")
        if not self.q < self.p:
            raise ValueError(f"need q < p, got q={self.q}, p={self.p}")
        if not self.M > 0:
            raise ValueError(f"need M > 0, got M={self.M}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"need an integer dimension N >= 1, got N={self.N}")
        if self.p >= critical_exponent(self.N):
            raise ValueError(
                f"p={self.p} is not subcritical: p >= p_c={critical_exponent(self.N)} for N={self.N}"
            )
        if self.f.kind == "powerq" and self.q <= 0:
            raise ValueError("the powerq family needs q > 0")


@dataclass(frozen=True)
class DerivedConstants:
    alpha: float
    gamma: float
    kappa: float
    p_c: float
    theta: float


def derive_constants(spec: ProblemSpec, theta_override: float | None = None) -> DerivedConstants:
    p, q, N = spec.p, spec.q, spec.N
    alpha = 2.0 / (p - 1) - (N - 1) / 2.0
    if alpha <= 0:
        raise ValueError(f"supercritical weight exponent: alpha={alpha} <= 0")
    gamma = min(0.5, (p - q) / (p - 1))
    kappa = (2.0 * (p + 1) / (p - 1) ** 2) ** (1.0 / (p - 1))
    if theta_override is not None:
        theta = float(theta_override)
    elif spec.theta is not None:
        theta = float(spec.theta)
    else:
        theta = 1.0
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    return DerivedConstants(alpha=alpha, gamma=gamma, kappa=kappa,
                            p_c=critical_exponent(N), theta=theta)


def kappa_of(p: float) -> float:
    """Amplitude of the ODE blow-up profile kappa (T - t)^{-2/(p-1)}.

    Raises OverflowError when kappa exceeds double range (p within ~0.02 of 1).
    """
    try:
        return (2.0 * (p + 1) / (p - 1) ** 2) ** (1.0 / (p - 1))
    except OverflowError:
        raise OverflowError(f"kappa is not representable in double precision for p={p}") from None


def power(u, p):
    """Odd power |u|^{p-1} u, elementwise."""
    return np.abs(u) ** (p - 1) * u


def eval_f(spec: ProblemSpec, x):
    f = spec.f
    if f.kind == "zero":
        return np.zeros_like(np.asarray(x, dtype=float))[()]
    if f.kind == "powerq":
        return f.a * power(np.asarray(x, dtype=float), spec.q)[()]
    return f.a * np.sin(x)


def eval_F(spec: ProblemSpec, x):
    """Antiderivative of f with F(0) = 0."""
    f = spec.f
    x = np.asarray(x, dtype=float)
    if f.kind == "zero":
        return np.zeros_like(x)[()]
    if f.kind == "powerq":
        return (f.a * np.abs(x) ** (spec.q + 1) / (spec.q + 1))[()]
    return (f.a * (1.0 - np.cos(x)))[()]


def eval_g(spec: ProblemSpec, x):
    g = spec.g
    x = np.asarray(x, dtype=float)
    if g.kind == "zero":
        return np.zeros_like(x)[()]
    if g.kind == "linear":
        return (g.b * x)[()]
    return (g.b * x / (1.0 + np.abs(x)))[()]


@dataclass(frozen=True)
class HypothesisReport:
    passed: bool
    worst_ratio_f: float
    worst_ratio_g: float
    worst_x_f: float
    worst_x_g: float


def validate_hypotheses(spec: ProblemSpec, sample_count: int = 2001,
                        range: float = 1e3) -> HypothesisReport:
    """Sample |f|/(M(1+|x|^q)) and |g|/(M(1+|x|)) on [-range, range].

    The lattice mixes a uniform grid with a geometric one so that both the
    neighbourhood of zero and the far field are probed.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    half = sample_count // 2
    uniform = np.linspace(-range, range, sample_count - 2 * (half // 2))
    geom = np.geomspace(1e-6, range, half // 2)
    x = np.concatenate([uniform, geom, -geom])
    ax = np.abs(x)
    rf = np.abs(eval_f(spec, x)) / (spec.M * (1.0 + ax ** spec.q))
    rg = np.abs(eval_g(spec, x)) / (spec.M * (1.0 + ax))
    i, j = int(np.argmax(rf)), int(np.argmax(rg))
    return HypothesisReport(
        passed=bool(rf[i] <= 1.0 and rg[j] <= 1.0),
        worst_ratio_f=float(rf[i]), worst_ratio_g=float(rg[j]),
        worst_x_f=float(x[i]), worst_x_g=float(x[j]),
    )


# -- structured-text form -------------------------------------------------

def spec_to_dict(spec: ProblemSpec) -> dict:
    d = {
        "p": spec.p, "q": spec.q, "M": spec.M, "N": spec.N,
        "f.kind": spec.f.kind, "f.a": spec.f.a,
        "g.kind": spec.g.kind, "g.b": spec.g.b,
    }
    if spec.theta is not None:
        d["theta"] = spec.theta
    return d


def spec_from_mapping(m) -> ProblemSpec:
    theta = m.get("theta")
    return ProblemSpec(
        p=float(m["p"]), q=float(m["q"]), M=float(m.get("M", 1.0)), N=int(m.get("N", 1)),
        f=PerturbationF(str(m.get("f.kind", "zero")), float(m.get("f.a", 0.0))),
        g=PerturbationG(str(m.get("g.kind", "zero")), float(m.get("g.b", 0.0))),
        theta=None if theta in (None, "") else float(theta),
    )


def dumps_spec(spec: ProblemSpec, section: str = "problem") -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp[section] = {k: repr(v) if isinstance(v, float) else str(v)
                   for k, v in spec_to_dict(spec).items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads_spec(text: str, section: str = "problem") -> ProblemSpec:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    return spec_from_mapping(cp[section])
