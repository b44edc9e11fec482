"""Scenario runner: evolve, transform to similarity variables, report, judge.

A scenario run does two evolutions. The first locates the blow-up time at
the observation point; the second replays the identical march and stores
the fields at t = T0 - e^{-s} for every sampled s (and for T0 shifted by
±1%, which feeds the sensitivity report).
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._io import write_csv, write_json
from .energy import (FunctionalReport, Verdict, build_quadrature, compute_H, corollary31_check,
                     hardy_ratio, integrate, lyapunov_check, spacetime_check, write_reports_csv,
                     LYAPUNOV_C)
from .model import (DerivedConstants, ProblemSpec, derive_constants, kappa_of, spec_from_mapping,
                    spec_to_dict)
from .similarity import SimilarityFrame, from_similarity, sample_frame, to_similarity, write_frame_csv
from .wave_solver import (ConeSpec, EvolutionTrace, FieldState, Grid, Policy, evolve_until_blowup,
                          load_trace, save_trace, section_from_state)

VERDICT_NAMES = ("lyapunov", "criterion", "rate_window", "spacetime_Lp1", "corollary31", "hardy")


# -- scenario description -------------------------------------------------

@dataclass
class InitialData:
    """zero | constant(c) | gaussian(amp, width, center) | ode_exact(T)."""

    kind: str = "gaussian"
    amp: float = 10.0
    width: float = 1.0
    center: float = 0.0
    c: float = 1.0
    T: float = 1.0

    def build(self, grid: Grid, p: float) -> FieldState:
        x = grid.points
        if self.kind == "zero":
            u, ut = np.zeros_like(x), np.zeros_like(x)
        elif self.kind == "constant":
            u, ut = np.full_like(x, self.c), np.zeros_like(x)
        elif self.kind == "gaussian":
            u, ut = self.amp * np.exp(-(((x - self.center) / self.width) ** 2)), np.zeros_like(x)
        elif self.kind == "ode_exact":
            a = 2.0 / (p - 1)
            k = kappa_of(p)
            u = np.full_like(x, k * self.T ** (-a))
            ut = np.full_like(x, a * k * self.T ** (-a - 1))
        else:
            raise ValueError(f"unknown initial data family {self.kind!r}")
        return FieldState(0.0, u, ut)


@dataclass
class SGrid:
    start_offset: float = 1.0
    stop_offset: float = 5.0
    step: float = 0.1
    min_cone_nodes: int = 10

    def values(self, T0: float) -> np.ndarray:
        s0 = -math.log(T0)
        n = int(math.floor((self.stop_offset - self.start_offset) / self.step + 1e-9))
        return s0 + self.start_offset + self.step * np.arange(n + 1)


@dataclass
class Scenario:
    spec: ProblemSpec
    initial: InitialData = field(default_factory=InitialData)
    grid: Grid = field(default_factory=lambda: Grid.line(4.0, 1.0 / 512))
    policy: Policy = field(default_factory=Policy)
    cone: ConeSpec | str = "auto"
    delta0: float = 0.5
    s_grid: SGrid = field(default_factory=SGrid)
    node_count: int = 64
    lyapunov_c: float = LYAPUNOV_C
    M0_cap: float | None = None
    name: str = "scenario"


@dataclass
class VerdictBundle:
    verdicts: dict
    notes: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        states = [v.status for v in self.verdicts.values()]
        if any(s == "fail" for s in states):
            return "fail"
        if any(s == "inconclusive" for s in states):
            return "inconclusive"
        return "pass"

    @property
    def exit_code(self) -> int:
        return {"pass": 0, "fail": 2, "inconclusive": 3}[self.status]

    def to_dict(self):
        return {"status": self.status,
                "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
                "notes": self.notes}


@dataclass
class ScenarioResult:
    scenario: Scenario
    constants: DerivedConstants
    trace: EvolutionTrace | None
    cone: ConeSpec | None
    frames: list
    reports: list
    rate_table: list
    bundle: VerdictBundle
    sensitivity: dict = field(default_factory=dict)


# -- pipeline pieces ------------------------------------------------------

def locate_cone(scenario: Scenario, init: FieldState) -> tuple[ConeSpec | None, EvolutionTrace]:
    trace = evolve_until_blowup(init, scenario.spec, scenario.grid, scenario.policy)
    if isinstance(scenario.cone, ConeSpec):
        return scenario.cone, trace
    T0 = trace.local_blowup.get(trace.x_observe)
    if T0 is None:
        return None, trace
    return ConeSpec(trace.x_observe, T0, scenario.delta0), trace


def usable_s(scenario: Scenario, cone: ConeSpec) -> np.ndarray:
    """s-grid cut at the first s whose ball holds fewer than min_cone_nodes grid nodes."""
    pts = scenario.grid.points
    keep = []
    for s in scenario.s_grid.values(cone.T0):
        r = math.exp(-s)
        if scenario.grid.mode == "radial":
            # count the nodes of the full ball through its diameter
            inside = 2 * np.count_nonzero(pts < r) - 1
        else:
            inside = np.count_nonzero(np.abs(pts - cone.x0) < r)
        if inside < scenario.s_grid.min_cone_nodes:
            break
        keep.append(s)
    return np.array(keep)


def similarity_series(trace, cone, svals, quad, spec, constants):
    frames, reports = [], []
    h = trace.grid.h
    for s in svals:
        fr = sample_frame(trace, cone, float(s), quad.nodes, spec.p)
        frames.append(fr)
        reports.append(compute_H(fr, quad, spec, constants, resolution=h * math.exp(s)))
    return frames, reports


def physical_norms(frame: SimilarityFrame, quad) -> tuple[float, float, float]:
    """The three scaled physical norms on B(x0, T0 - t), integrated in x.

    Each term is (T0-t)^k ‖·‖_{L²(B(x0,T0-t))}/(T0-t)^{N/2} with k = 2/(p-1)
    for u and 2/(p-1)+1 for u_t and ∇u.
    """
    sec = from_similarity(frame)
    tau, N = sec.radius, quad.N
    a = 2.0 / (frame.p - 1)

    def l2(v):
        return math.sqrt(tau**N * integrate(quad, v**2, "plain"))

    return (tau**a * l2(sec.u) / tau ** (N / 2),
            tau ** (a + 1) * l2(sec.ut) / tau ** (N / 2),
            tau ** (a + 1) * l2(sec.ux) / tau ** (N / 2))


def rate_table(frames, reports, quad) -> list[dict]:
    rows = []
    for fr, rep in zip(frames, reports):
        A, B, C = physical_norms(fr, quad)
        rows.append({"s": rep.s, "t": fr.t, "bundle": rep.bundle, "norm_H1": rep.norm_H1,
                     "norm_ws_L2": rep.norm_ws_L2, "phys_u": A, "phys_ut": B, "phys_grad": C,
                     "phys_sum": A + B + C})
    return rows


def rate_window_verdict(rows, s_from: float | None = None) -> Verdict:
    """Both norm bundles stay in a positive finite band over s >= s_from."""
    sel = [r for r in rows if s_from is None or r["s"] >= s_from - 1e-12]
    if not sel:
        return Verdict("rate_window", False, math.nan, 0.0, status="inconclusive",
                       details={"reason": "no samples in the rate window"})
    sim = np.array([r["bundle"] for r in sel])
    phys = np.array([r["phys_sum"] for r in sel])
    ok_i = bool(np.all(np.isfinite(sim)) and sim.min() > 0)
    ok_ii = bool(np.all(np.isfinite(phys)) and phys.min() > 0)
    return Verdict("rate_window", ok_i and ok_ii, float(min(sim.min(), phys.min())), 0.0,
                   threshold_s=float(sel[0]["s"]),
                   details={"similarity_band": [float(sim.min()), float(sim.max())],
                            "physical_band": [float(phys.min()), float(phys.max())],
                            "similarity_ok": ok_i, "physical_ok": ok_ii, "agree": ok_i == ok_ii})


def criterion_verdict(reports, blew_up: bool) -> Verdict:
    """H < 0 at some sample must come with detected blow-up."""
    neg = [r.s for r in reports if r.H < 0]
    ok = (not neg) or blew_up
    return Verdict("criterion", ok, float(min(r.H for r in reports)), 0.0,
                   threshold_s=neg[0] if neg else None,
                   details={"H_negative_at": neg, "blew_up": blew_up})


def hardy_verdict(frames, quad, cap: float = 10.0) -> Verdict:
    ratios = [hardy_ratio(f, quad) for f in frames]
    finite = [r for r in ratios if math.isfinite(r)]
    if not finite:
        return Verdict("hardy", False, math.nan, cap, status="inconclusive")
    worst = max(finite)
    return Verdict("hardy", worst <= cap, worst, cap, details={"ratios": ratios})


def _inconclusive(bundle: VerdictBundle, reason: str) -> VerdictBundle:
    for v in bundle.verdicts.values():
        if v.status == "pass":
            v.status = "inconclusive"
            v.details["downgraded"] = reason
    bundle.notes["downgraded"] = reason
    return bundle


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PreparedTrace:
    """Output of the evolve stage: the replayed trace plus the cone and s-samples."""

    trace: EvolutionTrace
    cone: ConeSpec | None
    s_values: np.ndarray
    blew_up: bool
    stop_reason: str

    def manifest_extra(self) -> dict:
        cone = None if self.cone is None else {"x0": self.cone.x0, "T0": self.cone.T0,
                                                "delta0": self.cone.delta0}
        return {"cone": cone, "s_values": [float(s) for s in self.s_values],
                "first_pass_blew_up": self.blew_up, "first_pass_stop_reason": self.stop_reason}

    @classmethod
    def from_saved(cls, out_dir) -> "PreparedTrace":
        trace, man = load_trace(out_dir)
        c = man.get("cone")
        cone = None if c is None else ConeSpec(c["x0"], c["T0"], c["delta0"])
        return cls(trace, cone, np.array(man.get("s_values", [])),
                   bool(man.get("first_pass_blew_up", trace.blew_up)),
                   man.get("first_pass_stop_reason", trace.stop_reason))


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except (ValueError, KeyError, FloatingPointError, ArithmeticError) as exc:
        raise StageError(name, exc) from exc


def evolve_scenario(scenario: Scenario) -> PreparedTrace:
    """Locate the cone, then replay the march storing every field the s-grid needs."""
    spec = scenario.spec
    init = _stage("initial data", scenario.initial.build, scenario.grid, spec.p)
    cone, first = _stage("evolve", locate_cone, scenario, init)
    if cone is None:
        return PreparedTrace(first, None, np.array([]), first.blew_up, first.stop_reason)
    svals = usable_s(scenario, cone)
    if len(svals) < 3:
        raise StageError("cone", ValueError(
            f"only {len(svals)} usable s samples; refine the grid or widen the s-grid"))
    times = set()
    for f in (1.0, 0.99, 1.01):
        T0 = cone.T0 * f
        times |= {T0 - math.exp(-s) for s in svals if 0 <= T0 - math.exp(-s) < first.final.t}
    times = tuple(sorted(times))
    policy = replace(scenario.policy, snapshot_times=times, t_max=max(times))
    trace = _stage("evolve", evolve_until_blowup, init, spec, scenario.grid, policy)
    trace.local_blowup.update(first.local_blowup)
    trace.contaminated = trace.contaminated or first.contaminated
    return PreparedTrace(trace, cone, svals, first.blew_up, first.stop_reason)


def _available(trace, cone, svals):
    out = []
    for s in svals:
        t = cone.T0 - math.exp(-s)
        try:
            trace.snapshot_at(t)
        except KeyError:
            continue
        out.append(float(s))
    return out


def analyse_trace(scenario: Scenario, prep: PreparedTrace, out_dir=None) -> ScenarioResult:
    """transform -> functional reports -> verdicts (-> files) on a prepared trace."""
    constants = derive_constants(scenario.spec)
    trace, cone = prep.trace, prep.cone
    if cone is None:
        bundle = VerdictBundle({n: Verdict(n, False, math.nan, math.nan, status="inconclusive",
                                           details={"reason": "no blow-up point"})
                                for n in VERDICT_NAMES},
                               {"stop_reason": prep.stop_reason})
        result = ScenarioResult(scenario, constants, trace, None, [], [], [], bundle)
        if out_dir is not None:
            _export(result, Path(out_dir), prep)
        return result

    spec = scenario.spec
    quad = _stage("quadrature", build_quadrature, constants.alpha, scenario.node_count,
                  scenario.grid.mode, spec.N)
    valid = _available(trace, cone, prep.s_values)
    if len(valid) < 3:
        raise StageError("similarity", ValueError("fewer than 3 stored samples in the trace"))
    frames, reports = _stage("similarity", similarity_series, trace, cone, valid, quad, spec, constants)
    rows = rate_table(frames, reports, quad)
    bundle = _stage("verdicts", judge, reports, frames, rows, quad, constants, scenario, prep.blew_up)

    sens = {}
    for tag, f in (("T0-1%", 0.99), ("T0+1%", 1.01)):
        c = replace(cone, T0=cone.T0 * f)
        ok = _available(trace, c, valid)
        if len(ok) < 3:
            sens[tag] = {"status": "skipped", "reason": "too few samples before the run ended"}
            continue
        fr2, rep2 = similarity_series(trace, c, ok, quad, spec, constants)
        b2 = judge(rep2, fr2, rate_table(fr2, rep2, quad), quad, constants, scenario, prep.blew_up)
        sens[tag] = {"status": b2.status,
                     "verdicts": {k: v.status for k, v in b2.verdicts.items()},
                     "lyapunov_margin": b2.verdicts["lyapunov"].margin,
                     "lyapunov_S0": b2.verdicts["lyapunov"].threshold_s}
    bundle.notes.update({"T0": cone.T0, "x0": cone.x0, "s_range": [valid[0], valid[-1]],
                         "T0_sensitivity": sens, "stop_reason": prep.stop_reason,
                         "contaminated": trace.contaminated})
    if trace.contaminated:
        _inconclusive(bundle, "boundary contamination")
    result = ScenarioResult(scenario, constants, trace, cone, frames, reports, rows, bundle, sens)
    if out_dir is not None:
        _export(result, Path(out_dir), prep)
    return result


def run_scenario(scenario: Scenario, out_dir=None) -> ScenarioResult:
    """evolve -> cone -> frames -> functional reports -> verdicts (-> files)."""
    return analyse_trace(scenario, evolve_scenario(scenario), out_dir)


def judge(reports, frames, rows, quad, constants, scenario: Scenario, blew_up: bool) -> VerdictBundle:
    lyap = lyapunov_check(reports, constants.alpha, c=scenario.lyapunov_c)
    # rate window starts one unit of s after the first sample when the range allows
    s_first = reports[0].s + 1.0 if reports[-1].s >= reports[0].s + 1.0 else reports[0].s
    M0 = scenario.M0_cap if scenario.M0_cap is not None else 10.0 * max(1.0, abs(reports[0].H))
    return VerdictBundle({
        "lyapunov": lyap,
        "criterion": criterion_verdict(reports, blew_up),
        "rate_window": rate_window_verdict(rows, s_first),
        "spacetime_Lp1": spacetime_check(reports),
        "corollary31": corollary31_check(reports, M0),
        "hardy": hardy_verdict(frames, quad),
    })


def _export(result: ScenarioResult, out: Path, prep: PreparedTrace | None = None,
            save_fields: bool = True) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if result.reports:
        write_reports_csv(result.reports, out / "functionals.csv")
        fdir = out / "frames"
        fdir.mkdir(exist_ok=True)
        for k, fr in enumerate(result.frames):
            write_frame_csv(fr, fdir / f"frame_{k:04d}.csv")
        cols = ["s", "t", "bundle", "norm_H1", "norm_ws_L2", "phys_u", "phys_ut", "phys_grad", "phys_sum"]
        write_csv(out / "rate_window.csv", cols, [[r[c] for c in cols] for r in result.rate_table])
    if save_fields and prep is not None:
        save_trace(prep.trace, out / "trace", prep.manifest_extra())
    write_json(result.bundle.to_dict(), out / "verdicts.json")


# -- named experiments ----------------------------------------------------

def criterion_experiment(spec: ProblemSpec, data: InitialData, amplitudes, grid: Grid | None = None,
                         s3: float = 0.0, node_count: int = 64, policy: Policy | None = None) -> list[dict]:
    """Sign of H at s3 (cone apex T0 = e^{-s3} over the data maximum) against blow-up.

    Each amplitude is evolved up to t = T0. Rows with H < 0 must blow up
    inside that window; rows with H >= 0 are reported without a claim.
    """
    constants = derive_constants(spec)
    grid = grid or Grid.line(2.0, 1.0 / 64, "reflecting")
    T0 = math.exp(-s3)
    quad = build_quadrature(constants.alpha, node_count, grid.mode, spec.N)
    base = policy or Policy()
    rows = []
    for amp in amplitudes:
        d = replace(data, amp=amp, c=amp)
        init = d.build(grid, spec.p)
        x0 = 0.0 if grid.mode == "radial" else float(grid.points[np.argmax(np.abs(init.u))])
        if d.kind in ("constant", "zero", "ode_exact"):
            x0 = 0.0
        cone = ConeSpec(x0, T0)
        sec = section_from_state(init, grid, cone, x0 + T0 * quad.nodes, "cubic")
        frame = to_similarity(sec, cone, 0.0, spec.p, spec.N).replace(y=quad.nodes.copy(), s=s3)
        rep = compute_H(frame, quad, spec, constants)
        tr = evolve_until_blowup(init, spec, grid, replace(base, t_max=T0))
        T_est = tr.local_blowup.get(tr.x_observe, math.nan)
        rows.append({"amplitude": float(amp), "H": rep.H, "E": rep.E, "blew_up": tr.blew_up,
                     "T_est": T_est, "t_stop": tr.final.t, "T0": T0,
                     "implication_ok": (rep.H >= 0) or tr.blew_up})
    return rows


def criterion_summary(rows) -> Verdict:
    neg = [r for r in rows if r["H"] < 0]
    bad = [r for r in neg if not r["blew_up"]]
    return Verdict("criterion", not bad, float(len(bad)), 0.0,
                   details={"rows_H_negative": len(neg), "counterexamples": len(bad)})


def rate_experiment(scenario: Scenario, result: ScenarioResult | None = None) -> tuple[list, Verdict]:
    """Tabulate the scaled physical norms and the similarity bundle; judge the band."""
    result = result or run_scenario(scenario)
    if result.cone is None:
        raise ValueError("rate experiment refused: no blow-up point in this scenario")
    return result.rate_table, result.bundle.verdicts["rate_window"]


def hardy_family(alpha: float):
    """Fifty test profiles (w, w') on (-1, 1), including boundary-concentrated ones."""
    fam = []
    fam.append(("one", lambda y: np.ones_like(y), lambda y: np.zeros_like(y)))
    fam.append(("1+y", lambda y: 1 + y, lambda y: np.ones_like(y)))
    for k in range(1, 9):
        fam.append((f"y^{k}", lambda y, k=k: y**k, lambda y, k=k: k * y ** (k - 1)))
    for b in (0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0):
        fam.append((f"(1-y^2)^{b}", lambda y, b=b: (1 - y**2) ** b,
                    lambda y, b=b: -2 * b * y * (1 - y**2) ** (b - 1)))
    for b in (0.1, 0.25, 0.5):
        fam.append((f"y(1-y^2)^{b}", lambda y, b=b: y * (1 - y**2) ** b,
                    lambda y, b=b: (1 - y**2) ** b - 2 * b * y**2 * (1 - y**2) ** (b - 1)))
    fam.append(("y^2(1-y^2)^0.1", lambda y: y**2 * (1 - y**2) ** 0.1,
                lambda y: 2 * y * (1 - y**2) ** 0.1 - 0.2 * y**3 * (1 - y**2) ** (-0.9)))
    for c in (-0.9, -0.5, 0.0, 0.5, 0.9):
        for sig in (0.15, 0.3, 1.0):
            fam.append((f"gauss({c},{sig})",
                        lambda y, c=c, sig=sig: np.exp(-((y - c) / sig) ** 2),
                        lambda y, c=c, sig=sig: -2 * (y - c) / sig**2 * np.exp(-((y - c) / sig) ** 2)))
    for k in range(1, 6):
        fam.append((f"cos{k}", lambda y, k=k: np.cos(k * np.pi * y / 2),
                    lambda y, k=k: -k * np.pi / 2 * np.sin(k * np.pi * y / 2)))
        fam.append((f"sin{k}", lambda y, k=k: np.sin(k * np.pi * y / 2),
                    lambda y, k=k: k * np.pi / 2 * np.cos(k * np.pi * y / 2)))
    for eps in (0.05, 0.1, 0.2):
        fam.append((f"layer{eps}", lambda y, e=eps: np.cosh(y / e) / np.cosh(1 / e),
                    lambda y, e=eps: np.sinh(y / e) / (e * np.cosh(1 / e))))
    return fam


def hardy_experiment(alpha: float, node_count: int = 64, p: float = 3.0) -> dict:
    """Hardy ratios of the test family at node_count and 2*node_count nodes."""
    out = {}
    for n in (node_count, 2 * node_count):
        quad = build_quadrature(alpha, n)
        vals = {}
        for name, w, dw in hardy_family(alpha):
            y = quad.nodes
            fr = SimilarityFrame(0.0, 0.0, 1.0, p, y, w(y), np.zeros_like(y), dw(y))
            vals[name] = hardy_ratio(fr, quad)
        out[n] = vals
    caps = [max(v.values()) for v in out.values()]
    return {"ratios": out, "cap": caps[0], "cap_refined": caps[1],
            "relative_change": abs(caps[1] - caps[0]) / caps[0], "family_size": len(out[node_count])}


def hardy_verdict_from(result: dict, stability: float = 0.10) -> Verdict:
    finite = all(math.isfinite(v) for vals in result["ratios"].values() for v in vals.values())
    ok = finite and result["relative_change"] <= stability and result["family_size"] >= 50
    return Verdict("hardy", ok, result["relative_change"], stability,
                   details={"cap": result["cap"], "cap_refined": result["cap_refined"],
                            "family_size": result["family_size"]})


# -- configuration files --------------------------------------------------

def _section(cp, name):
    return cp[name] if cp.has_section(name) else {}


def load_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    with open(path) as fh:
        cp.read_file(fh)
    return cp


def scenario_from_config(cp: configparser.ConfigParser) -> Scenario:
    spec = spec_from_mapping(cp["problem"])
    ini = _section(cp, "initial")
    initial = InitialData(kind=ini.get("kind", "gaussian"), amp=float(ini.get("amp", 10.0)),
                          width=float(ini.get("width", 1.0)), center=float(ini.get("center", 0.0)),
                          c=float(ini.get("c", 1.0)), T=float(ini.get("T", 1.0)))
    g = _section(cp, "grid")
    mode = g.get("mode", "line")
    grid = Grid(mode, float(g.get("L", 4.0)), float(eval_fraction(g.get("h", "1/512"))),
                spec.N if mode == "radial" else 1, g.get("boundary", "absorbing"))
    pol = _section(cp, "policy")
    policy = Policy(cfl=float(pol.get("cfl", 0.9)), u_max=float(pol.get("u_max", 1e6)),
                    max_steps=int(pol.get("max_steps", 200_000)),
                    nl_factor=float(pol.get("nl_factor", 0.01)))
    cn = _section(cp, "cone")
    delta0 = float(cn.get("delta0", 0.5))
    if cn.get("T0", "auto") == "auto":
        cone = "auto"
    else:
        cone = ConeSpec(float(cn.get("x0", 0.0)), float(cn["T0"]), delta0)
    sg = _section(cp, "similarity")
    s_grid = SGrid(float(sg.get("start_offset", 1.0)), float(sg.get("stop_offset", 5.0)),
                   float(sg.get("step", 0.1)), int(sg.get("min_cone_nodes", 10)))
    chk = _section(cp, "checks")
    m0 = chk.get("M0_cap")
    return Scenario(spec=spec, initial=initial, grid=grid, policy=policy, cone=cone, delta0=delta0,
                    s_grid=s_grid, node_count=int(sg.get("nodes", 64)),
                    lyapunov_c=float(chk.get("lyapunov_c", LYAPUNOV_C)),
                    M0_cap=None if m0 in (None, "") else float(m0),
                    name=cp.get("scenario", "name", fallback="scenario"))


def eval_fraction(text: str) -> float:
    """Parse '0.002' or '1/512'."""
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def scenario_to_config(sc: Scenario) -> str:
    import io

    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["scenario"] = {"name": sc.name}
    cp["problem"] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in spec_to_dict(sc.spec).items()}
    i = sc.initial
    cp["initial"] = {"kind": i.kind, "amp": repr(i.amp), "width": repr(i.width),
                     "center": repr(i.center), "c": repr(i.c), "T": repr(i.T)}
    cp["grid"] = {"mode": sc.grid.mode, "L": repr(sc.grid.L), "h": repr(sc.grid.h),
                  "boundary": sc.grid.boundary}
    p = sc.policy
    cp["policy"] = {"cfl": repr(p.cfl), "u_max": repr(p.u_max), "max_steps": str(p.max_steps),
                    "nl_factor": repr(p.nl_factor)}
    if isinstance(sc.cone, ConeSpec):
        cp["cone"] = {"x0": repr(sc.cone.x0), "T0": repr(sc.cone.T0), "delta0": repr(sc.cone.delta0)}
    else:
        cp["cone"] = {"T0": "auto", "delta0": repr(sc.delta0)}
    g = sc.s_grid
    cp["similarity"] = {"start_offset": repr(g.start_offset), "stop_offset": repr(g.stop_offset),
                        "step": repr(g.step), "min_cone_nodes": str(g.min_cone_nodes),
                        "nodes": str(sc.node_count)}
    cp["checks"] = {"lyapunov_c": repr(sc.lyapunov_c)}
    if sc.M0_cap is not None:
        cp["checks"]["M0_cap"] = repr(sc.M0_cap)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# -- stock scenarios ------------------------------------------------------

def gaussian_fixture(h: float = 1.0 / 512) -> Scenario:
    """Amplitude-10 Gaussian, p = 3, q = 2, f = 0.1|u|u, g = 0.1 u_t, on [-4, 4]."""
    from .model import PerturbationF, PerturbationG

    spec = ProblemSpec(p=3.0, q=2.0, M=1.0, N=1, f=PerturbationF.power_q(0.1),
                       g=PerturbationG.linear(0.1))
    return Scenario(spec=spec, initial=InitialData("gaussian", amp=10.0, width=1.0),
                    grid=Grid.line(4.0, h), name="gaussian_fixture")


def ode_exact_scenario(p: float = 3.0, T: float = 1.0, h: float = 1.0 / 64) -> Scenario:
    """Spatially constant data on the ODE blow-up curve kappa (T - t)^{-2/(p-1)}."""
    spec = ProblemSpec(p=p, q=min(2.0, p - 0.5), M=1.0)
    return Scenario(spec=spec, initial=InitialData("ode_exact", T=T),
                    grid=Grid.line(T + 1.0, h, "reflecting"), name="ode_exact",
                    s_grid=SGrid(1.0, 4.0, 0.1))
