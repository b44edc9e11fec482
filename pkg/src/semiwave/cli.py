"""Command line entry point: ``semiwave <command> --config FILE --out DIR``.

Exit codes: 0 all verdicts pass, 2 some verdict fails, 3 inconclusive,
1 the run aborted (bad config or a failing stage).
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from ._io import write_csv, write_json
from .energy import Verdict, lyapunov_check
from .experiments import (InitialData, PreparedTrace, StageError, VerdictBundle, analyse_trace,
                          criterion_experiment, criterion_summary, eval_fraction, evolve_scenario,
                          hardy_experiment, hardy_verdict_from, load_config, rate_experiment,
                          run_scenario, scenario_from_config, _export)
from .model import derive_constants, kappa_of, spec_from_mapping
from .ode import fit_report, integrate_ode, write_trace_csv
from .wave_solver import Grid, Policy, save_trace


def _finish(out: Path, bundle: VerdictBundle) -> int:
    write_json(bundle.to_dict(), out / "verdicts.json")
    for name, v in bundle.verdicts.items():
        print(f"{name:14s} {v.status:12s} margin={v.margin:.6g} tol={v.tol:.6g}")
    print(f"overall: {bundle.status}")
    return bundle.exit_code


def cmd_ode(cp, out: Path, args) -> int:
    spec = spec_from_mapping(cp["problem"])
    sec = cp["ode"] if cp.has_section("ode") else {}
    trace = integrate_ode(spec, float(sec.get("v0", 1.0)), float(sec.get("v1", 0.0)),
                          stop_threshold=float(sec.get("stop_threshold", 1e8)),
                          dt0=float(sec.get("dt0", 1e-3)),
                          max_steps=int(sec.get("max_steps", 500_000)))
    write_trace_csv(trace, out / "ode_trace.csv")
    rep = fit_report(trace)
    write_json(rep, out / "fit.json")
    tol = float(sec.get("kappa_rtol", 0.01))
    if not rep["reliable"]:
        v = Verdict("kappa", False, math.nan, tol, status="inconclusive", details=rep)
    else:
        err = abs(rep["kappa_est"] - kappa_of(spec.p)) / kappa_of(spec.p)
        v = Verdict("kappa", err <= tol, err, tol, details=rep)
    print(f"T = {rep['T']!r}  kappa_est = {rep['kappa_est']!r}  kappa = {rep['kappa']!r}")
    return _finish(out, VerdictBundle({"kappa": v}))


def _prepared(cp, args):
    scenario = scenario_from_config(cp)
    if getattr(args, "trace", None):
        return scenario, PreparedTrace.from_saved(args.trace)
    return scenario, evolve_scenario(scenario)


def _geometry_verdict(prep: PreparedTrace) -> VerdictBundle:
    trace = prep.trace
    status = "pass"
    if trace.contaminated:
        status = "inconclusive"
    elif prep.cone is None:
        status = "inconclusive"
    v = Verdict("evolve", status == "pass", float(prep.cone.T0) if prep.cone else math.nan, 0.0,
                status=status, details={"stop_reason": prep.stop_reason,
                                        "contaminated": trace.contaminated,
                                        "blew_up": prep.blew_up})
    return VerdictBundle({"evolve": v})


def cmd_evolve(cp, out: Path, args) -> int:
    _, prep = _prepared(cp, args)
    save_trace(prep.trace, out / "trace", prep.manifest_extra())
    if prep.cone is not None:
        print(f"x0 = {prep.cone.x0!r}  T0 = {prep.cone.T0!r}  samples = {len(prep.s_values)}")
    return _finish(out, _geometry_verdict(prep))


def cmd_similarity(cp, out: Path, args) -> int:
    scenario, prep = _prepared(cp, args)
    res = analyse_trace(scenario, prep)
    _export(res, out, prep, save_fields=not args.trace)
    return _finish(out, _geometry_verdict(prep))


def cmd_verify_lyapunov(cp, out: Path, args) -> int:
    scenario, prep = _prepared(cp, args)
    res = analyse_trace(scenario, prep)
    _export(res, out, prep, save_fields=not args.trace)
    if not res.reports:
        return _finish(out, VerdictBundle({"lyapunov": res.bundle.verdicts["lyapunov"]}))
    v = lyapunov_check(res.reports, res.constants.alpha, c=scenario.lyapunov_c)
    if prep.trace.contaminated and v.status == "pass":
        v.status = "inconclusive"
    return _finish(out, VerdictBundle({"lyapunov": v}, res.bundle.notes))


def cmd_run(cp, out: Path, args) -> int:
    res = run_scenario(scenario_from_config(cp), out)
    return _finish(out, res.bundle)


def cmd_criterion(cp, out: Path, args) -> int:
    spec = spec_from_mapping(cp["problem"])
    sec = cp["criterion"] if cp.has_section("criterion") else {}
    ini = cp["initial"] if cp.has_section("initial") else {}
    data = InitialData(kind=sec.get("family", ini.get("kind", "constant")),
                       width=float(ini.get("width", 1.0)), center=float(ini.get("center", 0.0)))
    amps = [float(a) for a in sec.get("amplitudes", "0,1,2,3,4,5,6").split(",")]
    g = cp["grid"] if cp.has_section("grid") else {}
    mode = g.get("mode", "line")
    grid = Grid(mode, float(g.get("L", 2.0)), eval_fraction(g.get("h", "1/64")),
                spec.N if mode == "radial" else 1, g.get("boundary", "reflecting"))
    pol = cp["policy"] if cp.has_section("policy") else {}
    policy = Policy(u_max=float(pol.get("u_max", 1e6)), max_steps=int(pol.get("max_steps", 200_000)),
                    nl_factor=float(pol.get("nl_factor", 0.01)))
    rows = criterion_experiment(spec, data, amps, grid, s3=float(sec.get("s3", 0.0)),
                                node_count=int(sec.get("nodes", 64)), policy=policy)
    cols = ["amplitude", "H", "E", "blew_up", "T_est", "t_stop", "T0", "implication_ok"]
    write_csv(out / "criterion.csv", cols, [[r[c] for c in cols] for r in rows])
    for r in rows:
        print(f"amp={r['amplitude']:<8g} H={r['H']:<14.6g} blew_up={r['blew_up']}")
    return _finish(out, VerdictBundle({"criterion": criterion_summary(rows)}))


def cmd_rate(cp, out: Path, args) -> int:
    scenario = scenario_from_config(cp)
    res = run_scenario(scenario)
    rows, v = rate_experiment(scenario, res)
    cols = list(rows[0])
    write_csv(out / "rate_window.csv", cols, [[r[c] for c in cols] for r in rows])
    return _finish(out, VerdictBundle({"rate_window": v}, res.bundle.notes))


def cmd_hardy(cp, out: Path, args) -> int:
    sec = cp["hardy"] if cp.has_section("hardy") else {}
    if "alpha" in sec:
        alpha = float(sec["alpha"])
    else:
        alpha = derive_constants(spec_from_mapping(cp["problem"])).alpha
    res = hardy_experiment(alpha, int(sec.get("nodes", 64)))
    n1, n2 = sorted(res["ratios"])
    names = list(res["ratios"][n1])
    write_csv(out / "hardy.csv", ["index", f"ratio_n{n1}", f"ratio_n{n2}"],
              [[k, res["ratios"][n1][nm], res["ratios"][n2][nm]] for k, nm in enumerate(names)])
    write_json({"profiles": names, "alpha": alpha}, out / "hardy_profiles.json")
    v = hardy_verdict_from(res, float(sec.get("stability", 0.10)))
    return _finish(out, VerdictBundle({"hardy": v}))


COMMANDS = {
    "ode": (cmd_ode, "ODE blow-up rate experiment"),
    "evolve": (cmd_evolve, "PDE run; stores the fields the similarity stage needs"),
    "similarity": (cmd_similarity, "transform a (saved) trace to similarity variables"),
    "verify-lyapunov": (cmd_verify_lyapunov, "monotonicity check of the Lyapunov functional"),
    "criterion": (cmd_criterion, "amplitude sweep: H < 0 implies blow-up"),
    "rate": (cmd_rate, "scaled norm bands in similarity and physical variables"),
    "hardy": (cmd_hardy, "weighted Hardy ratio over a test family"),
    "run": (cmd_run, "full scenario with every verdict"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semiwave", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="INI scenario file")
        sp.add_argument("--out", required=True, help="output directory")
        if name in ("similarity", "verify-lyapunov"):
            sp.add_argument("--trace", help="directory written by 'evolve' (skips the PDE run)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        cp = load_config(args.config)
        return COMMANDS[args.command][0](cp, out, args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
