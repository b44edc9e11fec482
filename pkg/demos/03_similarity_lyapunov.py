"""Similarity variables around the blow-up point and the Lyapunov functional.

With T0 the blow-up time at x0 = 0, the solution is viewed through
y = x/(T0-t), s = -log(T0-t), w = (T0-t)^{2/(p-1)} u. The perturbed energy H
should decrease in s, and w should settle near the constant kappa.
"""
# %%
import math

from semiwave.experiments import gaussian_fixture, run_scenario

scenario = gaussian_fixture()
print("perturbations:", scenario.spec.f, scenario.spec.g)
res = run_scenario(scenario, "demo_output/fixture")
print(f"T0 = {res.cone.T0:.8f}, {len(res.reports)} similarity samples")

# %% The functionals along the sampled s-range.
print(f"{'s':>7} {'E0':>10} {'J':>11} {'H':>10} {'D':>10} {'bundle':>8}")
for r in res.reports[::3]:
    print(f"{r.s:7.3f} {r.E0:10.6f} {r.J:11.3e} {r.H:10.5f} {r.D:10.3e} {r.bundle:8.5f}")
print("stationary value of E0 at w = kappa: 4/3 =", 4 / 3)

# %% Verdicts, with the T0 +/- 1% sensitivity.
for name, v in res.bundle.verdicts.items():
    print(f"{name:14s} {v.status:5s} margin={v.margin:.4g}")
for tag, entry in res.sensitivity.items():
    print(tag, entry["status"], "lyapunov margin", entry.get("lyapunov_margin"))

# %% The profile at the last sample is close to kappa near y = 0.
w = res.frames[-1].w
print(f"w at the centre: {w[len(w) // 2]:.6f}, kappa = {math.sqrt(2):.6f}")
