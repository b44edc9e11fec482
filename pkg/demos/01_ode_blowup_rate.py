"""The spatially constant problem: v'' = v^p + f(v) + g(v').

Constant data make the Laplacian vanish, so the wave equation reduces to an
ODE whose blow-up is explicit enough to check the solver and the rate fit.
"""
# %%
import math

from semiwave import PerturbationF, ProblemSpec, integrate_ode, kappa_of
from semiwave.ode import estimate_blowup_time, fit_rate

spec = ProblemSpec(p=3, q=2)
print("kappa for p = 3:", kappa_of(3.0), "=", math.sqrt(2))

# %% Start from rest at v = 1 and integrate until v reaches 1e8.
tr = integrate_ode(spec, 1.0, 0.0)
fit = estimate_blowup_time(tr, spec.p)
print(f"{len(tr.times)} RK4 steps, status: {tr.status}")
print(f"blow-up time T = {fit.T:.13f}  (fit residual {fit.residual:.1e})")
print(f"rate v (T-t)^(2/(p-1)) -> {fit_rate(tr, fit.T, spec.p):.10f}")

# %% Energy conservation gives T as a quadrature, an independent check.
from scipy.integrate import quad

T_exact, _ = quad(lambda v: 1 / math.sqrt((v**4 - 1) / 2), 1, math.inf)
print(f"energy integral        T = {T_exact:.13f}")

# %% A bounded perturbation changes T but not the rate.
osc = ProblemSpec(p=3, q=2, f=PerturbationF.bounded_osc(1.0))
for v0 in (1.0, 2.0, 5.0):
    tr = integrate_ode(osc, v0, 0.0)
    f = estimate_blowup_time(tr, 3.0)
    print(f"v0 = {v0}: T = {f.T:.8f}, rate = {fit_rate(tr, f.T, 3.0):.6f}")
