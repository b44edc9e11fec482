"""H < 0 forces blow-up; the weighted Hardy ratio stays bounded.

For constant data c with u_t = 0 and cone apex T0 = 1, the energy at s = 0
is (4/3)(5c^2/2 - c^4/4), which turns negative once c^2 > 10.
"""
# %%
from semiwave.experiments import InitialData, criterion_experiment, hardy_experiment
from semiwave.model import ProblemSpec

spec = ProblemSpec(p=3, q=2)
rows = criterion_experiment(spec, InitialData("constant"), [0, 1, 2, 3, 3.5, 4, 6])
print(f"{'c':>5} {'E':>10} {'H':>12} {'blew up':>8} {'T':>8}")
for r in rows:
    print(f"{r['amplitude']:5.2f} {r['E']:10.4f} {r['H']:12.2f} {str(r['blew_up']):>8} {r['T_est']:8.4f}")
print("H < 0 without blow-up:", sum(r["H"] < 0 and not r["blew_up"] for r in rows))

# %% Rows with H >= 0 may still blow up: the criterion is one-sided.

# %% Hardy ratios over the 50 test profiles at 64 and 128 nodes.
res = hardy_experiment(alpha=1.0, node_count=64)
ranked = sorted(res["ratios"][64].items(), key=lambda kv: -kv[1])
for name, r in ranked[:5]:
    print(f"{name:18s} {r:.6f}")
print(f"cap {res['cap']:.6f} -> {res['cap_refined']:.6f} after doubling the nodes")
