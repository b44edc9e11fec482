"""Blow-up dynamics of perturbed semilinear wave equations.

u_tt = Δu + |u|^{p-1}u + f(u) + g(u_t), studied numerically in similarity
variables around a blow-up point.
"""
from .model import (DerivedConstants, PerturbationF, PerturbationG, ProblemSpec,
                    critical_exponent, derive_constants, kappa_of, validate_hypotheses)
from .ode import OdeTrace, estimate_blowup_time, integrate_ode
from .wave_solver import (ConeSpec, EvolutionTrace, FieldState, Grid, Policy,
                          evolve_until_blowup, extract_cone_section, step)
from .similarity import SimilarityFrame, delta_rescale, eval_rhs, from_similarity, to_similarity
from .energy import (BallQuadrature, FunctionalReport, Verdict, build_quadrature, compute_E0,
                     compute_H, hardy_ratio, lyapunov_check)
from .experiments import (Scenario, VerdictBundle, criterion_experiment, hardy_experiment,
                          rate_experiment, run_scenario)

__version__ = "0.1.0"
