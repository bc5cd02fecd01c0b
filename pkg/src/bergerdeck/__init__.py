"""Finite-difference simulator for a rectangular bridge-deck plate with a
nonlocal stretching nonlinearity and damping on a boundary collar."""

from .grid import Grid, QuadratureWeights, build_grid, build_weights
from .model import (DampingField, ExpDegenerate, FeedbackKind, Linear,
                    ModelConfig, Piecewise, Power, SqrtOdd,
                    berger_coefficient, classify_order, damping_mask,
                    eval_feedback, feedback_from_name, feedback_name,
                    make_model, stretch_integral)
from .operators import (assemble_bilaplacian, assemble_d2_1d,
                        assemble_d4_hinged_1d, assemble_dxx, assemble_dy2,
                        assemble_dy4, dump_triplets, free_edge_stencil_report)
from .staticsolve import analytic_oracle, sin_load, solve_static
from .energy import (EnergyRecord, PlateFormEvaluator, dissipation_residual,
                     hstar_form, lambda1_estimate, total_energy)
from .integrator import (FactorizedSystem, OperatorSet, RunResult, SimState,
                         bootstrap, build_operators, dump_snapshot, run, step)
from .decaylaw import (AlgebraicInfinityLaw, AlgebraicOriginLaw, DecayLaw,
                       ExponentialLaw, FitResult, LogarithmicLaw, construct_h,
                       fit_decay, h_tilde, ode_decay, predicted_law)
from .cli import (RunConfig, emit_svg_plot, parse_config, preset,
                  render_config, run_config, write_energy_csv)

__version__ = "0.1.0"
