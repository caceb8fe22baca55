"""Finite-volume discretization of the stochastic growth-fragmentation chain.

The chain of birth sizes along a cell lineage is approximated on a uniform
grid; this package builds the discrete transition matrix, samples the
discrete chain, computes its invariant measure and measures convergence
under mesh refinement.
"""

from .errors import (ConvergenceError, DomainError, EvaluationError, GFError,
                     GridMismatchError, GridWarning)
from .model import (BUILTIN_MODELS, Grid, GrowthParams, ModelSpec, TabulatedS, builtin,
                    continuous_pv, density_p, integral_s, lyapunov_v, prefix_integral,
                    tail_integral, tail_probability, unit_masses)
from .kernel import (TransitionMatrix, build_matrix, compute_q_row, read_matrix_csv,
                     transition_row, write_matrix_csv)
from .measures import (PiecewiseUniformMeasure, evolve_step, invariant_measure, point_mass,
                       project_fv, read_measure_csv, refine, to_density, tv_cross_grid,
                       tv_same_grid, uniform, write_measure_csv, zero_pad)
from .sampler import (ChainSampler, ChainState, empirical_histogram, round_to_grid,
                      simulate_path, spawn_generators, step_sample, write_trajectory_csv)
from .analysis import (ConvergenceReport, DiagnosticSample, DiagnosticsReport, drift_check,
                       fit_order, kernel_discrepancy, order_estimate, refinement_study,
                       tail_check, truncation_gap)

__version__ = "0.1.0"
