"""Solver for the 1-D nonlocal Fokker-Planck equation driven by asymmetric
alpha-stable Levy motion: corrected trapezoidal discretization of the
singular jump integrals, Toeplitz/FFT fast operator application, and
maximum-principle-respecting implicit time stepping."""

from .analysis import (MpppPoint, Snapshot, error_norms, exact_levy_density,
                       mirror_check, mppp, snapshots_of, total_mass, window)
from .discretize import (BoundaryCondition, DiscreteOperator, DriftSpec, Grid,
                         assemble_B, assemble_operator, assemble_S,
                         correction_ch, drift_c, drift_slope_bound, g_function,
                         m1_values, m2_values)
from .operators import FastWorkspace, apply_A, dense_matrix, toeplitz_matvec
from .params import (StableParams, c_alpha, k_alpha_beta, levy_measure_density,
                     riemann_zeta, skew_constants)
from .scenarios import (ConfigError, ICSpec, ScenarioConfig, figure_recipe,
                        named_recipe, parse_config)
from .stepping import (SolverError, StepperConfig, Trajectory, TrajectoryEntry,
                       backward_euler_step, check_max_principle_condition,
                       forward_euler_step, make_linear_solver, run)

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition", "ConfigError", "DiscreteOperator", "DriftSpec",
    "FastWorkspace", "Grid", "ICSpec", "MpppPoint", "ScenarioConfig",
    "Snapshot", "SolverError", "StableParams", "StepperConfig", "Trajectory",
    "TrajectoryEntry", "apply_A", "assemble_B", "assemble_S",
    "assemble_operator", "backward_euler_step", "c_alpha",
    "check_max_principle_condition", "correction_ch", "dense_matrix",
    "drift_c", "drift_slope_bound", "error_norms", "exact_levy_density",
    "figure_recipe", "forward_euler_step", "g_function", "k_alpha_beta",
    "levy_measure_density", "m1_values", "m2_values", "make_linear_solver",
    "mirror_check", "mppp", "named_recipe", "parse_config", "riemann_zeta",
    "run", "skew_constants", "snapshots_of", "toeplitz_matvec", "total_mass",
    "window",
]
