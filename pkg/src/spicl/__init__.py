"""Adaptive tracking control with online sparse model recovery.

A fixed-step simulation library for linearly parametrized control-affine
systems: certainty-equivalence tracking, sliding-window data filtering, an
eigenvalue-driven history stack, and an L1-regularized concurrent-learning
estimate update, plus the sweep study and CLI built on top.
"""

from .basis import (BasisLibrary, ControlEffectiveness, monomial_library,
                    right_pseudoinverse)
from .controller import GainReport, check_gains, control_input
from .errors import (ConfigError, DelayLookupError, DivergenceError,
                     RankDeficiencyError)
from .estimator import (EstimatorState, cost, sign_selection,
                        smooth_projection, update_direction)
from .experiment import (DEFAULT_LAMBDA_GRID, RunResult, SimConfig,
                         SweepReport, classify_sparsity, confusion_counts,
                         demo_config, desired_trajectory, lambda_sweep,
                         precision_recall_f1, run_scenario)
from .history_stack import (HistoryStack, MemoryRegressor, StackEntry,
                            min_eigenvalue, normalized_terms)
from .integrator import FilteredPair, HistoryBuffer, rk4_step

__version__ = "0.1.0"

__all__ = [
    "BasisLibrary", "ControlEffectiveness", "monomial_library",
    "right_pseudoinverse", "GainReport", "check_gains", "control_input",
    "ConfigError", "DelayLookupError", "DivergenceError",
    "RankDeficiencyError", "EstimatorState", "cost", "sign_selection",
    "smooth_projection", "update_direction", "DEFAULT_LAMBDA_GRID",
    "RunResult", "SimConfig", "SweepReport", "classify_sparsity",
    "confusion_counts", "demo_config", "desired_trajectory", "lambda_sweep",
    "precision_recall_f1", "run_scenario", "HistoryStack", "MemoryRegressor",
    "StackEntry", "min_eigenvalue", "normalized_terms", "FilteredPair",
    "HistoryBuffer", "rk4_step",
]
