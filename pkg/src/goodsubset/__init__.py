"""Sequential sampling for selecting a good-enough subset that contains the best."""

__version__ = "0.1.0"

from .belief import (BeliefState, InvalidConfigurationError, PriorSpec, UndefinedPosteriorError,
                     VarianceMode, init_beliefs, top_split, update)
from .envs import Experiment1, Inventory, SyntheticNormal, inventory_oracle, true_best
from .harness import ExperimentConfig, ExperimentResult, IpcsCurve, MacroResult, run_experiment, run_macro
from .pcs import (PosteriorSnapshot, approximation_gap, ball_probability, estimate_pcs_exact,
                  estimate_pcs_lower_bound, mc_region_probability)
from .policy import AllocationDecision, PolicyKind, aoa_gs_select, ea_select, lookahead_scores, select, vfa
from .ratios import RatioProblem, RatioSolution, solve_ratios

__all__ = [
    "AllocationDecision", "BeliefState", "Experiment1", "ExperimentConfig", "ExperimentResult",
    "InvalidConfigurationError", "Inventory", "IpcsCurve", "MacroResult", "PolicyKind",
    "PosteriorSnapshot", "PriorSpec", "RatioProblem", "RatioSolution", "SyntheticNormal",
    "UndefinedPosteriorError", "VarianceMode", "aoa_gs_select", "approximation_gap",
    "ball_probability", "ea_select", "estimate_pcs_exact", "estimate_pcs_lower_bound",
    "init_beliefs", "inventory_oracle", "lookahead_scores", "mc_region_probability",
    "run_experiment", "run_macro", "select", "solve_ratios", "top_split", "true_best",
    "update", "vfa",
]
