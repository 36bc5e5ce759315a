"""Ensemble-weighting algorithms, the hindsight-optimal BCRP and identity checks."""

from .bcrp import BCRPResult, log_wealth, solve_bcrp, solve_bcrp_log
from .identities import (best_model, regret_vs_best_model, telescoping_regret_check,
                         trace_statistics)
from .runner import StackerTrace, run_stacker, scaled_densities
from .updates import (ALGORITHMS, StackerConfig, StackerState, apply_update,
                      bma_hedge_equivalence_step, dma_update, dons_update, eg_update,
                      hedge_update, init_state, obma_update, ons_update, smoothed_eg_update,
                      softbayes_factors, softbayes_online_update, softbayes_rate,
                      softbayes_update)

__all__ = [
    "ALGORITHMS", "BCRPResult", "StackerConfig", "StackerState", "StackerTrace",
    "apply_update", "best_model", "bma_hedge_equivalence_step", "dma_update",
    "dons_update", "eg_update", "hedge_update", "init_state", "log_wealth",
    "obma_update", "ons_update", "regret_vs_best_model", "run_stacker",
    "scaled_densities", "smoothed_eg_update", "softbayes_factors",
    "softbayes_online_update", "softbayes_rate", "softbayes_update", "solve_bcrp",
    "solve_bcrp_log", "telescoping_regret_check", "trace_statistics",
]
