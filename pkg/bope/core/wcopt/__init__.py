from bope.core.wcopt.gradient import danskin_gradient
from bope.core.wcopt.inner import (
    OBJECTIVE_KINDS,
    SolverConfig,
    WorstCaseResult,
    solve_inner,
    wc_bern_inner,
    wc_mse_inner,
)
from bope.core.wcopt.oracle import MAX_ORACLE_N, brute_force_oracle
from bope.core.wcopt.outer import solve_weights
from bope.core.wcopt.projection import FeasibleSet

__all__ = [
    "danskin_gradient",
    "OBJECTIVE_KINDS",
    "SolverConfig",
    "WorstCaseResult",
    "solve_inner",
    "wc_bern_inner",
    "wc_mse_inner",
    "MAX_ORACLE_N",
    "brute_force_oracle",
    "solve_weights",
    "FeasibleSet",
]
