from bope.core.synth.montecarlo import (
    EstimatorFit,
    mc_decomposition,
    mc_per_seed,
    summarize,
)
from bope.core.synth.worlds import (
    SyntheticWorld,
    draw_instance,
    make_overlap_setting,
    make_setting_a,
    make_setting_b,
    make_world,
    sample_truncated_prices,
    setting_a_demand,
    setting_b_demand,
    simulate_demands,
    true_target_revenue,
)

__all__ = [
    "EstimatorFit",
    "mc_decomposition",
    "mc_per_seed",
    "summarize",
    "SyntheticWorld",
    "draw_instance",
    "make_overlap_setting",
    "make_setting_a",
    "make_setting_b",
    "make_world",
    "sample_truncated_prices",
    "setting_a_demand",
    "setting_b_demand",
    "simulate_demands",
    "true_target_revenue",
]
