from bope.core.baselines.bope import BopeConfig, bope_gradient, bope_objective, bope_weights
from bope.core.baselines.lasso import (
    LassoModel,
    coordinate_descent,
    fit_lasso,
    lasso_objective,
    reference_revenue,
)
from bope.core.baselines.propensity import ip_weights

__all__ = [
    "BopeConfig",
    "bope_gradient",
    "bope_objective",
    "bope_weights",
    "LassoModel",
    "coordinate_descent",
    "fit_lasso",
    "lasso_objective",
    "reference_revenue",
    "ip_weights",
]
