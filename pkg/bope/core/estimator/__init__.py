from bope.core.estimator.estimator import (
    BoundConfig,
    RevenueBall,
    Weights,
    WeightsLike,
    as_weights,
    bernstein_penalty,
    bias,
    estimate_coefficients,
    lower_bound,
    max_term,
    mse,
    point_estimate,
    smoothed_max,
    smoothed_max_grad,
    variance,
)

__all__ = [
    "BoundConfig",
    "RevenueBall",
    "Weights",
    "WeightsLike",
    "as_weights",
    "bernstein_penalty",
    "bias",
    "estimate_coefficients",
    "lower_bound",
    "max_term",
    "mse",
    "point_estimate",
    "smoothed_max",
    "smoothed_max_grad",
    "variance",
]
