from bope.core.hyperfit.evidence import (
    HyperParams,
    bernoulli_laplace_evidence,
    bernoulli_log_likelihood,
    gaussian_evidence,
    laplace_mode,
)
from bope.core.hyperfit.search import fit_hyperparams, logged_points, median_heuristic

__all__ = [
    "HyperParams",
    "bernoulli_laplace_evidence",
    "bernoulli_log_likelihood",
    "gaussian_evidence",
    "laplace_mode",
    "fit_hyperparams",
    "logged_points",
    "median_heuristic",
]
