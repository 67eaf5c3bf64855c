"""
Module containing the homoscedastic balanced estimator. Its worst case over
the RKHS ball without the price box is Gamma^2 b(w)^T G b(w), so the weights
minimize a convex quadratic with a closed form solution.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve

from bope.core.data import EvaluationInstance
from bope.core.estimator import Weights, WeightsLike, as_weights
from bope.core.kernel import GramFactorization

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BopeConfig:
    """
    :param sigma_sq: Homoscedastic noise variance of the revenue observations.
    """

    sigma_sq: float = 1.0

    def __post_init__(self):
        if not self.sigma_sq > 0:
            raise ValueError(f"sigma_sq must be positive, got {self.sigma_sq}")


def bope_objective(w: WeightsLike, gf: GramFactorization, gamma_hat: float, cfg: BopeConfig) -> float:
    """
    Gamma^2 b(w)^T G b(w) + (sigma^2 / n^2) |w|^2
    """
    weights = as_weights(w)
    b = weights.bias_coefficients()
    return float(gamma_hat**2 * b @ gf.matvec(b) + cfg.sigma_sq * weights.w @ weights.w / weights.n**2)


def bope_gradient(w: WeightsLike, gf: GramFactorization, gamma_hat: float, cfg: BopeConfig) -> np.ndarray:
    weights = as_weights(w)
    n = weights.n
    b = weights.bias_coefficients()
    return 2 * gamma_hat**2 * gf.matvec(b)[:n] / n + 2 * cfg.sigma_sq * weights.w / n**2


def bope_weights(inst: EvaluationInstance, gf: GramFactorization, gamma_hat: float, cfg: BopeConfig) -> Weights:
    """
    Solve (Gamma^2 G11 + sigma^2 I) w = Gamma^2 G12 1.

    :param inst: Evaluation instance.
    :param gf: Gram factorization over the 2n points.
    :param gamma_hat: Ball radius.
    :param cfg: Noise variance.
    :return: BOPE weights.
    """
    if not gamma_hat >= 0:
        raise ValueError(f"Ball radius must be non-negative, got {gamma_hat}")
    n = inst.n
    regularized = gf.regularized
    lhs = gamma_hat**2 * regularized[:n, :n] + cfg.sigma_sq * np.eye(n)
    rhs = gamma_hat**2 * regularized[:n, n:].sum(axis=1)
    w = solve(lhs, rhs, assume_a="pos")
    logger.debug("BOPE weights: mean %.4g, max |w| %.4g", float(np.mean(w)), float(np.max(np.abs(w))))
    return Weights(w)
