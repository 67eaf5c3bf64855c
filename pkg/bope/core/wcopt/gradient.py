import logging
from typing import Optional

import numpy as np

from bope.core.data import EvaluationInstance
from bope.core.estimator import (
    BoundConfig,
    RevenueBall,
    WeightsLike,
    as_weights,
    bias,
    smoothed_max_grad,
    variance,
)

logger = logging.getLogger(__name__)


def danskin_gradient(
    w: WeightsLike,
    r_wc: np.ndarray,
    objective_kind: str,
    inst: EvaluationInstance,
    ball: RevenueBall,
    bound: Optional[BoundConfig] = None,
    smoothing_p: int = 16,
) -> np.ndarray:
    """
    Gradient of h(w) = phi(w, r_wc(w)) taken at the worst-case revenue vector.

    For bern the max term is replaced by its p-norm smoothing and the square
    root term is dropped where the variance vanishes.

    :param w: Weights.
    :param r_wc: Worst-case revenue vector for w.
    :param objective_kind: mse or bern.
    :param inst: Evaluation instance.
    :param ball: Revenue ball.
    :param bound: Confidence level (bern only).
    :param smoothing_p: Exponent of the max term smoothing.
    :return: Gradient with respect to w.
    """
    weights = as_weights(w)
    w = weights.w
    n = inst.n
    r_wc = np.asarray(r_wc, dtype=float)
    r_logged = r_wc[:n]
    delta_logged = r_logged - ball.r_hat[:n]
    spread = r_logged * (inst.logged_prices - r_logged)

    if objective_kind == "mse":
        beta = bias(weights, r_wc, ball)
        return 2 * beta * delta_logged / n + 2 * w * spread / n**2

    if objective_kind == "bern":
        if bound is None:
            raise ValueError("The bern objective needs a BoundConfig")
        log_inv_eps = bound.log_inv_eps
        grad = delta_logged / n
        var = variance(weights, r_wc, inst)
        if var > 0:
            grad = grad + np.sqrt(2 * log_inv_eps) * w * spread / (n**2 * np.sqrt(var))
        scaled = w * inst.logged_prices
        grad = grad + log_inv_eps / (3 * n) * smoothed_max_grad(scaled, smoothing_p) * inst.logged_prices
        return grad

    raise NotImplementedError(f"Objective {objective_kind} not implemented")
