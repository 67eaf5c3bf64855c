import logging
from typing import Callable

import numpy as np

from bope.core.data import EvaluationInstance
from bope.core.errors import PropensityError
from bope.core.estimator import Weights

logger = logging.getLogger(__name__)

# (prices, features) -> densities
Density = Callable[[np.ndarray, np.ndarray], np.ndarray]


def ip_weights(inst: EvaluationInstance, g0: Density, g1: Density) -> Weights:
    """
    Inverse propensity weights g1(p_i, x_i) / g0(p_i, x_i) at the logged points.
    They are used as estimator weights directly (the 1/n is internal).

    :param inst: Evaluation instance.
    :param g0: Logging price density.
    :param g1: Target price density.
    :return: IP weights.
    """
    prices, features = inst.logged_prices, inst.features
    logging_density = np.asarray(g0(prices, features), dtype=float)
    target_density = np.asarray(g1(prices, features), dtype=float)
    unsupported = (logging_density <= 0) & (target_density > 0)
    if np.any(unsupported):
        row = int(np.argmax(unsupported))
        raise PropensityError(f"Row {row}: logging density is zero where the target density is positive")
    w = np.divide(target_density, logging_density, out=np.zeros_like(target_density), where=logging_density > 0)
    return Weights(w)
