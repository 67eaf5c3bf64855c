"""
Module containing the brute force inner-problem oracle for tiny instances.
Every point of a uniform grid over the price box is visited; points outside
the RKHS ball are skipped.
"""

import logging
import time
from typing import Optional

import numba
import numpy as np

from bope.core.data import EvaluationInstance
from bope.core.errors import OracleError
from bope.core.estimator import BoundConfig, RevenueBall, WeightsLike, as_weights, max_term
from bope.core.kernel import GramFactorization
from bope.core.wcopt.inner import OBJECTIVE_KINDS

logger = logging.getLogger(__name__)

MAX_ORACLE_N = 3


@numba.njit(cache=True)
def _grid_max(
    grids: np.ndarray,
    center: np.ndarray,
    factor: np.ndarray,
    radius_sq: float,
    a: np.ndarray,
    q: np.ndarray,
    p: np.ndarray,
    bern: bool,
    bern_scale: float,
) -> float:
    size, resolution = grids.shape
    digits = np.zeros(size, dtype=np.int64)
    r = grids[:, 0].copy()
    y = np.zeros(size)
    best = -np.inf
    limit = radius_sq * (1.0 + 1e-12) + 1e-15
    while True:
        # Forward substitution L y = r - c
        norm_sq = 0.0
        for i in range(size):
            acc = r[i] - center[i]
            for j in range(i):
                acc -= factor[i, j] * y[j]
            y[i] = acc / factor[i, i]
            norm_sq += y[i] * y[i]
        if norm_sq <= limit:
            beta = 0.0
            var = 0.0
            for i in range(size):
                beta += a[i] * (r[i] - center[i])
                var += q[i] * r[i] * (p[i] - r[i])
            if bern:
                value = beta + bern_scale * np.sqrt(max(var, 0.0))
            else:
                value = beta * beta + var
            if value > best:
                best = value

        # Odometer increment
        k = 0
        while k < size:
            digits[k] += 1
            if digits[k] < resolution:
                r[k] = grids[k, digits[k]]
                break
            digits[k] = 0
            r[k] = grids[k, 0]
            k += 1
        if k == size:
            return best


def brute_force_oracle(
    w: WeightsLike,
    inst: EvaluationInstance,
    ball: RevenueBall,
    gf: GramFactorization,
    objective_kind: str,
    resolution: int,
    bound: Optional[BoundConfig] = None,
    max_grid_points: float = 2e7,
) -> float:
    """
    Maximize the inner objective over a uniform grid of the price box.

    :param w: Weights.
    :param inst: Evaluation instance with n <= 3.
    :param ball: Revenue ball.
    :param gf: Gram factorization defining the ball metric.
    :param objective_kind: mse or bern.
    :param resolution: Grid points per coordinate (>= 2).
    :param bound: Confidence level (bern only).
    :param max_grid_points: Refuse grids with more points than this.
    :return: Largest objective value among ball-feasible grid points.
    """
    if objective_kind not in OBJECTIVE_KINDS:
        raise NotImplementedError(f"Objective {objective_kind} not implemented")
    if objective_kind == "bern" and bound is None:
        raise ValueError("The bern objective needs a BoundConfig")
    if inst.n > MAX_ORACLE_N:
        raise OracleError(f"Grid oracle supports n <= {MAX_ORACLE_N}, got n = {inst.n}")
    if resolution < 2:
        raise OracleError(f"Grid resolution must be at least 2, got {resolution}")
    size = 2 * inst.n
    if float(resolution) ** size > max_grid_points:
        raise OracleError(f"Grid of {resolution}^{size} points exceeds the limit of {max_grid_points:.0f}")

    w = as_weights(w)
    a = w.bias_coefficients()
    q = w.variance_diagonal()
    p = ball.price_box
    grids = np.linspace(np.zeros(size), p, resolution, axis=1)
    constant = 0.0
    bern_scale = 0.0
    if objective_kind == "bern":
        assert bound is not None
        constant = max_term(w, inst, bound)
        bern_scale = float(np.sqrt(2 * bound.log_inv_eps))

    def evaluate(r: np.ndarray) -> float:
        beta = float(a @ (r - ball.r_hat))
        var = float(np.sum(q * r * (p - r)))
        if objective_kind == "mse":
            return beta**2 + var
        return beta + bern_scale * np.sqrt(max(var, 0.0)) + constant

    if ball.gamma_hat == 0:
        nearest = np.array([grids[i, np.argmin(np.abs(grids[i] - ball.r_hat[i]))] for i in range(size)])
        return evaluate(nearest)

    start = time.time()
    best = _grid_max(
        np.ascontiguousarray(grids),
        np.ascontiguousarray(ball.r_hat),
        np.ascontiguousarray(gf.factor),
        ball.gamma_hat**2,
        a,
        q,
        np.ascontiguousarray(p),
        objective_kind == "bern",
        bern_scale,
    )
    logger.debug("Enumerated %s grid points in %.2fs", resolution**size, time.time() - start)
    if not np.isfinite(best):
        logger.warning("No grid point lies inside the ball; falling back to the center")
        return evaluate(ball.r_hat)
    return float(best + constant)
