"""
Module containing the LASSO demand model used as the reference revenue.

The model minimizes (1/2n) |D - b0 - X b|^2 + lambda |b|_1 over the logged
rows, where X holds the standardized features and price and the intercept b0
is not penalized. The penalty defaults to 5-fold cross validation.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from sklearn.model_selection import KFold

from bope.core.baselines.qp import nonnegative_qp
from bope.core.data import EvaluationInstance, PricingDataset

logger = logging.getLogger(__name__)

LASSO_SOLVERS = ("coordinate", "qp")


@dataclass(frozen=True, eq=False)
class LassoModel:
    """
    :param coefficients: Slopes of the standardized features, slope of the
        standardized price, then the intercept (d + 2 values).
    :param l1_penalty: Penalty the model was fitted with.
    :param x_mean: Design column means used for standardization.
    :param x_scale: Design column scales (1 for constant columns).
    :param history: Objective value after each coordinate descent sweep.
    """

    coefficients: np.ndarray
    l1_penalty: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    history: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("LASSO coefficients must be finite")

    @property
    def slopes(self) -> np.ndarray:
        return self.coefficients[:-1]

    @property
    def intercept(self) -> float:
        return float(self.coefficients[-1])

    def predict_demand(self, features: np.ndarray, prices: np.ndarray) -> np.ndarray:
        """Unclipped demand prediction at (features, price) rows."""
        design = np.column_stack([np.atleast_2d(features), np.asarray(prices, dtype=float)])
        return self.intercept + ((design - self.x_mean) / self.x_scale) @ self.slopes


def lasso_objective(design: np.ndarray, target: np.ndarray, slopes: np.ndarray, intercept: float, l1: float) -> float:
    """(1/2n) |y - b0 - X b|^2 + l1 |b|_1"""
    residual = target - intercept - design @ slopes
    return float(residual @ residual / (2 * len(target)) + l1 * np.sum(np.abs(slopes)))


def soft_threshold(value: float, threshold: float) -> float:
    return float(np.sign(value) * max(abs(value) - threshold, 0.0))


def coordinate_descent(
    design: np.ndarray,
    target: np.ndarray,
    l1: float,
    max_sweeps: int = 10000,
    tol: float = 1e-8,
) -> Tuple[np.ndarray, float, List[float]]:
    """
    Cyclic coordinate descent for the LASSO with an unpenalized intercept.

    :param design: n x k design.
    :param target: n targets.
    :param l1: Penalty.
    :param max_sweeps: Sweep limit.
    :param tol: Stop when the largest coordinate update is below this.
    :return: Slopes, intercept and the objective after each sweep.
    """
    n, k = design.shape
    slopes = np.zeros(k)
    intercept = float(np.mean(target))
    residual = target - intercept
    col_sq = np.sum(design**2, axis=0) / n
    history: List[float] = []

    for sweep in range(max_sweeps):
        largest = 0.0
        for j in range(k):
            if col_sq[j] <= 1e-14:
                continue
            old = slopes[j]
            rho = design[:, j] @ residual / n + col_sq[j] * old
            new = soft_threshold(rho, l1) / col_sq[j]
            if new != old:
                residual -= design[:, j] * (new - old)
                slopes[j] = new
                largest = max(largest, abs(new - old))
        shift = float(np.mean(residual))
        intercept += shift
        residual -= shift
        largest = max(largest, abs(shift))
        history.append(lasso_objective(design, target, slopes, intercept, l1))
        if largest < tol:
            break
    else:
        logger.warning("LASSO coordinate descent did not converge in %s sweeps", max_sweeps)
    return slopes, intercept, history


def qp_lasso(design: np.ndarray, target: np.ndarray, l1: float, solver: str = "quadprog") -> Tuple[np.ndarray, float]:
    """
    Solve the same LASSO objective as a QP over (b0, b+, b-) with b = b+ - b-.
    """
    n, k = design.shape
    stacked = np.column_stack([np.ones(n), design, -design])
    mat_p = stacked.T @ stacked / n
    vec_q = -stacked.T @ target / n + l1 * np.concatenate([[0.0], np.ones(2 * k)])
    # the intercept is free, the split slopes are sign constrained
    nonnegative = np.arange(1 + 2 * k) > 0
    solution, used = nonnegative_qp(mat_p, vec_q, nonnegative, solver=solver)
    logger.debug("LASSO QP solved by %s", used)
    return solution[1 : k + 1] - solution[k + 1 :], float(solution[0])


def _design(ds: PricingDataset) -> np.ndarray:
    return np.column_stack([ds.features, ds.logged_prices])


def _cv_penalty(design: np.ndarray, target: np.ndarray, folds: int, seed: int) -> float:
    """Pick the penalty with the smallest 5-fold validation MSE on a log grid."""
    n = len(target)
    centered = target - target.mean()
    lambda_max = float(np.max(np.abs(design.T @ centered)) / n)
    if lambda_max <= 0:
        return 0.0
    grid = lambda_max * np.logspace(0, -3, 20)
    splitter = KFold(n_splits=min(folds, n), shuffle=True, random_state=seed)
    scores = np.zeros(len(grid))
    for train, valid in splitter.split(design):
        for g, l1 in enumerate(grid):
            slopes, intercept, _ = coordinate_descent(design[train], target[train], l1)
            residual = target[valid] - intercept - design[valid] @ slopes
            scores[g] += residual @ residual
    best = int(np.argmin(scores))
    logger.debug("Cross-validated LASSO penalty %.4g (lambda_max %.4g)", grid[best], lambda_max)
    return float(grid[best])


def fit_lasso(
    ds: PricingDataset,
    l1_penalty: Optional[float] = None,
    folds: int = 5,
    seed: int = 0,
    solver: str = "coordinate",
    max_sweeps: int = 10000,
    tol: float = 1e-8,
) -> LassoModel:
    """
    Fit the demand LASSO on the logged rows.

    :param ds: Logged dataset (n >= 2).
    :param l1_penalty: Penalty; None selects it by cross validation.
    :param folds: Cross validation folds.
    :param seed: Fold shuffling seed.
    :param solver: coordinate or qp (quadprog with cvxopt fallback).
    :param max_sweeps: Coordinate descent sweep limit.
    :param tol: Coordinate descent tolerance.
    :return: The fitted model.
    """
    if ds.n < 2:
        raise ValueError(f"LASSO needs at least 2 rows, got {ds.n}")
    if solver not in LASSO_SOLVERS:
        raise NotImplementedError(f"LASSO solver {solver} not implemented")
    if l1_penalty is not None and not l1_penalty >= 0:
        raise ValueError(f"LASSO penalty must be non-negative, got {l1_penalty}")

    raw = _design(ds)
    x_mean = raw.mean(axis=0)
    x_scale = raw.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    design = (raw - x_mean) / x_scale
    target = ds.demands.astype(float)

    if l1_penalty is None:
        l1_penalty = _cv_penalty(design, target, folds, seed)

    history: List[float] = []
    if solver == "coordinate":
        slopes, intercept, history = coordinate_descent(design, target, l1_penalty, max_sweeps, tol)
    else:
        slopes, intercept = qp_lasso(design, target, l1_penalty)
    logger.debug("LASSO fit: %s non-zero slopes, intercept %.4g", int(np.sum(slopes != 0)), intercept)
    return LassoModel(
        coefficients=np.concatenate([slopes, [intercept]]),
        l1_penalty=float(l1_penalty),
        x_mean=x_mean,
        x_scale=x_scale,
        history=tuple(history),
    )


def reference_revenue(model: LassoModel, inst: EvaluationInstance) -> np.ndarray:
    """
    r_hat_i = p_i * clip(predicted demand, 0, 1) at all 2n points.
    """
    demand = model.predict_demand(inst.points[:, :-1], inst.price_vector)
    return inst.price_vector * np.clip(demand, 0.0, 1.0)
