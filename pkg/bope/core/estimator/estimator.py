"""
Module containing the weighted doubly robust revenue estimator

    R(w) = (1/n) sum_i w_i (p_i D_i - r_hat_i) + (1/n) sum_{i>n} r_hat_i

and its exact finite-sample bias, variance, MSE and Bernstein penalty under
Bernoulli demand. Vectors indexed over the 2n points put the logged points
first and the target points second.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from bope.core.data import EvaluationInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Weights:
    """
    Estimator weights, one per logged point. Sign and scale are free.
    """

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        if w.size == 0 or not np.all(np.isfinite(w)):
            raise ValueError("Weights must be a non-empty finite vector")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def bias_coefficients(self) -> np.ndarray:
        """b(w) = (1/n)(w, -1), so that Bias = b(w)^T (r - r_hat)."""
        return np.concatenate([self.w, -np.ones(self.n)]) / self.n

    def variance_diagonal(self) -> np.ndarray:
        """Diagonal of Q(w) = diag(w^2, 0) / n^2."""
        return np.concatenate([self.w**2, np.zeros(self.n)]) / self.n**2

    def variance_linear(self, price_vector: np.ndarray) -> np.ndarray:
        """v(w) = Q(w) p, so that Var = v^T r - r^T Q r."""
        return self.variance_diagonal() * price_vector


WeightsLike = Union[Weights, np.ndarray]


def as_weights(w: WeightsLike) -> Weights:
    return w if isinstance(w, Weights) else Weights(w)


@dataclass(frozen=True, eq=False)
class RevenueBall:
    """
    Plausible revenue vectors: (r - r_hat)^T G^-1 (r - r_hat) <= gamma_hat^2 and 0 <= r <= p.
    The reference revenue is clipped into the box at construction.
    """

    r_hat: np.ndarray
    gamma_hat: float
    price_box: np.ndarray

    def __post_init__(self):
        price_box = np.array(self.price_box, dtype=float).reshape(-1)
        r_hat = np.array(self.r_hat, dtype=float).reshape(-1)
        if r_hat.shape != price_box.shape:
            raise ValueError(f"Reference revenue has shape {r_hat.shape}, price box {price_box.shape}")
        if not np.all(price_box > 0):
            raise ValueError("Price box must be strictly positive")
        if not np.all(np.isfinite(r_hat)):
            raise ValueError("Reference revenue must be finite")
        if not self.gamma_hat >= 0:
            raise ValueError(f"Ball radius must be non-negative, got {self.gamma_hat}")
        r_hat = np.clip(r_hat, 0.0, price_box)
        r_hat.setflags(write=False)
        price_box.setflags(write=False)
        object.__setattr__(self, "r_hat", r_hat)
        object.__setattr__(self, "price_box", price_box)
        object.__setattr__(self, "gamma_hat", float(self.gamma_hat))

    @property
    def size(self) -> int:
        return self.r_hat.shape[0]


@dataclass(frozen=True)
class BoundConfig:
    """
    :param epsilon: The bound holds with probability at least 1 - epsilon.
    """

    epsilon: float = 0.1

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"Confidence level epsilon must be in (0, 1], got {self.epsilon}")

    @property
    def log_inv_eps(self) -> float:
        return float(-np.log(self.epsilon))


def point_estimate(w: WeightsLike, inst: EvaluationInstance, r_hat: np.ndarray) -> float:
    """
    Doubly robust revenue estimate of the target policy.

    :param w: Weights.
    :param inst: Evaluation instance (logged demands are used).
    :param r_hat: Reference revenue over the 2n points.
    :return: The estimate.
    """
    w = as_weights(w).w
    n = inst.n
    r_hat = np.asarray(r_hat, dtype=float)
    correction = w @ (inst.logged_prices * inst.demands - r_hat[:n])
    return float((correction + np.sum(r_hat[n:])) / n)


def bias(w: WeightsLike, r: np.ndarray, ball: RevenueBall) -> float:
    """Bias(w, r) = b(w)^T (r - r_hat)."""
    return float(as_weights(w).bias_coefficients() @ (np.asarray(r, dtype=float) - ball.r_hat))


def variance(w: WeightsLike, r: np.ndarray, inst: EvaluationInstance) -> float:
    """Var(w, r) = (1/n^2) sum_i w_i^2 r_i (p_i - r_i) over logged points."""
    w = as_weights(w).w
    r_logged = np.asarray(r, dtype=float)[: inst.n]
    return float(np.sum(w**2 * r_logged * (inst.logged_prices - r_logged)) / inst.n**2)


def mse(w: WeightsLike, r: np.ndarray, inst: EvaluationInstance, ball: RevenueBall) -> float:
    """MSE(w, r) = Bias^2 + Var."""
    return bias(w, r, ball) ** 2 + variance(w, r, inst)


def smoothed_max(values: np.ndarray, p: Optional[int]) -> float:
    """
    max |values| or, for an integer p, its p-norm smoothing (sum |v|^p)^(1/p).
    """
    values = np.abs(np.asarray(values, dtype=float))
    top = float(np.max(values)) if values.size else 0.0
    if p is None or top == 0.0:
        return top
    return top * float(np.sum((values / top) ** p) ** (1.0 / p))


def smoothed_max_grad(values: np.ndarray, p: int) -> np.ndarray:
    """
    Gradient of (sum |v|^p)^(1/p) with respect to v.
    """
    values = np.asarray(values, dtype=float)
    total = smoothed_max(values, p)
    if total == 0.0:
        return np.zeros_like(values)
    return (np.abs(values) / total) ** (p - 1) * np.sign(values)


def max_term(w: WeightsLike, inst: EvaluationInstance, cfg: BoundConfig, smoothing_p: Optional[int] = None) -> float:
    """(1/3n) max_i |w_i| p_i log(1/eps), optionally p-norm smoothed."""
    w = as_weights(w).w
    return smoothed_max(w * inst.logged_prices, smoothing_p) * cfg.log_inv_eps / (3 * inst.n)


def bernstein_penalty(
    w: WeightsLike,
    r: np.ndarray,
    inst: EvaluationInstance,
    ball: RevenueBall,
    cfg: BoundConfig,
    smoothing_p: Optional[int] = None,
) -> float:
    """
    Bern(w, r) = Bias + sqrt(2 Var log(1/eps)) + (1/3n) max_i |w_i| p_i log(1/eps).

    :param smoothing_p: Replace the max by a p-norm (used for gradients only).
    """
    var = max(variance(w, r, inst), 0.0)
    return (
        bias(w, r, ball)
        + float(np.sqrt(2.0 * var * cfg.log_inv_eps))
        + max_term(w, inst, cfg, smoothing_p=smoothing_p)
    )


def lower_bound(estimate: float, wc_bern: float) -> float:
    """Revenue lower bound max(0, estimate - worst-case penalty)."""
    return max(0.0, float(estimate) - float(wc_bern))


def estimate_coefficients(w: WeightsLike, inst: EvaluationInstance, r_hat: np.ndarray):
    """
    The estimate as an affine function of the demand vector: a + c^T D.

    :return: Tuple (a, c).
    """
    w = as_weights(w).w
    n = inst.n
    r_hat = np.asarray(r_hat, dtype=float)
    offset = (np.sum(r_hat[n:]) - w @ r_hat[:n]) / n
    return float(offset), w * inst.logged_prices / n
