"""
Module containing the log marginal likelihoods used to fit the kernel
hyperparameters, with the GP prior r ~ N(r_hat, Gamma^2 K) on the logged
revenues.

* Gaussian: R_i = p_i D_i ~ N(r_i, sigma^2), evidence in closed form.
* Bernoulli: D_i ~ Bernoulli(r_i / p_i), evidence by Laplace approximation
  around the posterior mode (found by damped Newton iterations).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

from bope.core.data import PricingDataset
from bope.core.errors import HyperfitError

logger = logging.getLogger(__name__)

CLIP_DELTA = 1e-4
NEWTON_MAX_ITERS = 100
NEWTON_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class HyperParams:
    """
    :param lengthscale_sq: Squared lengthscales (features then price).
    :param gamma_hat_sq: Prior scale Gamma^2 (the squared ball radius).
    :param sigma_sq: Observation noise variance (Gaussian variant only).
    :param evidence: Log marginal likelihood at these values.
    """

    lengthscale_sq: np.ndarray
    gamma_hat_sq: float
    sigma_sq: Optional[float] = None
    evidence: float = float("nan")

    def __post_init__(self):
        lengthscale_sq = np.array(self.lengthscale_sq, dtype=float).reshape(-1)
        if lengthscale_sq.size == 0 or not np.all(lengthscale_sq > 0):
            raise ValueError(f"Lengthscales must be positive, got {lengthscale_sq}")
        if not self.gamma_hat_sq >= 0:
            raise ValueError(f"gamma_hat_sq must be non-negative, got {self.gamma_hat_sq}")
        if self.sigma_sq is not None and not self.sigma_sq > 0:
            raise ValueError(f"sigma_sq must be positive, got {self.sigma_sq}")
        lengthscale_sq.setflags(write=False)
        object.__setattr__(self, "lengthscale_sq", lengthscale_sq)

    @property
    def gamma_hat(self) -> float:
        return float(np.sqrt(self.gamma_hat_sq))

    def to_dict(self) -> dict:
        return {
            "lengthscale_sq": [float(v) for v in self.lengthscale_sq],
            "gamma_hat_sq": float(self.gamma_hat_sq),
            "sigma_sq": None if self.sigma_sq is None else float(self.sigma_sq),
            "evidence": float(self.evidence) if np.isfinite(self.evidence) else None,
        }


def gaussian_evidence(
    ds: PricingDataset,
    r_hat_logged: np.ndarray,
    candidate: HyperParams,
    kernel_mat: np.ndarray,
) -> float:
    """
    log N(R - r_hat; 0, Gamma^2 K + sigma^2 I).

    :param ds: Logged dataset.
    :param r_hat_logged: Reference revenue at the logged points.
    :param candidate: Hyperparameters (sigma_sq required).
    :param kernel_mat: n x n kernel matrix of the logged points at candidate's lengthscales.
    :return: Log evidence.
    """
    if candidate.sigma_sq is None:
        raise ValueError("Gaussian evidence needs sigma_sq")
    residual = ds.revenues - np.asarray(r_hat_logged, dtype=float)
    n = ds.n
    covariance = candidate.gamma_hat_sq * kernel_mat + candidate.sigma_sq * np.eye(n)
    try:
        factor = cholesky(covariance, lower=True)
    except LinAlgError as e:
        raise HyperfitError(f"Gaussian evidence covariance is not positive definite: {e}") from e
    alpha = cho_solve((factor, True), residual)
    return float(-0.5 * residual @ alpha - np.sum(np.log(np.diag(factor))) - 0.5 * n * np.log(2 * np.pi))


def bernoulli_log_likelihood(
    r: np.ndarray,
    prices: np.ndarray,
    demands: np.ndarray,
    delta: float = CLIP_DELTA,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    sum_i D_i log(r_i/p_i) + (1 - D_i) log(1 - r_i/p_i), exact on [delta p, (1-delta) p]
    and continued by its second order Taylor expansion outside.

    :return: Value, gradient and negative Hessian diagonal (W) with respect to r.
    """
    u = r / prices
    u0 = np.clip(u, delta, 1 - delta)
    demands = demands.astype(float)
    value0 = demands * np.log(u0) + (1 - demands) * np.log1p(-u0)
    d1 = demands / u0 - (1 - demands) / (1 - u0)
    d2 = -demands / u0**2 - (1 - demands) / (1 - u0) ** 2
    offset = u - u0
    value = value0 + d1 * offset + 0.5 * d2 * offset**2
    grad_u = d1 + d2 * offset
    return float(np.sum(value)), grad_u / prices, -d2 / prices**2


def _stationary(grad: np.ndarray, a: np.ndarray) -> bool:
    # gradient of the penalized objective in f is grad - K^-1 f = grad - a
    return bool(np.max(np.abs(grad - a)) <= NEWTON_TOL * max(1.0, float(np.max(np.abs(grad)))))


def _laplace(
    r_hat: np.ndarray,
    prices: np.ndarray,
    demands: np.ndarray,
    prior_cov: np.ndarray,
) -> Tuple[float, np.ndarray, bool]:
    """
    Damped Newton search for the posterior mode in the form f = K a.

    :return: Laplace evidence, mode and convergence flag.
    """
    n = len(r_hat)
    identity = np.eye(n)
    a = np.zeros(n)
    f = np.zeros(n)
    loglik, grad, hess = bernoulli_log_likelihood(r_hat, prices, demands)
    objective = loglik

    for _ in range(NEWTON_MAX_ITERS):
        if _stationary(grad, a):
            break
        root_w = np.sqrt(hess)
        factor = cholesky(identity + root_w[:, None] * prior_cov * root_w[None, :], lower=True)
        b = hess * f + grad
        target = b - root_w * cho_solve((factor, True), root_w * (prior_cov @ b))

        step = 1.0
        direction = target - a
        while step > 1e-10:
            a_new = a + step * direction
            f_new = prior_cov @ a_new
            loglik_new, grad_new, hess_new = bernoulli_log_likelihood(r_hat + f_new, prices, demands)
            objective_new = loglik_new - 0.5 * a_new @ f_new
            if objective_new >= objective - 1e-12 * (1 + abs(objective)):
                break
            step *= 0.5
        else:
            break
        a, f, objective = a_new, f_new, objective_new
        loglik, grad, hess = loglik_new, grad_new, hess_new
    converged = _stationary(grad, a)

    root_w = np.sqrt(hess)
    factor = cholesky(identity + root_w[:, None] * prior_cov * root_w[None, :], lower=True)
    evidence = loglik - 0.5 * a @ f - np.sum(np.log(np.diag(factor)))
    return float(evidence), r_hat + f, converged


def bernoulli_laplace_evidence(
    ds: PricingDataset,
    r_hat_logged: np.ndarray,
    candidate: HyperParams,
    kernel_mat: np.ndarray,
) -> float:
    """
    Laplace approximated log evidence of the logged demands.

    :param ds: Logged dataset.
    :param r_hat_logged: Reference revenue at the logged points (prior mean).
    :param candidate: Hyperparameters (sigma_sq ignored).
    :param kernel_mat: n x n kernel matrix of the logged points.
    :return: Log evidence, or -inf when the mode search does not converge.
    """
    r_hat = np.clip(np.asarray(r_hat_logged, dtype=float), 0.0, ds.logged_prices)
    prior_cov = candidate.gamma_hat_sq * kernel_mat
    try:
        evidence, _, converged = _laplace(r_hat, ds.logged_prices, ds.demands, prior_cov)
    except LinAlgError as e:
        logger.debug("Laplace factorization failed: %s", e)
        return -np.inf
    if not converged or not np.isfinite(evidence):
        logger.debug("Laplace mode search did not converge for gamma_hat_sq=%.4g", candidate.gamma_hat_sq)
        return -np.inf
    return evidence


def laplace_mode(ds: PricingDataset, r_hat_logged: np.ndarray, candidate: HyperParams, kernel_mat: np.ndarray):
    """Posterior mode of the logged revenues under the Bernoulli likelihood."""
    r_hat = np.clip(np.asarray(r_hat_logged, dtype=float), 0.0, ds.logged_prices)
    _, mode, _ = _laplace(r_hat, ds.logged_prices, ds.demands, candidate.gamma_hat_sq * kernel_mat)
    return mode
