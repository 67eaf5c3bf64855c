"""
Module containing the hyperparameter search: Nelder-Mead on the log
parameters, restarted from deterministic initial points.
"""

import logging
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import pdist

from bope.core.data import PricingDataset
from bope.core.errors import HyperfitError
from bope.core.hyperfit.evidence import HyperParams, bernoulli_laplace_evidence, gaussian_evidence
from bope.core.kernel import kernel_matrix

logger = logging.getLogger(__name__)

VARIANTS = ("gaussian", "bernoulli")
LOG_BOUND = 25.0


def median_heuristic(points: np.ndarray) -> np.ndarray:
    """
    Per-dimension median of the squared pairwise differences (1 where it vanishes).
    """
    points = np.atleast_2d(points)
    if points.shape[0] < 2:
        return np.ones(points.shape[1])
    medians = np.array([np.median(pdist(points[:, [j]], "sqeuclidean")) for j in range(points.shape[1])])
    medians[~(medians > 0)] = 1.0
    return medians


def logged_points(ds: PricingDataset) -> np.ndarray:
    """Standardized (features, price) of the logged rows."""
    design = np.column_stack([ds.features, ds.logged_prices])
    scale = design.std(axis=0)
    scale[scale == 0] = 1.0
    return (design - design.mean(axis=0)) / scale


class _EvidenceSearch:
    """Negative evidence over log parameters, remembering the best evaluation."""

    def __init__(self, variant: str, ds: PricingDataset, r_hat_logged: np.ndarray, points: np.ndarray):
        self.variant = variant
        self.ds = ds
        self.r_hat_logged = r_hat_logged
        self.points = points
        self.dim = points.shape[1]
        self.evaluations = 0
        self.best: Optional[HyperParams] = None

    def unpack(self, theta: np.ndarray) -> HyperParams:
        values = np.exp(np.clip(theta, -LOG_BOUND, LOG_BOUND))
        sigma_sq = float(values[self.dim + 1]) if self.variant == "gaussian" else None
        return HyperParams(lengthscale_sq=values[: self.dim], gamma_hat_sq=float(values[self.dim]), sigma_sq=sigma_sq)

    def pack(self, params: HyperParams) -> np.ndarray:
        theta = [*np.log(params.lengthscale_sq), np.log(max(params.gamma_hat_sq, np.exp(-LOG_BOUND)))]
        if self.variant == "gaussian":
            sigma_sq = params.sigma_sq if params.sigma_sq is not None else 1.0
            theta.append(np.log(sigma_sq))
        return np.array(theta)

    def evidence(self, params: HyperParams) -> float:
        kernel_mat = kernel_matrix(self.points, self.points, params.lengthscale_sq)
        try:
            if self.variant == "gaussian":
                return gaussian_evidence(self.ds, self.r_hat_logged, params, kernel_mat)
            return bernoulli_laplace_evidence(self.ds, self.r_hat_logged, params, kernel_mat)
        except HyperfitError as e:
            logger.debug("Evidence failed: %s", e)
            return -np.inf

    def __call__(self, theta: np.ndarray) -> float:
        params = self.unpack(theta)
        value = self.evidence(params)
        self.evaluations += 1
        if self.best is None or value > self.best.evidence:
            self.best = HyperParams(params.lengthscale_sq, params.gamma_hat_sq, params.sigma_sq, value)
        return -value if np.isfinite(value) else np.inf


def fit_hyperparams(
    variant: str,
    ds: PricingDataset,
    r_hat_logged: np.ndarray,
    points: Optional[np.ndarray] = None,
    budget: int = 400,
    extra_starts: Sequence[HyperParams] = (),
    progress: Optional[Callable[[int, HyperParams], None]] = None,
) -> HyperParams:
    """
    Maximize the evidence of a variant over the hyperparameters.

    :param variant: gaussian or bernoulli.
    :param ds: Logged dataset.
    :param r_hat_logged: Reference revenue at the logged points.
    :param points: Kernel inputs of the logged points (defaults to the
        standardized logged design).
    :param budget: Evidence evaluations per Nelder-Mead restart.
    :param extra_starts: Additional starting points (also evaluated as candidates).
    :param progress: Called after each restart with (restart index, best so far).
    :return: Best hyperparameters found with their evidence.
    """
    if variant not in VARIANTS:
        raise NotImplementedError(f"Evidence variant {variant} not implemented")
    if budget < 1:
        raise ValueError(f"Search budget must be positive, got {budget}")
    points = logged_points(ds) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] != ds.n:
        raise ValueError(f"Got {points.shape[0]} kernel inputs for {ds.n} logged rows")
    r_hat_logged = np.asarray(r_hat_logged, dtype=float)

    search = _EvidenceSearch(variant, ds, r_hat_logged, points)
    residual = ds.revenues - r_hat_logged
    scale = max(float(np.var(residual)), 1e-3)
    median = median_heuristic(points)
    starts: List[HyperParams] = [
        HyperParams(np.ones(points.shape[1]), scale / 2, scale / 2 if variant == "gaussian" else None),
        HyperParams(median, scale / 2, scale / 2 if variant == "gaussian" else None),
        HyperParams(10 * median, scale / 2, scale / 2 if variant == "gaussian" else None),
    ]
    starts += list(extra_starts)

    for k, start in enumerate(starts):
        theta0 = search.pack(start)
        search(theta0)
        minimize(
            search,
            theta0,
            method="Nelder-Mead",
            options={"maxfev": budget, "xatol": 1e-6, "fatol": 1e-9},
        )
        best = search.best
        assert best is not None
        logger.debug("Restart %s: best evidence %.6g after %s evaluations", k, best.evidence, search.evaluations)
        if progress is not None:
            progress(k, best)
    if not np.isfinite(best.evidence):
        logger.warning("No %s evidence evaluation was finite; returning the unit lengthscale start", variant)
        return HyperParams(starts[0].lengthscale_sq, starts[0].gamma_hat_sq, starts[0].sigma_sq, -np.inf)
    logger.info(
        "Fitted %s hyperparameters: gamma_hat_sq=%.4g, evidence=%.6g", variant, best.gamma_hat_sq, best.evidence
    )
    return best
