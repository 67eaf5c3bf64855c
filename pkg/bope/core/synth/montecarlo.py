"""
Module containing the Monte-Carlo bias^2 / variance / MSE decomposition.

For each seed one instance is drawn, every estimator is fitted, and `reps`
fresh demand vectors are simulated. Empirical quantities use the plug-in
(divide by reps) variance, so MSE = Bias^2 + Variance holds exactly.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from bope.core.data import EvaluationInstance
from bope.core.estimator import WeightsLike, estimate_coefficients, point_estimate
from bope.core.synth.worlds import SyntheticWorld, draw_instance, simulate_demands, true_target_revenue
from bope.core.utils import derive_rng, ordered_map

logger = logging.getLogger(__name__)

PROTOCOLS = ("honest", "refit")
SUMMARY_COLUMNS = ["method", "mse", "bias_sq", "variance", "mse_se", "bias_sq_se", "variance_se", "estimate", "truth"]


@dataclass(frozen=True, eq=False)
class EstimatorFit:
    """Weights and reference revenue defining one doubly robust estimate."""

    weights: WeightsLike
    r_hat: np.ndarray


EstimatorFn = Callable[[EvaluationInstance], EstimatorFit]


def _decompose(estimates: np.ndarray, truth: float) -> Dict[str, float]:
    mean = float(np.mean(estimates))
    return {
        "bias_sq": (mean - truth) ** 2,
        "variance": float(np.mean((estimates - mean) ** 2)),
        "mse": float(np.mean((estimates - truth) ** 2)),
        "estimate": mean,
        "truth": truth,
    }


def mc_per_seed(
    estimators: Union[EstimatorFn, Mapping[str, EstimatorFn]],
    world: SyntheticWorld,
    n: int,
    reps: int,
    seeds: Sequence[int],
    protocol: str = "honest",
    workers: int = 1,
    progress: bool = False,
) -> pd.DataFrame:
    """
    Per-seed decomposition rows (seed, method, mse, bias_sq, variance, estimate, truth).

    :param estimators: Estimator factories by method name (a bare callable is named "estimator").
    :param world: Synthetic world; its seed is replaced by each entry of `seeds`.
    :param n: Customers per instance.
    :param reps: Demand realizations per seed (>= 2).
    :param seeds: World seeds.
    :param protocol: honest fits once per seed, refit fits on every realization.
    :param workers: Worker threads over seeds (0 = available parallelism).
    :param progress: Show a progress bar.
    """
    if reps < 2:
        raise ValueError(f"reps must be at least 2, got {reps}")
    if protocol not in PROTOCOLS:
        raise NotImplementedError(f"Monte-Carlo protocol {protocol} not implemented")
    if callable(estimators):
        estimators = {"estimator": estimators}

    def run_seed(seed: int) -> List[dict]:
        inst, true_r = draw_instance(replace(world, seed=seed), n)
        truth = true_target_revenue(true_r)
        demands = simulate_demands(inst, true_r, derive_rng(seed, "reps"), reps)
        rows = []
        for method, estimator_fn in estimators.items():
            if protocol == "honest":
                fit = estimator_fn(inst)
                offset, coef = estimate_coefficients(fit.weights, inst, fit.r_hat)
                estimates = offset + demands @ coef
            else:
                estimates = np.empty(reps)
                for k in range(reps):
                    inst_k = inst.with_demands(demands[k])
                    fit = estimator_fn(inst_k)
                    estimates[k] = point_estimate(fit.weights, inst_k, fit.r_hat)
            rows.append({"seed": seed, "method": method, **_decompose(estimates, truth)})
            logger.debug("Seed %s, %s: mse %.4g", seed, method, rows[-1]["mse"])
        return rows

    per_seed = ordered_map(run_seed, list(seeds), workers=workers, desc="seeds", progress=progress)
    return pd.DataFrame([row for rows in per_seed for row in rows])


def summarize(per_seed: pd.DataFrame) -> pd.DataFrame:
    """Average per-seed rows by method with standard errors over seeds."""
    if per_seed.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    rows = []
    for method, group in per_seed.groupby("method", sort=False):
        count = len(group)
        row = {"method": method}
        for column in ("mse", "bias_sq", "variance"):
            values = group[column].to_numpy()
            row[column] = float(np.mean(values))
            row[f"{column}_se"] = float(np.std(values, ddof=1) / np.sqrt(count)) if count > 1 else 0.0
        row["estimate"] = float(group["estimate"].mean())
        row["truth"] = float(group["truth"].mean())
        rows.append(row)
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def mc_decomposition(
    estimators: Union[EstimatorFn, Mapping[str, EstimatorFn]],
    world: SyntheticWorld,
    n: int,
    reps: int,
    seeds: Sequence[int],
    protocol: str = "honest",
    workers: int = 1,
    progress: bool = False,
) -> pd.DataFrame:
    """
    Monte-Carlo MSE, bias^2 and variance of each estimator averaged over seeds.
    See `mc_per_seed` for the parameters.
    """
    per_seed = mc_per_seed(estimators, world, n, reps, seeds, protocol, workers, progress)
    return summarize(per_seed)
