"""
Module containing synthetic pricing worlds with known demand.

Features are uniform on [-1, 1]^2, the logging policy prices at
x^T [1/2, -1/2] + 7 plus Gaussian noise and the target policy at
x^T [1/2, -1/2] + b plus noise of the same size. Demand is
1/4 + 3/4 expit(5 - p/2 - s(x)) with s(x) = -x1 + x2 (setting a) or
arctan2(x1, x2) (setting b).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.special import expit

from bope.core.data import EvaluationInstance, LinearGaussianPolicy, build_instance
from bope.core.errors import DataError
from bope.core.utils import derive_rng

logger = logging.getLogger(__name__)

DemandFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

LOGGING_INTERCEPT = 7.0
POLICY_COEF = (0.5, -0.5)
MAX_RESAMPLING_ROUNDS = 1000
CHECK_POINTS = 2000
# prices at or below this are resampled
PRICE_FLOOR = 0.0


def setting_a_demand(features: np.ndarray, prices: np.ndarray) -> np.ndarray:
    features = np.atleast_2d(features)
    return 0.25 + 0.75 * expit(5 - 0.5 * np.asarray(prices) - (-features[:, 0] + features[:, 1]))


def setting_b_demand(features: np.ndarray, prices: np.ndarray) -> np.ndarray:
    features = np.atleast_2d(features)
    return 0.25 + 0.75 * expit(5 - 0.5 * np.asarray(prices) - np.arctan2(features[:, 0], features[:, 1]))


@dataclass(frozen=True)
class SyntheticWorld:
    """
    A ground-truth world: feature sampler, both price policies and the demand.

    :param demand_fn: (features, prices) -> purchase probabilities.
    :param logging_policy: Price policy that generated the logged data.
    :param target_policy: Price policy to evaluate.
    :param seed: Root seed of the instance draws.
    :param feature_dim: Number of features (uniform on [-1, 1]).
    :param name: Short label used in reports.
    """

    demand_fn: DemandFn
    logging_policy: LinearGaussianPolicy
    target_policy: LinearGaussianPolicy
    seed: int = 0
    feature_dim: int = 2
    name: str = "custom"

    def sample_features(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(n, self.feature_dim))

    def demand(self, features: np.ndarray, prices: np.ndarray) -> np.ndarray:
        return np.asarray(self.demand_fn(features, prices), dtype=float)

    def logging_density(self, prices: np.ndarray, features: np.ndarray) -> np.ndarray:
        """Density of the logged prices, truncated like `sample_truncated_prices`."""
        return self.logging_policy.density(prices, features, lower=PRICE_FLOOR)

    def target_density(self, prices: np.ndarray, features: np.ndarray) -> np.ndarray:
        return self.target_policy.density(prices, features, lower=PRICE_FLOOR)


def make_world(
    demand_fn: DemandFn,
    logging_policy: LinearGaussianPolicy,
    target_policy: LinearGaussianPolicy,
    seed: int = 0,
    feature_dim: int = 2,
    name: str = "custom",
) -> SyntheticWorld:
    """
    Build a world around any demand oracle, evaluating it on random inputs to
    make sure it returns probabilities.
    """
    world = SyntheticWorld(demand_fn, logging_policy, target_policy, seed, feature_dim, name)
    rng = derive_rng(0, "demand-check")
    features = world.sample_features(CHECK_POINTS, rng)
    top = 2 * max(abs(logging_policy.intercept), abs(target_policy.intercept)) + 10
    prices = rng.uniform(0.0, top, size=CHECK_POINTS)
    values = world.demand(features, prices)
    if values.shape != (CHECK_POINTS,):
        raise DataError(f"Demand function returned shape {values.shape} for {CHECK_POINTS} inputs")
    if not np.all((values >= 0) & (values <= 1)):
        k = int(np.argmax(~((values >= 0) & (values <= 1))))
        raise DataError(f"Demand function returned {values[k]} at features {features[k]}, price {prices[k]:.4g}")
    return world


def _policies(b: float, noise_sd: float) -> Tuple[LinearGaussianPolicy, LinearGaussianPolicy]:
    logging_policy = LinearGaussianPolicy(POLICY_COEF, LOGGING_INTERCEPT, noise_sd)
    target_policy = LinearGaussianPolicy(POLICY_COEF, b, noise_sd)
    return logging_policy, target_policy


def make_setting_a(b: float, seed: int = 0, noise_sd: float = 2.0) -> SyntheticWorld:
    logging_policy, target_policy = _policies(b, noise_sd)
    return make_world(setting_a_demand, logging_policy, target_policy, seed, name=f"a(b={b:g})")


def make_setting_b(b: float, seed: int = 0, noise_sd: float = 2.0) -> SyntheticWorld:
    logging_policy, target_policy = _policies(b, noise_sd)
    return make_world(setting_b_demand, logging_policy, target_policy, seed, name=f"b(b={b:g})")


def make_overlap_setting(shift: float = 0.5, seed: int = 0, noise_sd: float = 2.0) -> SyntheticWorld:
    """Setting (a) demand with the target policy equal to the logging policy shifted by `shift`."""
    logging_policy, target_policy = _policies(LOGGING_INTERCEPT + shift, noise_sd)
    return make_world(setting_a_demand, logging_policy, target_policy, seed, name=f"overlap(shift={shift:g})")


def sample_truncated_prices(
    policy: LinearGaussianPolicy,
    features: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, int]:
    """
    Sample prices and resample the non-positive ones.

    :return: Prices and the number of resampled draws.
    """
    prices = policy.sample(features, rng)
    truncations = 0
    for _ in range(MAX_RESAMPLING_ROUNDS):
        bad = prices <= PRICE_FLOOR
        if not np.any(bad):
            return prices, truncations
        truncations += int(np.sum(bad))
        prices[bad] = policy.sample(features[bad], rng)
    raise DataError("Price policy keeps producing non-positive prices; check its intercept")


def draw_instance(world: SyntheticWorld, n: int) -> Tuple[EvaluationInstance, np.ndarray]:
    """
    Draw features, logged and target prices and one demand realization.

    :param world: Synthetic world (its seed fixes the draw).
    :param n: Number of customers.
    :return: The instance and the true revenue vector p_i d(x_i, p_i) over all 2n points.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = derive_rng(world.seed, "instance", n)
    features = world.sample_features(n, rng)
    logged, logged_truncations = sample_truncated_prices(world.logging_policy, features, rng)
    target, target_truncations = sample_truncated_prices(world.target_policy, features, rng)
    demand_logged = world.demand(features, logged)
    demands = (rng.random(n) < demand_logged).astype(np.int64)
    truncations = logged_truncations + target_truncations
    if truncations:
        logger.debug("Resampled %s non-positive prices", truncations)

    inst = build_instance(features, logged, target, demands, truncations=truncations)
    true_r = inst.price_vector * np.concatenate([demand_logged, world.demand(features, target)])
    return inst, true_r


def true_target_revenue(true_r: np.ndarray) -> float:
    """Mean true revenue of the target half."""
    true_r = np.asarray(true_r, dtype=float)
    return float(np.mean(true_r[true_r.shape[0] // 2 :]))


def simulate_demands(inst: EvaluationInstance, true_r: np.ndarray, rng: np.random.Generator, reps: int) -> np.ndarray:
    """
    Fresh logged demand vectors from the true purchase probabilities.

    :return: reps x n array of {0,1}.
    """
    probabilities = np.asarray(true_r, dtype=float)[: inst.n] / inst.logged_prices
    return (rng.random((reps, inst.n)) < probabilities).astype(np.int64)
