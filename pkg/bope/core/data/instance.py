"""
Module containing the joined 2n-point evaluation instance.

Points 0..n-1 carry the logged prices and points n..2n-1 the target prices of
the same customers. Kernel inputs are the concatenation of features and price,
standardized per column over all 2n points.
"""

import logging
from dataclasses import dataclass

import numpy as np

from bope.core.data.dataset import PricingDataset, _frozen_array
from bope.core.data.policy import TargetPolicySpec
from bope.core.errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EvaluationInstance:
    """
    Logged data joined with target prices.

    :param points: Raw 2n x (d+1) kernel inputs, rows (x_i, p_i).
    :param demands: The n logged binary demands.
    :param z: Standardized points used by the kernel.
    :param center: Column means used for standardization.
    :param scale: Column standard deviations (1 where a column is constant).
    :param truncations: Number of resampled negative prices (synthetic draws).
    """

    points: np.ndarray
    demands: np.ndarray
    z: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    truncations: int = 0

    @property
    def n(self) -> int:
        return self.demands.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1] - 1

    @property
    def price_vector(self) -> np.ndarray:
        return self.points[:, -1]

    @property
    def logged_prices(self) -> np.ndarray:
        return self.points[: self.n, -1]

    @property
    def target_prices(self) -> np.ndarray:
        return self.points[self.n :, -1]

    @property
    def features(self) -> np.ndarray:
        return self.points[: self.n, :-1]

    def with_demands(self, demands: np.ndarray) -> "EvaluationInstance":
        """Same design with another demand realization."""
        demands = np.asarray(demands)
        if demands.shape != (self.n,) or not np.all(np.isin(demands, (0, 1))):
            raise DataError(f"Demands must be {self.n} values in {{0,1}}")
        return EvaluationInstance(
            points=self.points,
            demands=_frozen_array(demands, dtype=np.int64),
            z=self.z,
            center=self.center,
            scale=self.scale,
            truncations=self.truncations,
        )


def build_instance(
    features: np.ndarray,
    logged_prices: np.ndarray,
    target_prices: np.ndarray,
    demands: np.ndarray,
    truncations: int = 0,
) -> EvaluationInstance:
    """
    Join logged and target prices into an evaluation instance.

    :param features: Raw n x d features.
    :param logged_prices: Logged prices (n).
    :param target_prices: Target prices (n).
    :param demands: Logged demands (n).
    :param truncations: Resampled-price count to record.
    :return: The evaluation instance.
    """
    ds = PricingDataset(features=features, logged_prices=logged_prices, demands=demands)
    target_prices = np.asarray(target_prices, dtype=float).reshape(-1)
    if target_prices.shape[0] != ds.n:
        raise DataError(f"Got {target_prices.shape[0]} target prices for {ds.n} rows")
    bad = ~(np.isfinite(target_prices) & (target_prices > 0))
    if np.any(bad):
        row = int(np.argmax(bad))
        raise DataError(f"Row {row}: target price {target_prices[row]} is not strictly positive")

    logged = np.column_stack([ds.features, ds.logged_prices])
    target = np.column_stack([ds.features, target_prices])
    points = np.vstack([logged, target])
    center = points.mean(axis=0)
    scale = points.std(axis=0)
    scale[scale == 0] = 1.0
    z = (points - center) / scale

    return EvaluationInstance(
        points=_frozen_array(points),
        demands=ds.demands,
        z=_frozen_array(z),
        center=_frozen_array(center),
        scale=_frozen_array(scale),
        truncations=int(truncations),
    )


def apply_target_policy(ds: PricingDataset, spec: TargetPolicySpec) -> EvaluationInstance:
    """
    Build the evaluation instance of a dataset under a target policy.

    :param ds: Logged dataset.
    :param spec: Target policy.
    :return: Evaluation instance with the target prices in the second half.
    """
    target_prices = spec.target_prices(ds.features, ds.logged_prices)
    logger.debug("Applied %s target policy to %s rows", spec.kind, ds.n)
    return build_instance(ds.features, ds.logged_prices, target_prices, ds.demands)
