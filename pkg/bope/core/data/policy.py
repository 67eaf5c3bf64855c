"""
Module containing pricing policies: the linear-Gaussian price sampler and the
target-policy specifications that turn logged prices into target prices.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.stats import norm

from bope.core.errors import DataError
from bope.core.utils import derive_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearGaussianPolicy:
    """
    Price policy P = x^T coef + intercept + noise, noise ~ N(0, noise_sd^2).
    """

    coef: Tuple[float, ...]
    intercept: float
    noise_sd: float

    def __post_init__(self):
        object.__setattr__(self, "coef", tuple(float(c) for c in np.ravel(self.coef)))
        if not self.noise_sd >= 0:
            raise DataError(f"Policy noise standard deviation must be non-negative, got {self.noise_sd}")

    def mean(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if features.shape[1] != len(self.coef):
            raise DataError(f"Policy expects {len(self.coef)} features, got {features.shape[1]}")
        return features @ np.asarray(self.coef) + self.intercept

    def sample(self, features: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw one price per feature row (untruncated)."""
        mean = self.mean(features)
        return mean + self.noise_sd * rng.standard_normal(mean.shape[0])

    def density(self, prices: np.ndarray, features: np.ndarray, lower: Optional[float] = None) -> np.ndarray:
        """
        Gaussian price density g(p, x) at each (price, feature row).

        :param lower: Truncation bound of the sampler. Prices at or below it
            get density 0 and the rest are normalized by the mass above it.
        """
        if self.noise_sd == 0:
            raise DataError("A deterministic policy has no price density")
        prices = np.asarray(prices, dtype=float)
        mean = self.mean(features)
        pdf = norm.pdf(prices, loc=mean, scale=self.noise_sd)
        if lower is None:
            return pdf
        mass = norm.sf(lower, loc=mean, scale=self.noise_sd)
        if np.any(mass <= 0):
            row = int(np.argmax(mass <= 0))
            raise DataError(f"Row {row}: no price mass above the truncation bound {lower}")
        return np.where(prices > lower, pdf / mass, 0.0)


@dataclass(frozen=True)
class TargetPolicySpec:
    """
    Specification of the target policy applied to a logged dataset.
    Use the class method constructors instead of building this directly.
    """

    kind: str
    factor: float = 1.0
    shift: float = 0.0
    prices: Optional[Tuple[float, ...]] = None
    policy: Optional[LinearGaussianPolicy] = None
    seed: int = 0

    @classmethod
    def multiplicative(cls, factor: float) -> "TargetPolicySpec":
        if not factor > 0:
            raise DataError(f"Multiplicative factor must be positive, got {factor}")
        return cls(kind="multiplicative", factor=float(factor))

    @classmethod
    def additive(cls, shift: float) -> "TargetPolicySpec":
        return cls(kind="additive", shift=float(shift))

    @classmethod
    def explicit(cls, prices) -> "TargetPolicySpec":
        prices = tuple(float(p) for p in np.ravel(prices))
        bad = [i for i, p in enumerate(prices) if not (np.isfinite(p) and p > 0)]
        if bad:
            raise DataError(f"Explicit target price at index {bad[0]} is not strictly positive")
        return cls(kind="explicit", prices=prices)

    @classmethod
    def linear_gaussian(cls, coef, intercept: float, noise_sd: float, seed: int) -> "TargetPolicySpec":
        return cls(kind="linear_gaussian", policy=LinearGaussianPolicy(coef, intercept, noise_sd), seed=int(seed))

    def target_prices(self, features: np.ndarray, logged_prices: np.ndarray) -> np.ndarray:
        """
        Compute the target price of each customer.

        :param features: Raw n x d features.
        :param logged_prices: Logged prices.
        :return: Target prices (not yet validated for positivity).
        """
        if self.kind == "multiplicative":
            return logged_prices * self.factor
        if self.kind == "additive":
            return logged_prices + self.shift
        if self.kind == "explicit":
            if self.prices is None or len(self.prices) != len(logged_prices):
                got = 0 if self.prices is None else len(self.prices)
                raise DataError(f"Explicit target prices have length {got}, dataset has {len(logged_prices)} rows")
            return np.asarray(self.prices, dtype=float)
        if self.kind == "linear_gaussian":
            assert self.policy is not None
            rng = derive_rng(self.seed, "target-policy")
            return self.policy.sample(features, rng)
        raise NotImplementedError(f"Target policy {self.kind} not implemented")
