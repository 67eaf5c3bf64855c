"""
Module containing the fitting steps shared by the CLI modes: reference
revenue, hyperparameters, revenue balls and the weights of every method.

Methods:
    LASSO      zero weights on the LASSO reference (the direct estimate)
    BOPE       closed form weights with Gaussian-evidence hyperparameters
    BOPE-B     worst-case MSE weights with Bernoulli-evidence hyperparameters
    BOPE-Bern  worst-case Bernstein weights, same hyperparameters as BOPE-B
"""

import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from bope.core.baselines import (
    BopeConfig,
    LassoModel,
    bope_weights,
    fit_lasso,
    ip_weights,
    reference_revenue,
)
from bope.core.config import RunConfig
from bope.core.data import EvaluationInstance, LinearGaussianPolicy, PricingDataset, apply_target_policy, load_csv
from bope.core.estimator import RevenueBall, Weights
from bope.core.hyperfit import HyperParams, fit_hyperparams
from bope.core.kernel import GramFactorization, KernelConfig, gram_matrix
from bope.core.synth import SyntheticWorld, draw_instance, make_overlap_setting, make_setting_a, make_setting_b
from bope.core.utils import derive_seed
from bope.core.wcopt import WorstCaseResult, solve_weights

logger = logging.getLogger(__name__)

LASSO = "LASSO"
BOPE = "BOPE"
BOPE_B = "BOPE-B"
BOPE_BERN = "BOPE-Bern"


@dataclass(frozen=True, eq=False)
class Reference:
    """Fitted reference revenue and the balls built around it."""

    inst: EvaluationInstance
    lasso: LassoModel
    r_hat: np.ndarray
    gaussian: HyperParams
    bernoulli: HyperParams
    gf_gaussian: GramFactorization
    gf_bernoulli: GramFactorization
    ball_gaussian: RevenueBall
    ball_bernoulli: RevenueBall
    fitted: bool

    def hyper_report(self) -> Dict[str, dict]:
        return {
            "gaussian": {**self.gaussian.to_dict(), "jitter": self.gf_gaussian.jitter, "fitted": self.fitted},
            "bernoulli": {**self.bernoulli.to_dict(), "jitter": self.gf_bernoulli.jitter, "fitted": self.fitted},
            "lasso_penalty": self.lasso.l1_penalty,
        }


@dataclass(frozen=True, eq=False)
class MethodFit:
    """Weights of one method with the ball they are judged in."""

    name: str
    weights: Weights
    r_hat: np.ndarray
    wc: Optional[WorstCaseResult] = None
    diagnostics: dict = field(default_factory=dict)


def make_world(config: RunConfig, seed: int) -> SyntheticWorld:
    data = config.data
    if data.setting == "a":
        return make_setting_a(data.b, seed, data.noise_sd)
    if data.setting == "b":
        return make_setting_b(data.b, seed, data.noise_sd)
    if data.setting == "overlap":
        return make_overlap_setting(data.overlap_shift, seed, data.noise_sd)
    raise NotImplementedError(f"Synthetic setting {data.setting} not implemented")


def load_instance(config: RunConfig) -> EvaluationInstance:
    """Logged CSV data joined with the configured target policy."""
    assert config.data.csv_path is not None
    ds = load_csv(config.data.csv_path, config.data.schema)
    logger.info(">> Loaded %s logged rows from %s", ds.n, config.data.csv_path)
    return apply_target_policy(ds, config.policy)


def logged_dataset(inst: EvaluationInstance) -> PricingDataset:
    return PricingDataset(inst.features, inst.logged_prices, inst.demands)


def _explicit_hyper(config: RunConfig, inst: EvaluationInstance, variant: str) -> HyperParams:
    lengthscale_sq = config.hyper.lengthscale_sq or (1.0,) * (inst.d + 1)
    if len(lengthscale_sq) != inst.d + 1:
        raise ValueError(f"hyper.lengthscale_sq needs {inst.d + 1} values, got {len(lengthscale_sq)}")
    sigma_sq = config.hyper.sigma_sq if variant == "gaussian" else None
    return HyperParams(np.array(lengthscale_sq), config.hyper.gamma_hat_sq, sigma_sq)


def fit_reference(config: RunConfig, inst: EvaluationInstance, seed: int) -> Reference:
    """
    Fit the LASSO reference revenue and the hyperparameters of both evidences.

    :param config: Run configuration.
    :param inst: Evaluation instance.
    :param seed: Seed of the cross validation folds.
    :return: Reference revenue with both balls.
    """
    ds = logged_dataset(inst)
    lasso = fit_lasso(
        ds,
        l1_penalty=config.hyper.lasso_penalty,
        folds=config.hyper.lasso_folds,
        seed=seed,
        solver=config.hyper.lasso_solver,
    )
    r_hat = reference_revenue(lasso, inst)
    n = inst.n

    fitted = config.hyper.source == "fit"
    if fitted:
        points = inst.z[:n]
        gaussian = fit_hyperparams("gaussian", ds, r_hat[:n], points=points, budget=config.hyper.budget)
        bernoulli = fit_hyperparams("bernoulli", ds, r_hat[:n], points=points, budget=config.hyper.budget)
    else:
        gaussian = _explicit_hyper(config, inst, "gaussian")
        bernoulli = _explicit_hyper(config, inst, "bernoulli")

    gf_gaussian = gram_matrix(inst, KernelConfig(gaussian.lengthscale_sq, config.jitter, config.jitter_cap))
    gf_bernoulli = gram_matrix(inst, KernelConfig(bernoulli.lengthscale_sq, config.jitter, config.jitter_cap))
    return Reference(
        inst=inst,
        lasso=lasso,
        r_hat=r_hat,
        gaussian=gaussian,
        bernoulli=bernoulli,
        gf_gaussian=gf_gaussian,
        gf_bernoulli=gf_bernoulli,
        ball_gaussian=RevenueBall(r_hat, gaussian.gamma_hat, inst.price_vector),
        ball_bernoulli=RevenueBall(r_hat, bernoulli.gamma_hat, inst.price_vector),
        fitted=fitted,
    )


def fit_method(
    name: str,
    config: RunConfig,
    ref: Reference,
    starts: Sequence[np.ndarray] = (),
) -> MethodFit:
    """
    Weights of one method.

    :param name: LASSO, BOPE, BOPE-B or BOPE-Bern.
    :param config: Run configuration.
    :param ref: Fitted reference.
    :param starts: Extra outer starts for the minimax methods.
    """
    inst = ref.inst
    if name == LASSO:
        return MethodFit(name, Weights(np.zeros(inst.n)), ref.r_hat)
    if name == BOPE:
        sigma_sq = ref.gaussian.sigma_sq if ref.gaussian.sigma_sq is not None else config.hyper.sigma_sq
        w = bope_weights(inst, ref.gf_gaussian, ref.gaussian.gamma_hat, BopeConfig(sigma_sq))
        return MethodFit(name, w, ref.r_hat)
    if name in (BOPE_B, BOPE_BERN):
        kind = "mse" if name == BOPE_B else "bern"
        # BOPE weights judged in the same ball are a free candidate start
        sigma_sq = ref.gaussian.sigma_sq if ref.gaussian.sigma_sq is not None else config.hyper.sigma_sq
        bope_start = bope_weights(inst, ref.gf_bernoulli, ref.bernoulli.gamma_hat, BopeConfig(sigma_sq)).w
        w, wc = solve_weights(
            kind,
            inst,
            ref.ball_bernoulli,
            ref.gf_bernoulli,
            config.solver,
            bound=config.bound,
            starts=[bope_start, *starts],
        )
        return MethodFit(name, w, ref.r_hat, wc, {"inner_converged": wc.converged, "iterations": wc.iterations})
    raise NotImplementedError(f"Method {name} not implemented")


def ip_start(world: SyntheticWorld, inst: EvaluationInstance) -> np.ndarray:
    """Inverse propensity weights of a synthetic world (outer start)."""
    return ip_weights(inst, world.logging_density, world.target_density).w


def is_gaussian_world(world: SyntheticWorld) -> bool:
    policies: Tuple[LinearGaussianPolicy, ...] = (world.logging_policy, world.target_policy)
    return all(p.noise_sd > 0 for p in policies)


def output_path(config: RunConfig, fmt: str) -> Path:
    return config.output.directory / f"{config.mode}.{fmt}"


def world_seeds(root: int, count: int) -> List[int]:
    """Seeds of the synthetic instances of a run, split from the root seed."""
    return [int(derive_seed(root, "world", k).generate_state(1)[0]) for k in range(count)]


def draw_synthetic(config: RunConfig, seed: int, n: Optional[int] = None):
    """Draw a synthetic instance of the configured world."""
    world = make_world(config, seed)
    inst, true_r = draw_instance(world, config.data.n if n is None else n)
    return world, inst, true_r


class ReferenceCache:
    """
    Fit the reference of an instance once even when several methods need it.
    Keyed by instance identity; cached instances are kept alive so ids stay unique.

    The hyperparameter report of the first fit on every point set is kept in
    `fitted` (realizations of one draw share their points).
    """

    def __init__(self, config: RunConfig, capacity: int = 64):
        self.config = config
        self.capacity = capacity
        self.fitted: Dict[bytes, dict] = {}
        self._cache: Dict[int, Tuple[EvaluationInstance, Reference]] = {}
        self._lock = threading.Lock()

    def __call__(self, inst: EvaluationInstance) -> Reference:
        key = id(inst)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None and hit[0] is inst:
            return hit[1]
        ref = fit_reference(self.config, inst, self.config.run.seed)
        with self._lock:
            if len(self._cache) >= self.capacity:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = (inst, ref)
            self.fitted.setdefault(inst.z.tobytes(), ref.hyper_report())
        return ref

    def hyper_report(self, inst: EvaluationInstance) -> Optional[dict]:
        """Hyperparameters first fitted on the points of `inst`, if any."""
        return self.fitted.get(inst.z.tobytes())

    def clear(self):
        self._cache.clear()
        self.fitted.clear()
