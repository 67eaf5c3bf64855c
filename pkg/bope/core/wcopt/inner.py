"""
Module containing the inner worst-case problems max_r phi(w, r) over the
RKHS ball intersected with the price box, for phi = MSE and phi = Bern.

The MSE objective is indefinite in r (convex squared bias plus concave
variance). It is solved by sweeping the bias level over its feasible range:
on each slice {b(w)^T (r - r_hat) = beta} the remaining problem is a concave
variance maximization. The best slice is refined by one local ascent of the
full objective.
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from bope.core.data import EvaluationInstance
from bope.core.estimator import (
    BoundConfig,
    RevenueBall,
    Weights,
    WeightsLike,
    as_weights,
    bernstein_penalty,
    bias,
    max_term,
    mse,
    variance,
)
from bope.core.kernel import GramFactorization
from bope.core.wcopt.projection import FeasibleSet

logger = logging.getLogger(__name__)

OBJECTIVE_KINDS = ("mse", "bern")


@dataclass(frozen=True)
class SolverConfig:
    """
    :param outer_max_iters: Maximum outer descent iterations.
    :param inner_max_iters: Maximum iterations of each inner ascent.
    :param outer_tol: Stop the outer loop when the objective decrease is below this.
    :param inner_tol: Relative tolerance of inner ascents and slice comparisons.
    :param bias_slices: Number of bias levels swept by the MSE inner solver.
    :param multistarts: Starts per bias slice.
    :param smoothing_p: Exponent of the p-norm smoothing the Bernstein max term.
    :param seed: Seed for multistart perturbations.
    :param projection_sweeps: Dykstra sweep limit.
    :param projection_tol: Dykstra tolerance.
    """

    outer_max_iters: int = 300
    inner_max_iters: int = 2000
    outer_tol: float = 1e-6
    inner_tol: float = 1e-7
    bias_slices: int = 41
    multistarts: int = 5
    smoothing_p: int = 16
    seed: int = 0
    projection_sweeps: int = 200
    projection_tol: float = 1e-9

    def __post_init__(self):
        for name in ("outer_max_iters", "inner_max_iters", "projection_sweeps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("outer_tol", "inner_tol", "projection_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.bias_slices < 3:
            raise ValueError(f"bias_slices must be at least 3, got {self.bias_slices}")
        if self.multistarts < 1:
            raise ValueError(f"multistarts must be at least 1, got {self.multistarts}")
        if self.smoothing_p < 8 or self.smoothing_p % 2:
            raise ValueError(f"smoothing_p must be an even integer >= 8, got {self.smoothing_p}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True, eq=False)
class WorstCaseResult:
    """
    :param r_wc: Worst-case revenue vector (feasible).
    :param objective: phi(w, r_wc), with the exact max term for Bern.
    :param active_jitter: Jitter of the Gram factorization in use.
    :param iterations: Total ascent iterations spent.
    :param converged: Whether the ascents that produced r_wc converged.
    :param bias_level: b(w)^T (r_wc - r_hat).
    :param variance: Var(w, r_wc).
    """

    r_wc: np.ndarray
    objective: float
    active_jitter: float
    iterations: int
    converged: bool
    bias_level: float
    variance: float


class _Ascent(NamedTuple):
    r: np.ndarray
    value: float
    iterations: int
    converged: bool


class _RevenueObjective:
    """
    Objectives over r for fixed weights. `kind` is one of mse, bern,
    variance, bias and neg_bias.
    """

    def __init__(
        self,
        w: Weights,
        inst: EvaluationInstance,
        ball: RevenueBall,
        bound: Optional[BoundConfig] = None,
    ):
        self.a = w.bias_coefficients()
        self.q = w.variance_diagonal()
        self.p = inst.price_vector
        self.r_hat = ball.r_hat
        self.bern_scale = 0.0
        self.constant = 0.0
        if bound is not None:
            self.bern_scale = float(np.sqrt(2.0 * bound.log_inv_eps))
            self.constant = max_term(w, inst, bound)
        # Variance floor for the square root gradient
        self.var_floor = 1e-14 * float(np.sum(self.q * self.p**2)) + 1e-300

    def beta(self, r: np.ndarray) -> float:
        return float(self.a @ (r - self.r_hat))

    def var(self, r: np.ndarray) -> float:
        return float(np.sum(self.q * r * (self.p - r)))

    def value(self, kind: str, r: np.ndarray) -> float:
        if kind == "mse":
            return self.beta(r) ** 2 + self.var(r)
        if kind == "bern":
            return self.beta(r) + self.bern_scale * float(np.sqrt(max(self.var(r), 0.0))) + self.constant
        if kind == "variance":
            return self.var(r)
        if kind == "bias":
            return self.beta(r)
        if kind == "neg_bias":
            return -self.beta(r)
        raise NotImplementedError(f"Objective {kind} not implemented")

    def grad(self, kind: str, r: np.ndarray) -> np.ndarray:
        var_grad = self.q * (self.p - 2 * r)
        if kind == "mse":
            return 2 * self.beta(r) * self.a + var_grad
        if kind == "bern":
            root = np.sqrt(max(self.var(r), self.var_floor))
            return self.a + self.bern_scale * var_grad / (2 * root)
        if kind == "variance":
            return var_grad
        if kind == "bias":
            return self.a.copy()
        if kind == "neg_bias":
            return -self.a
        raise NotImplementedError(f"Objective {kind} not implemented")


def _ascend(
    objective: _RevenueObjective,
    kind: str,
    start: np.ndarray,
    feasible: FeasibleSet,
    max_iters: int,
    tol: float,
    step: float,
    plane: Optional[Tuple[np.ndarray, float]] = None,
) -> _Ascent:
    """
    Projected gradient ascent with a backtracking sufficient-increase test
    f(r+) >= f(r) + g^T d - |d|^2 / 2t, doubling the step after each success.
    """
    r = feasible.project(start, plane)
    f = objective.value(kind, r)
    t = step
    for k in range(1, max_iters + 1):
        g = objective.grad(kind, r)
        if not np.any(g):
            return _Ascent(r, f, k, True)
        while True:
            candidate = feasible.project(r + t * g, plane)
            d = candidate - r
            f_candidate = objective.value(kind, candidate)
            if f_candidate >= f + g @ d - (d @ d) / (2 * t) - 1e-14 * (1 + abs(f)):
                break
            t *= 0.5
            if t * np.sqrt(g @ g) < 1e-14 * (1 + np.sqrt(r @ r)):
                return _Ascent(r, f, k, True)
        gain = f_candidate - f
        if gain <= 0:
            return _Ascent(r, f, k, True)
        r, f = candidate, f_candidate
        if gain <= tol * (1 + abs(f)):
            return _Ascent(r, f, k, True)
        t *= 2
    return _Ascent(r, f, max_iters, False)


def _initial_step(feasible: FeasibleSet, direction: np.ndarray) -> float:
    """Step that moves roughly across the feasible set along direction."""
    norm = float(np.sqrt(direction @ direction))
    if norm == 0:
        return 1.0
    evals, _ = feasible.gf.spectrum
    extent = max(feasible.ball.gamma_hat * float(np.sqrt(np.max(evals))), float(np.max(feasible.upper)))
    return extent / norm


def _degenerate(w: Weights, inst, ball, gf, kind, bound) -> WorstCaseResult:
    r = ball.r_hat.copy()
    value = mse(w, r, inst, ball) if kind == "mse" else bernstein_penalty(w, r, inst, ball, bound)
    return WorstCaseResult(
        r_wc=r,
        objective=value,
        active_jitter=gf.jitter,
        iterations=0,
        converged=True,
        bias_level=0.0,
        variance=variance(w, r, inst),
    )


def _result(w, r, value, inst, ball, gf, iterations, converged) -> WorstCaseResult:
    return WorstCaseResult(
        r_wc=r,
        objective=value,
        active_jitter=gf.jitter,
        iterations=iterations,
        converged=converged,
        bias_level=bias(w, r, ball),
        variance=variance(w, r, inst),
    )


class _Best:
    """Best candidate so far; near ties prefer the smaller absolute bias."""

    def __init__(self, tol: float):
        self.tol = tol
        self.r: Optional[np.ndarray] = None
        self.value = -np.inf
        self.abs_beta = np.inf
        self.converged = False

    def offer(self, r: np.ndarray, value: float, abs_beta: float, converged: bool) -> bool:
        margin = self.tol * (1 + abs(value))
        better = value > self.value + margin or (abs(value - self.value) <= margin and abs_beta < self.abs_beta)
        if self.r is None or better:
            self.r, self.value, self.abs_beta, self.converged = r, value, abs_beta, converged
            return True
        return False


def wc_mse_inner(
    w: WeightsLike,
    inst: EvaluationInstance,
    ball: RevenueBall,
    gf: GramFactorization,
    cfg: SolverConfig,
    warm_start: Optional[np.ndarray] = None,
) -> WorstCaseResult:
    """
    Worst-case MSE over the feasible revenue set.

    :param w: Weights.
    :param inst: Evaluation instance.
    :param ball: Revenue ball.
    :param gf: Gram factorization over the 2n points.
    :param cfg: Solver configuration.
    :param warm_start: Extra start for the final local ascent (eg. previous r_wc).
    :return: Worst-case revenue and objective.
    """
    w = as_weights(w)
    if ball.gamma_hat == 0:
        return _degenerate(w, inst, ball, gf, "mse", None)

    feasible = FeasibleSet(ball, gf, cfg.projection_sweeps, cfg.projection_tol)
    objective = _RevenueObjective(w, inst, ball)
    a = objective.a
    iterations = 0
    linear_step = _initial_step(feasible, a)

    # 01. Range of the bias level over the feasible set
    high = _ascend(objective, "bias", ball.r_hat, feasible, cfg.inner_max_iters, cfg.inner_tol, linear_step)
    low = _ascend(objective, "neg_bias", ball.r_hat, feasible, cfg.inner_max_iters, cfg.inner_tol, linear_step)
    iterations += high.iterations + low.iterations
    r_high, r_low = feasible.repair(high.r), feasible.repair(low.r)
    beta_high, beta_low = objective.beta(r_high), objective.beta(r_low)
    logger.debug("Bias range [%.6g, %.6g] in %s iterations", beta_low, beta_high, iterations)

    best = _Best(cfg.inner_tol)
    best.offer(ball.r_hat.copy(), objective.value("mse", ball.r_hat), 0.0, True)
    for r in (r_high, r_low):
        best.offer(r, objective.value("mse", r), abs(objective.beta(r)), True)

    # 02. Concave variance maximization on each bias slice
    var_curvature = 2 * float(np.max(objective.q))
    var_step = 1.0 / var_curvature if var_curvature > 0 else 1.0
    span = beta_high - beta_low
    slices = np.linspace(0.0, 1.0, cfg.bias_slices) if span > 1e-12 * (1 + abs(beta_high)) else np.array([1.0])
    for k, theta in enumerate(slices):
        # Convex combination of feasible points, so feasible and on the slice
        base = r_low + theta * (r_high - r_low)
        if var_curvature == 0:
            best.offer(base, objective.value("mse", base), abs(objective.beta(base)), True)
            continue
        plane = (a, float(a @ base))
        for s in range(cfg.multistarts):
            rng = np.random.default_rng([cfg.seed, k, s])
            start = base if s == 0 else 0.5 * (base + rng.uniform(0.0, ball.price_box))
            ascent = _ascend(
                objective, "variance", start, feasible, cfg.inner_max_iters, cfg.inner_tol, var_step, plane
            )
            iterations += ascent.iterations
            r = feasible.repair(ascent.r)
            best.offer(r, objective.value("mse", r), abs(objective.beta(r)), ascent.converged)

    # 03. Local ascent of the full objective from the winner and the warm start
    mse_step = 1.0 / (2 * (float(a @ a) + float(np.max(objective.q))))
    starts: List[np.ndarray] = [best.r]
    if warm_start is not None:
        starts.append(np.asarray(warm_start, dtype=float))
    refine_converged = True
    for start in starts:
        ascent = _ascend(objective, "mse", start, feasible, cfg.inner_max_iters, cfg.inner_tol, mse_step)
        iterations += ascent.iterations
        r = feasible.repair(ascent.r)
        if best.offer(r, objective.value("mse", r), abs(objective.beta(r)), ascent.converged):
            refine_converged = ascent.converged

    converged = best.converged and refine_converged
    if not converged:
        logger.warning("Worst-case MSE ascent did not converge in %s iterations", iterations)
    return _result(w, best.r, mse(w, best.r, inst, ball), inst, ball, gf, iterations, converged)


def wc_bern_inner(
    w: WeightsLike,
    inst: EvaluationInstance,
    ball: RevenueBall,
    gf: GramFactorization,
    cfg: SolverConfig,
    bound: BoundConfig,
    warm_start: Optional[np.ndarray] = None,
) -> WorstCaseResult:
    """
    Worst-case Bernstein penalty over the feasible revenue set.

    The objective b^T (r - r_hat) + sqrt(2 log(1/eps) Var(w, r)) is concave in r,
    so projected gradient ascent from the center (and the warm start) suffices.
    The constant max term is added so that objective = Bern(w, r_wc).
    """
    w = as_weights(w)
    if ball.gamma_hat == 0:
        return _degenerate(w, inst, ball, gf, "bern", bound)

    feasible = FeasibleSet(ball, gf, cfg.projection_sweeps, cfg.projection_tol)
    objective = _RevenueObjective(w, inst, ball, bound)

    starts: List[np.ndarray] = [ball.r_hat]
    if warm_start is not None:
        starts.append(np.asarray(warm_start, dtype=float))

    best = _Best(cfg.inner_tol)
    iterations = 0
    for start in starts:
        step = _initial_step(feasible, objective.grad("bern", start))
        ascent = _ascend(objective, "bern", start, feasible, cfg.inner_max_iters, cfg.inner_tol, step)
        iterations += ascent.iterations
        r = feasible.repair(ascent.r)
        best.offer(r, objective.value("bern", r), abs(objective.beta(r)), ascent.converged)

    if not best.converged:
        logger.warning("Worst-case Bernstein ascent did not converge in %s iterations", iterations)
    value = bernstein_penalty(w, best.r, inst, ball, bound)
    return _result(w, best.r, value, inst, ball, gf, iterations, best.converged)


def solve_inner(
    objective_kind: str,
    w: WeightsLike,
    inst: EvaluationInstance,
    ball: RevenueBall,
    gf: GramFactorization,
    cfg: SolverConfig,
    bound: Optional[BoundConfig] = None,
    warm_start: Optional[np.ndarray] = None,
) -> WorstCaseResult:
    """
    Dispatch to the inner solver of an objective kind (mse/bern).
    """
    if objective_kind == "mse":
        return wc_mse_inner(w, inst, ball, gf, cfg, warm_start=warm_start)
    if objective_kind == "bern":
        if bound is None:
            raise ValueError("The bern objective needs a BoundConfig")
        return wc_bern_inner(w, inst, ball, gf, cfg, bound, warm_start=warm_start)
    raise NotImplementedError(f"Objective {objective_kind} not implemented")
