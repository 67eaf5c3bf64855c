"""
Module containing the outer minimization min_w h(w), h(w) = max_r phi(w, r).

h is convex and its gradient at w is the partial gradient of phi at the
worst-case revenue vector, so plain gradient descent with an Armijo
backtracking line search applies. Each trial point re-solves the inner
problem warm-started from the previous worst case.
"""

import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from bope.core.data import EvaluationInstance
from bope.core.estimator import BoundConfig, RevenueBall, Weights
from bope.core.kernel import GramFactorization
from bope.core.wcopt.gradient import danskin_gradient
from bope.core.wcopt.inner import SolverConfig, WorstCaseResult, solve_inner

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_HALVINGS = 40

Callback = Callable[[int, np.ndarray, WorstCaseResult], None]


def solve_weights(
    objective_kind: str,
    inst: EvaluationInstance,
    ball: RevenueBall,
    gf: GramFactorization,
    cfg: SolverConfig,
    bound: Optional[BoundConfig] = None,
    starts: Sequence[np.ndarray] = (),
    callback: Optional[Callback] = None,
    progress: bool = False,
) -> Tuple[Weights, WorstCaseResult]:
    """
    Minimize the worst-case objective over the weights.

    :param objective_kind: mse or bern.
    :param inst: Evaluation instance.
    :param ball: Revenue ball.
    :param gf: Gram factorization.
    :param cfg: Solver configuration.
    :param bound: Confidence level (bern only).
    :param starts: Extra candidate starts (eg. BOPE or IP weights) besides w = 0.
    :param callback: Called with (iteration, w, result) for every accepted iterate.
    :param progress: Show a progress bar.
    :return: The best weights found and their worst-case result.
    """
    n = inst.n

    def evaluate(w: np.ndarray, warm_start: Optional[np.ndarray] = None) -> WorstCaseResult:
        return solve_inner(objective_kind, w, inst, ball, gf, cfg, bound=bound, warm_start=warm_start)

    # 01. Evaluate every candidate start cold and keep the best
    w = np.zeros(n)
    result = evaluate(w)
    for k, start in enumerate(starts):
        start = np.asarray(start, dtype=float)
        if start.shape != (n,):
            raise ValueError(f"Start {k} has shape {start.shape}, expected ({n},)")
        candidate = evaluate(start)
        logger.debug("Start %s has objective %.6g (zero weights %.6g)", k, candidate.objective, result.objective)
        if candidate.objective < result.objective:
            w, result = start.copy(), candidate
    if callback is not None:
        callback(0, w.copy(), result)

    # 02. Gradient descent with backtracking
    step: Optional[float] = None
    converged_inner = result.converged
    for iteration in tqdm(range(1, cfg.outer_max_iters + 1), ncols=80, desc="outer", disable=not progress):
        grad = danskin_gradient(w, result.r_wc, objective_kind, inst, ball, bound, cfg.smoothing_p)
        grad_sq = float(grad @ grad)
        if grad_sq <= 1e-24:
            logger.debug("Zero gradient at iteration %s", iteration)
            break
        if step is None:
            step = 1.0 / np.sqrt(grad_sq)

        accepted = None
        for _ in range(MAX_HALVINGS):
            trial_w = w - step * grad
            trial = evaluate(trial_w, warm_start=result.r_wc)
            if trial.objective <= result.objective - ARMIJO * step * grad_sq:
                accepted = (trial_w, trial)
                break
            step *= 0.5
        if accepted is None:
            logger.debug("Line search failed at iteration %s", iteration)
            break

        decrease = result.objective - accepted[1].objective
        w, result = accepted
        converged_inner = converged_inner and result.converged
        if callback is not None:
            callback(iteration, w.copy(), result)
        logger.debug("Iteration %s: objective %.8g (step %.3g)", iteration, result.objective, step)
        if decrease < cfg.outer_tol:
            break
        step *= 2.0
    else:
        logger.warning("Outer descent stopped at the iteration limit %s", cfg.outer_max_iters)

    if not converged_inner:
        logger.warning("Some inner solves did not converge; objective %.6g may be inexact", result.objective)
    return Weights(w), result
