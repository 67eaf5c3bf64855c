import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from bope.cli.pipeline import (
    BOPE,
    BOPE_B,
    BOPE_BERN,
    LASSO,
    MethodFit,
    Reference,
    draw_synthetic,
    fit_method,
    fit_reference,
    ip_start,
    is_gaussian_world,
    load_instance,
    world_seeds,
)
from bope.cli.report import EvalReport, MethodRow
from bope.core.config import RunConfig
from bope.core.data import EvaluationInstance
from bope.core.estimator import bias, lower_bound, point_estimate, variance
from bope.core.utils import ordered_map, timed
from bope.core.wcopt import WorstCaseResult, solve_inner

logger = logging.getLogger(__name__)

BOUND_METHODS = (BOPE_BERN, BOPE_B, BOPE)


def worst_case(kind: str, fit: MethodFit, ref: Reference, config: RunConfig) -> WorstCaseResult:
    """Worst case of a method's weights in the Bernoulli-evidence ball."""
    own_kind = {BOPE_B: "mse", BOPE_BERN: "bern"}.get(fit.name)
    if fit.wc is not None and own_kind == kind:
        return fit.wc
    return solve_inner(kind, fit.weights, ref.inst, ref.ball_bernoulli, ref.gf_bernoulli, config.solver, config.bound)


def _standard_error(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def do_evaluate(
    config: RunConfig,
    inst: EvaluationInstance,
    true_r: Optional[np.ndarray] = None,
    starts: Sequence[np.ndarray] = (),
) -> EvalReport:
    """
    Point estimates, worst-case objectives and lower bounds of every method on
    one instance.

    :param config: Run configuration.
    :param inst: Evaluation instance.
    :param true_r: True revenue vector when known (adds bias^2/variance/MSE).
    :param starts: Extra outer starts for the minimax method.
    :return: Report with one row per method.
    """
    report = EvalReport(mode=config.mode, include_timing=config.output.include_timing)

    # 01. Reference revenue and hyperparameters
    logger.info(">> Fitting reference revenue and hyperparameters (%s)...", config.hyper.source)
    with timed("reference", report.timing):
        ref = fit_reference(config, inst, config.run.seed)
    report.hyperparameters = ref.hyper_report()

    # 02. Weights, worst cases and bounds per method
    main = BOPE_B if config.objective == "mse" else BOPE_BERN
    for name in (main, BOPE, LASSO):
        logger.info(">> Evaluating %s...", name)
        with timed(name, report.timing):
            fit = fit_method(name, config, ref, starts=starts if name == main else ())
            estimate = point_estimate(fit.weights, inst, fit.r_hat)
            wc = worst_case(config.objective, fit, ref, config)
            wc_bern = wc if config.objective == "bern" else worst_case("bern", fit, ref, config)
        row = MethodRow(
            method=name,
            estimate=estimate,
            wc_objective=wc.objective,
            lower_bound=lower_bound(estimate, wc_bern.objective),
            diagnostics={
                "objective": config.objective,
                "wc_bern": wc_bern.objective,
                "inner_converged": wc.converged,
                "inner_iterations": wc.iterations,
                "jitter": wc.active_jitter,
                "weights": fit.weights.w,
            },
        )
        if true_r is not None:
            row.bias_sq = bias(fit.weights, true_r, ref.ball_bernoulli) ** 2
            row.variance = variance(fit.weights, true_r, inst)
            row.mse = row.bias_sq + row.variance
            row.diagnostics["truth"] = float(np.mean(true_r[inst.n :]))
        report.rows.append(row)
        logger.info("%-10s estimate %.4f  worst case %.4f", name, estimate, wc.objective)
    return report


def run_evaluate(config: RunConfig) -> EvalReport:
    """
    Evaluate on the configured CSV, or on a synthetic draw with known truth.

    :param config: Run configuration.
    :return: The evaluation report.
    """
    if config.data.source == "csv":
        return do_evaluate(config, load_instance(config))
    world, inst, true_r = draw_synthetic(config, world_seeds(config.run.seed, 1)[0])
    logger.info(">> Drew a synthetic instance with n = %s from world %s", inst.n, world.name)
    starts = [ip_start(world, inst)] if is_gaussian_world(world) else []
    return do_evaluate(config, inst, true_r=true_r, starts=starts)


def _bound_rows(
    config: RunConfig, index: int, inst: EvaluationInstance, truth: Optional[float]
) -> Tuple[List[dict], dict]:
    ref = fit_reference(config, inst, config.run.seed)
    rows = []
    for name in BOUND_METHODS:
        fit = fit_method(name, config, ref)
        estimate = point_estimate(fit.weights, inst, fit.r_hat)
        wc = worst_case("bern", fit, ref, config)
        rows.append(
            {
                "instance": index,
                "method": name,
                "estimate": estimate,
                "bern": wc.objective,
                "lower_bound": lower_bound(estimate, wc.objective),
                "truth": truth,
                "gamma_hat_sq": ref.bernoulli.gamma_hat_sq,
            }
        )
    return rows, {"instance": index, **ref.hyper_report()}


def do_bound(
    config: RunConfig,
    instances: Sequence[Tuple[EvaluationInstance, Optional[float]]],
    workers: int = 0,
) -> EvalReport:
    """
    Revenue lower bounds R(w) - Bern(w, r_wc) for the Bernstein, MSE and BOPE
    weights, averaged over instances with standard errors.

    :param config: Run configuration.
    :param instances: Instances with their true target revenue (None when unknown).
    :param workers: Worker threads over instances.
    :return: Report with mean and standard error per method.
    """
    report = EvalReport(mode=config.mode, include_timing=config.output.include_timing)

    # 01. Bounds per instance
    logger.info(">> Computing lower bounds on %s instance(s) at epsilon = %s...", len(instances), config.bound.epsilon)
    with timed("bounds", report.timing):
        per_instance = ordered_map(
            lambda item: _bound_rows(config, item[0], *item[1]),
            list(enumerate(instances)),
            workers=workers,
            desc="instances",
            progress=True,
        )
    table = pd.DataFrame([row for rows, _ in per_instance for row in rows])

    # 02. Average and standard error
    logger.info(">> Averaging over instances...")
    for name in BOUND_METHODS:
        group = table[table["method"] == name]
        estimate, bern, bound = (group[c].to_numpy(dtype=float) for c in ("estimate", "bern", "lower_bound"))
        report.rows.append(
            MethodRow(
                method=name,
                estimate=float(np.mean(estimate)),
                wc_objective=float(np.mean(bern)),
                lower_bound=float(np.mean(bound)),
                diagnostics={
                    "estimate_se": _standard_error(estimate),
                    "wc_objective_se": _standard_error(bern),
                    "lower_bound_se": _standard_error(bound),
                    "instances": len(group),
                    "epsilon": config.bound.epsilon,
                },
            )
        )
        logger.info("%-10s Bern %.4f  lower bound %.4f", name, np.mean(bern), np.mean(bound))
    report.tables["per-instance"] = table
    report.hyperparameters = {"source": config.hyper.source, "per_instance": [hyper for _, hyper in per_instance]}
    return report


def run_bound(config: RunConfig) -> EvalReport:
    """
    Bounds on the CSV instance, or averaged over `run.seeds` synthetic draws.

    :param config: Run configuration.
    :return: The bound report.
    """
    instances: List[Tuple[EvaluationInstance, Optional[float]]] = []
    if config.data.source == "csv":
        instances.append((load_instance(config), None))
    else:
        for seed in world_seeds(config.run.seed, config.run.seeds):
            _, inst, true_r = draw_synthetic(config, seed)
            instances.append((inst, float(np.mean(true_r[inst.n :]))))
    return do_bound(config, instances, workers=config.run.workers)
