"""
Module containing the verification modes.

oracle-check compares the inner solvers with the brute force grid oracle on
small random instances. rate-check sweeps the number of customers on the
overlap world and fits log-log slopes of the worst-case objectives.
"""

import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from bope.cli.pipeline import BOPE_B, BOPE_BERN, fit_method, fit_reference, world_seeds
from bope.cli.report import EvalReport, MethodRow
from bope.core.config import RunConfig
from bope.core.data import EvaluationInstance, build_instance
from bope.core.estimator import RevenueBall, Weights
from bope.core.kernel import GramFactorization, KernelConfig, gram_matrix
from bope.core.synth import draw_instance, make_overlap_setting
from bope.core.utils import derive_rng, ordered_map, timed
from bope.core.wcopt import MAX_ORACLE_N, OBJECTIVE_KINDS, brute_force_oracle, solve_inner

logger = logging.getLogger(__name__)

ORACLE_ATOL = 1e-2
ORACLE_RTOL = 2e-2


def oracle_resolution(n: int, resolution: int, max_grid_points: int) -> int:
    """Largest resolution not above `resolution` whose 2n-dim grid fits the cap."""
    size = 2 * n
    while resolution > 2 and resolution**size > max_grid_points:
        resolution -= 1
    return resolution


def random_oracle_case(
    seed: int, index: int
) -> Tuple[EvaluationInstance, Weights, RevenueBall, GramFactorization]:
    """Random instance, weights and ball with n in {1, 2, 3}."""
    rng = derive_rng(seed, "oracle", index)
    n = int(rng.integers(1, MAX_ORACLE_N + 1))
    features = rng.normal(size=(n, 2))
    logged = rng.uniform(1.0, 10.0, size=n)
    target = rng.uniform(1.0, 10.0, size=n)
    demands = rng.integers(0, 2, size=n)
    inst = build_instance(features, logged, target, demands)
    gf = gram_matrix(inst, KernelConfig(rng.uniform(0.5, 4.0, size=3)))
    r_hat = rng.uniform(0.0, 1.0, size=2 * n) * inst.price_vector
    ball = RevenueBall(r_hat, float(rng.uniform(0.5, 4.0)), inst.price_vector)
    return inst, Weights(rng.normal(0.0, 2.0, size=n)), ball, gf


def _oracle_case(config: RunConfig, index: int, resolution: int, max_grid_points: int) -> List[dict]:
    inst, w, ball, gf = random_oracle_case(config.run.seed, index)
    used = oracle_resolution(inst.n, resolution, max_grid_points)
    reduced = used < resolution
    rows = []
    for kind in OBJECTIVE_KINDS:
        solver = solve_inner(kind, w, inst, ball, gf, config.solver, config.bound).objective
        grid = brute_force_oracle(w, inst, ball, gf, kind, used, config.bound, max_grid_points)
        tol = max(ORACLE_ATOL, ORACLE_RTOL * abs(grid))
        # Grid points are feasible, so the grid only bounds the maximum from below
        passed = solver >= grid - tol
        rows.append(
            {
                "case": index,
                "n": inst.n,
                "objective": kind,
                "resolution": used,
                "reduced": reduced,
                "solver": solver,
                "grid": grid,
                "gap": solver - grid,
                "passed": bool(passed),
            }
        )
    return rows


def do_oracle_check(
    config: RunConfig,
    instances: int = 50,
    resolution: int = 60,
    max_grid_points: int = 20_000_000,
    workers: int = 0,
) -> EvalReport:
    """
    Inner solver vs grid oracle on random instances with n <= 3.

    :param config: Run configuration (solver settings, epsilon, root seed).
    :param instances: Number of random instances.
    :param resolution: Grid points per coordinate.
    :param max_grid_points: Grid size cap; larger grids get a lower resolution.
    :param workers: Worker threads over instances.
    :return: Report with one row per objective and the per-case table.
    """
    report = EvalReport(mode=config.mode, include_timing=config.output.include_timing)

    # 01. Solve every case both ways
    logger.info(">> Checking the inner solvers on %s random instances (resolution %s)...", instances, resolution)
    with timed("oracle_check", report.timing):
        per_case = ordered_map(
            lambda i: _oracle_case(config, i, resolution, max_grid_points),
            list(range(instances)),
            workers=workers,
            desc="cases",
            progress=True,
        )
    cases = pd.DataFrame([row for rows in per_case for row in rows])

    # 02. Summary per objective
    for kind in OBJECTIVE_KINDS:
        group = cases[cases["objective"] == kind]
        failures = int((~group["passed"]).sum())
        report.rows.append(
            MethodRow(
                method=f"wc_{kind}_inner",
                wc_objective=float(group["solver"].mean()),
                diagnostics={
                    "cases": len(group),
                    "failures": failures,
                    "max_abs_gap": float(group["gap"].abs().max()),
                    "min_gap": float(group["gap"].min()),
                    "reduced_cases": int(group["reduced"].sum()),
                },
            )
        )
        if failures:
            logger.warning("%s of %s %s cases fall below the grid oracle", failures, len(group), kind)
        else:
            logger.info("All %s %s cases reach the grid oracle", len(group), kind)
    report.tables["cases"] = cases
    return report


def run_oracle_check(config: RunConfig) -> EvalReport:
    return do_oracle_check(
        config=config,
        instances=config.run.oracle_instances,
        resolution=config.run.oracle_resolution,
        max_grid_points=config.run.oracle_max_grid_points,
        workers=config.run.workers,
    )


def log_log_slope(ns: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of log(values) against log(ns)."""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(values), 1)[0])


def _rate_case(config: RunConfig, n: int, seed: int) -> Tuple[Dict[str, float], dict]:
    world = make_overlap_setting(config.data.overlap_shift, seed, config.data.noise_sd)
    inst, _ = draw_instance(world, n)
    ref = fit_reference(config, inst, config.run.seed)
    wc_mse = fit_method(BOPE_B, config, ref).wc
    wc_bern = fit_method(BOPE_BERN, config, ref).wc
    assert wc_mse is not None and wc_bern is not None
    row = {"n": n, "seed": seed, "wc_mse": wc_mse.objective, "wc_bern": wc_bern.objective}
    return row, {"n": n, "seed": seed, **ref.hyper_report()}


def do_rate_check(
    config: RunConfig,
    ns: Sequence[int],
    seeds: Sequence[int],
    workers: int = 0,
) -> EvalReport:
    """
    Sweep the number of customers on the overlap world and report the log-log
    slopes of WCMSE(w^MSE) and Bern(w^B, r_wc) against n.

    :param config: Run configuration.
    :param ns: Customer counts to sweep.
    :param seeds: World seeds per customer count.
    :param workers: Worker threads over (n, seed) pairs.
    :return: Report with one row per method, the rates and per-seed tables.
    """
    report = EvalReport(mode=config.mode, include_timing=config.output.include_timing)
    pairs = [(n, seed) for n in ns for seed in seeds]

    # 01. Worst-case objectives over the sweep
    logger.info(">> Sweeping n over %s with %s seeds each...", list(ns), len(seeds))
    with timed("rate_check", report.timing):
        cases = ordered_map(
            lambda pair: _rate_case(config, *pair), pairs, workers=workers, desc="sweep", progress=True
        )
    per_seed = pd.DataFrame([row for row, _ in cases])

    # 02. Means per n and slopes
    rates = per_seed.groupby("n", sort=True)[["wc_mse", "wc_bern"]].mean().reset_index()
    for method, column in ((BOPE_B, "wc_mse"), (BOPE_BERN, "wc_bern")):
        slope = log_log_slope(rates["n"], rates[column])
        report.rows.append(
            MethodRow(
                method=method,
                wc_objective=float(rates[column].iloc[-1]),
                diagnostics={"metric": column, "slope": slope, "ns": [int(n) for n in rates["n"]]},
            )
        )
        logger.info("%-10s log-log slope of %s: %.3f", method, column, slope)
    report.tables["rates"] = rates
    report.tables["per-seed"] = per_seed
    report.hyperparameters = {"source": config.hyper.source, "per_case": [hyper for _, hyper in cases]}
    return report


def run_rate_check(config: RunConfig) -> EvalReport:
    return do_rate_check(
        config=config,
        ns=config.run.rate_ns,
        seeds=world_seeds(config.run.seed, config.run.seeds),
        workers=config.run.workers,
    )
