import logging
from dataclasses import replace
from typing import Callable, Dict, Sequence

from bope.cli.pipeline import BOPE, BOPE_B, LASSO, ReferenceCache, fit_method, make_world, world_seeds
from bope.cli.report import EvalReport, MethodRow
from bope.core.config import RunConfig
from bope.core.data import EvaluationInstance
from bope.core.synth import EstimatorFit, draw_instance, mc_per_seed, summarize
from bope.core.utils import timed

logger = logging.getLogger(__name__)

BENCH_METHODS = (BOPE_B, BOPE, LASSO)

EstimatorFn = Callable[[EvaluationInstance], EstimatorFit]


def do_synth_bench(
    config: RunConfig,
    n: int,
    reps: int,
    seeds: Sequence[int],
    protocol: str = "honest",
    workers: int = 0,
) -> EvalReport:
    """
    Monte-Carlo MSE decomposition of BOPE-B, BOPE and LASSO on a synthetic world.

    :param config: Run configuration (world, hyperparameter and solver settings).
    :param n: Customers per instance.
    :param reps: Demand realizations per seed.
    :param seeds: World seeds, one instance each.
    :param protocol: honest or refit.
    :param workers: Worker threads over seeds.
    :return: Report with one row per method and the per-seed table.
    """
    report = EvalReport(mode=config.mode, include_timing=config.output.include_timing)
    references = ReferenceCache(config)

    def estimator(name: str) -> EstimatorFn:
        def fit(inst: EvaluationInstance) -> EstimatorFit:
            method = fit_method(name, config, references(inst))
            return EstimatorFit(method.weights, method.r_hat)

        return fit

    estimators: Dict[str, EstimatorFn] = {name: estimator(name) for name in BENCH_METHODS}
    world = make_world(config, seeds[0])

    def fitted_on(seed: int) -> dict:
        # the refit protocol keeps the fit on the first realization of a seed
        inst, _ = draw_instance(replace(world, seed=seed), n)
        return {"seed": seed, **(references.hyper_report(inst) or {})}

    # 01. Monte-Carlo decomposition over seeds
    logger.info(
        ">> Running %s seeds x %s reps on world %s (n = %s, %s protocol)...",
        len(seeds),
        reps,
        world.name,
        n,
        protocol,
    )
    with timed("mc_decomposition", report.timing):
        per_seed = mc_per_seed(
            estimators, world, n, reps, seeds, protocol=protocol, workers=workers, progress=True
        )
    summary = summarize(per_seed)

    # 02. Assemble the report
    logger.info(">> Summarizing over seeds...")
    for record in summary.to_dict(orient="records"):
        report.rows.append(
            MethodRow(
                method=record["method"],
                estimate=record["estimate"],
                mse=record["mse"],
                bias_sq=record["bias_sq"],
                variance=record["variance"],
                diagnostics={
                    "mse_se": record["mse_se"],
                    "bias_sq_se": record["bias_sq_se"],
                    "variance_se": record["variance_se"],
                    "truth": record["truth"],
                    "seeds": len(seeds),
                    "reps": reps,
                    "protocol": protocol,
                },
            )
        )
        logger.info(
            "%-10s MSE %.4f  Bias^2 %.4f  Var %.4f",
            record["method"],
            record["mse"],
            record["bias_sq"],
            record["variance"],
        )
    report.tables["per-seed"] = per_seed
    report.hyperparameters = {"source": config.hyper.source, "per_seed": [fitted_on(seed) for seed in seeds]}
    return report


def run_synth_bench(config: RunConfig) -> EvalReport:
    """
    Monte-Carlo benchmark with the sizes of the run section.

    :param config: Run configuration.
    :return: The benchmark report.
    """
    return do_synth_bench(
        config=config,
        n=config.data.n,
        reps=config.run.reps,
        seeds=world_seeds(config.run.seed, config.run.seeds),
        protocol=config.run.protocol,
        workers=config.run.workers,
    )
