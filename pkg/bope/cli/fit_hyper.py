import logging
from dataclasses import replace

import numpy as np
import pandas as pd

from bope.cli.pipeline import draw_synthetic, fit_reference, load_instance, world_seeds
from bope.cli.report import EvalReport
from bope.core.config import RunConfig
from bope.core.data import EvaluationInstance
from bope.core.utils import timed

logger = logging.getLogger(__name__)


def do_fit_hyper(config: RunConfig, inst: EvaluationInstance, budget: int = 400) -> EvalReport:
    """
    Fit the Gaussian and Bernoulli evidence hyperparameters of an instance.

    :param config: Run configuration.
    :param inst: Evaluation instance (only its logged half is used).
    :param budget: Evidence evaluations per Nelder-Mead restart.
    :return: Report with the hyperparameters table.
    """
    report = EvalReport(mode=config.mode, include_timing=config.output.include_timing)
    config = replace(config, hyper=replace(config.hyper, source="fit", budget=budget))

    # 01. LASSO reference and evidence maximization
    logger.info(">> Maximizing the evidence on %s logged rows (budget %s)...", inst.n, budget)
    with timed("fit_hyper", report.timing):
        ref = fit_reference(config, inst, config.run.seed)
    report.hyperparameters = ref.hyper_report()

    # 02. Hyperparameter table
    records = []
    for variant, params, gf in (
        ("gaussian", ref.gaussian, ref.gf_gaussian),
        ("bernoulli", ref.bernoulli, ref.gf_bernoulli),
    ):
        record = {
            "variant": variant,
            "gamma_hat_sq": params.gamma_hat_sq,
            "sigma_sq": np.nan if params.sigma_sq is None else params.sigma_sq,
            "evidence": params.evidence,
            "jitter": gf.jitter,
        }
        record.update({f"lengthscale_sq_{j}": v for j, v in enumerate(params.lengthscale_sq)})
        records.append(record)
        logger.info("%-9s gamma_hat^2 %.4g  evidence %.6g", variant, params.gamma_hat_sq, params.evidence)
    report.tables["hyperparameters"] = pd.DataFrame(records)
    return report


def run_fit_hyper(config: RunConfig) -> EvalReport:
    """
    Fit hyperparameters on the configured CSV or on one synthetic draw.

    :param config: Run configuration.
    :return: The hyperparameter report.
    """
    if config.data.source == "csv":
        inst = load_instance(config)
    else:
        _, inst, _ = draw_synthetic(config, world_seeds(config.run.seed, 1)[0])
    return do_fit_hyper(config, inst, budget=config.hyper.budget)
