import logging
from pathlib import Path
from typing import Callable, Dict, List

from bope.cli.checks import run_oracle_check, run_rate_check
from bope.cli.evaluate import run_bound, run_evaluate
from bope.cli.fit_hyper import run_fit_hyper
from bope.cli.pipeline import output_path
from bope.cli.report import EvalReport, emit_report
from bope.cli.synth_bench import run_synth_bench
from bope.core.config import RunConfig

logger = logging.getLogger(__name__)

MODE_RUNNERS: Dict[str, Callable[[RunConfig], EvalReport]] = {
    "synth-bench": run_synth_bench,
    "evaluate": run_evaluate,
    "bound": run_bound,
    "fit-hyper": run_fit_hyper,
    "oracle-check": run_oracle_check,
    "rate-check": run_rate_check,
}


def run(config: RunConfig) -> EvalReport:
    """
    Run a mode and write its report in every configured format.

    :param config: Run configuration.
    :return: The report (also written to `<out>/<mode>.<format>`).
    """
    if config.mode not in MODE_RUNNERS:
        raise NotImplementedError(f"Mode {config.mode} not implemented")
    logger.debug("Resolved configuration: %s", config.to_dict())

    report = MODE_RUNNERS[config.mode](config)
    report.config = config.to_dict()
    report.include_timing = config.output.include_timing

    written: List[Path] = [emit_report(report, fmt, output_path(config, fmt)) for fmt in config.output.formats]
    logger.info(">> Finished %s; reports at %s", config.mode, ", ".join(str(p) for p in written))
    return report
