import logging
from pathlib import Path
from typing import Optional

import click

from bope.cli.runner import run
from bope.core.config import initialize_logger, load_config
from bope.core.errors import ConfigError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_CONFIG_ERROR = 2


def _execute(mode: str, config: Optional[Path], seed: Optional[int], out: Path):
    initialize_logger(out / "bope.log")
    try:
        run_config = load_config(mode, config, seed=seed, out_dir=out)
        run(run_config)
    except ConfigError as e:
        logger.error("Invalid configuration %s", e)
        raise SystemExit(EXIT_CONFIG_ERROR)
    except Exception as e:
        logger.exception(str(e), exc_info=e)
        raise SystemExit(EXIT_RUNTIME_ERROR)
    raise SystemExit(EXIT_OK)


def _mode_command(mode: str, help_text: str):
    @click.command(name=mode, help=help_text)
    @click.option("-c", "--config", help="The configuration file path.", type=Path, default=None)
    @click.option("-s", "--seed", help="Root seed (overrides run.seed).", type=int, default=None)
    @click.option("-o", "--out", help="The output directory for the tool.", type=Path, default=Path("out"))
    def command(config: Optional[Path], seed: Optional[int], out: Path):
        _execute(mode, config, seed, out)

    return command


@click.group()
def cli():
    """Balanced off-policy evaluation of personalized pricing policies."""


cli.add_command(_mode_command("synth-bench", "Monte-Carlo MSE decomposition on a synthetic world."))
cli.add_command(_mode_command("evaluate", "Estimates, worst-case objectives and lower bounds on one instance."))
cli.add_command(_mode_command("bound", "Revenue lower bounds of the Bernstein, MSE and BOPE weights."))
cli.add_command(_mode_command("fit-hyper", "Evidence-maximizing kernel hyperparameters."))
cli.add_command(_mode_command("oracle-check", "Inner solvers against the brute force grid oracle."))
cli.add_command(_mode_command("rate-check", "Log-log slopes of the worst-case objectives against n."))


if __name__ == "__main__":
    cli()
