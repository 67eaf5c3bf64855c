"""
Module with the configuration related utilities and helper functions.

A run is configured by an INI file whose keys are addressed by their dotted
path `section.key`. Values are layered: built-in defaults, then the file,
then `BOPE_<SECTION>__<KEY>` environment variables, then command line
overrides. `resolve_config` validates everything into an immutable RunConfig.
"""

import logging
import os
from configparser import ConfigParser
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Tuple, TypeVar

import click

from bope.core.data import CsvSchema, TargetPolicySpec
from bope.core.errors import ConfigError
from bope.core.estimator import BoundConfig
from bope.core.synth.montecarlo import PROTOCOLS
from bope.core.wcopt import OBJECTIVE_KINDS, SolverConfig

logger = logging.getLogger(__name__)

T = TypeVar("T")

MODES = ("synth-bench", "evaluate", "bound", "fit-hyper", "oracle-check", "rate-check")
ENV_PREFIX = "BOPE_"

DEFAULTS: Dict[str, Dict[str, str]] = {
    "data": {
        "source": "synthetic",
        "setting": "a",
        "b": "2.0",
        "noise_sd": "2.0",
        "overlap_shift": "0.5",
        "n": "50",
        "csv_path": "",
        "feature_columns": "fico,amount",
        "price_column": "rate",
        "demand_column": "accept",
    },
    "policy": {
        "kind": "multiplicative",
        "factor": "1.05",
        "shift": "0.0",
        "prices": "",
        "coef": "0.5,-0.5",
        "intercept": "2.0",
        "noise_sd": "2.0",
        "seed": "0",
    },
    "estimator": {"objective": "mse", "epsilon": "0.1"},
    "hyper": {
        "source": "fit",
        "budget": "400",
        "lengthscale_sq": "",
        "gamma_hat_sq": "1.0",
        "sigma_sq": "1.0",
        "lasso_penalty": "",
        "lasso_folds": "5",
        "lasso_solver": "coordinate",
    },
    "kernel": {"jitter": "1e-8", "jitter_cap": "1e-2"},
    "solver": {
        "outer_max_iters": "300",
        "inner_max_iters": "2000",
        "outer_tol": "1e-6",
        "inner_tol": "1e-7",
        "bias_slices": "41",
        "multistarts": "5",
        "smoothing_p": "16",
    },
    "run": {
        "seed": "0",
        "seeds": "5",
        "reps": "100",
        "workers": "0",
        "protocol": "honest",
        "rate_ns": "25,50,100,200",
        "oracle_instances": "50",
        "oracle_resolution": "60",
        "oracle_max_grid_points": "20000000",
    },
    "output": {"formats": "csv,json", "include_timing": "no"},
}


class BopeLogHandler(logging.FileHandler):
    """
    Log handler which logs to a file but also outputs
    INFO/WARNING/ERROR messages to the terminal using click.
    """

    def __init__(self, filename, mode="w", encoding="UTF-8", delay=False):
        super().__init__(filename, mode, encoding, delay)

    def emit(self, record: logging.LogRecord):
        if record.levelno >= logging.ERROR:
            click.secho(f"Error: {record.getMessage()}", fg="red", bold=True, err=True)
        elif record.levelno == logging.WARNING:
            click.secho(f"Warning: {record.getMessage()}", fg="yellow", bold=True, err=True)
        elif record.levelno == logging.INFO:
            message = record.getMessage()
            if message.startswith(">>"):
                click.secho(message, bold=True, fg="green")
            else:
                click.secho(message)
        return super().emit(record)


def initialize_logger(log_file: Path = Path("bope.log")):
    """
    Set the logging functionality default.
    Everything goes to the log file, INFO and above is echoed to the terminal.
    """
    log_file.parent.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        handlers=[BopeLogHandler(log_file)],
        format="%(asctime)s.%(msecs)03d %(name)-40s %(levelname)-8s %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        level=logging.DEBUG,
        force=True,
    )
    logging.getLogger("numba").setLevel(logging.WARNING)


def read_config(
    path: Optional[Path] = None,
    environ: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, str]] = None,
) -> ConfigParser:
    """
    Layer defaults, the INI file, environment variables and explicit overrides.

    :param path: INI file (None for defaults only).
    :param environ: Environment to read BOPE_<SECTION>__<KEY> variables from.
    :param overrides: Dotted key -> value overrides applied last.
    :return: The merged parser.
    """
    parser = ConfigParser()
    parser.read_dict(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"file {path} does not exist")
        with open(path, encoding="utf-8") as config_file:
            parser.read_file(config_file)

    layered: Dict[str, str] = {}
    for name, value in (environ or {}).items():
        if name.startswith(ENV_PREFIX) and "__" in name:
            section, key = name[len(ENV_PREFIX) :].lower().split("__", 1)
            layered[f"{section}.{key}"] = value
    layered.update(overrides or {})
    for dotted, value in layered.items():
        section, _, key = dotted.partition(".")
        if not parser.has_section(section):
            raise ConfigError(dotted, "unknown section")
        parser.set(section, key, str(value))

    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(section, "unknown section")
        for key in parser[section]:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
    return parser


def _value(
    parser: ConfigParser,
    dotted: str,
    convert: Callable[[str], T],
    check: Callable[[T], bool] = lambda _: True,
    reason: str = "invalid value",
) -> T:
    section, key = dotted.split(".")
    raw = parser.get(section, key).strip()
    try:
        value = convert(raw)
    except (ValueError, TypeError):
        raise ConfigError(dotted, f"cannot parse '{raw}'") from None
    if not check(value):
        raise ConfigError(dotted, f"{reason} (got '{raw}')")
    return value


def _choice(parser: ConfigParser, dotted: str, choices: Tuple[str, ...]) -> str:
    return _value(parser, dotted, str, lambda v: v in choices, f"must be one of {', '.join(choices)}")


def _floats(raw: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in raw.split(",") if v.strip())


def _ints(raw: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in raw.split(",") if v.strip())


def _optional_float(raw: str) -> Optional[float]:
    return float(raw) if raw else None


def _boolean(raw: str) -> bool:
    states = ConfigParser.BOOLEAN_STATES
    if raw.lower() not in states:
        raise ValueError(raw)
    return states[raw.lower()]


@dataclass(frozen=True)
class DataSection:
    source: str
    setting: str
    b: float
    noise_sd: float
    overlap_shift: float
    n: int
    csv_path: Optional[Path]
    schema: CsvSchema


@dataclass(frozen=True)
class HyperSection:
    source: str
    budget: int
    lengthscale_sq: Optional[Tuple[float, ...]]
    gamma_hat_sq: float
    sigma_sq: float
    lasso_penalty: Optional[float]
    lasso_folds: int
    lasso_solver: str


@dataclass(frozen=True)
class RunSection:
    seed: int
    seeds: int
    reps: int
    workers: int
    protocol: str
    rate_ns: Tuple[int, ...]
    oracle_instances: int
    oracle_resolution: int
    oracle_max_grid_points: int


@dataclass(frozen=True)
class OutputSection:
    directory: Path
    formats: Tuple[str, ...]
    include_timing: bool


@dataclass(frozen=True)
class RunConfig:
    """
    Fully validated run configuration.

    :param values: Every resolved `section.key` value as text, for reports.
    """

    mode: str
    data: DataSection
    policy: TargetPolicySpec
    objective: str
    bound: BoundConfig
    hyper: HyperSection
    jitter: float
    jitter_cap: float
    solver: SolverConfig
    run: RunSection
    output: OutputSection
    values: Tuple[Tuple[str, str], ...]

    def to_dict(self) -> Dict[str, str]:
        return {"mode": self.mode, "output.directory": str(self.output.directory), **dict(self.values)}


def _policy(parser: ConfigParser) -> TargetPolicySpec:
    kind = _choice(parser, "policy.kind", ("multiplicative", "additive", "explicit", "linear_gaussian"))
    if kind == "multiplicative":
        return TargetPolicySpec.multiplicative(_value(parser, "policy.factor", float, lambda v: v > 0, "must be > 0"))
    if kind == "additive":
        return TargetPolicySpec.additive(_value(parser, "policy.shift", float))
    if kind == "explicit":
        prices = _value(parser, "policy.prices", _floats, lambda v: len(v) > 0 and min(v) > 0, "must be positive")
        return TargetPolicySpec.explicit(prices)
    return TargetPolicySpec.linear_gaussian(
        coef=_value(parser, "policy.coef", _floats, lambda v: len(v) > 0, "must not be empty"),
        intercept=_value(parser, "policy.intercept", float),
        noise_sd=_value(parser, "policy.noise_sd", float, lambda v: v >= 0, "must be >= 0"),
        seed=_value(parser, "policy.seed", int, lambda v: v >= 0, "must be >= 0"),
    )


def resolve_config(parser: ConfigParser, mode: str, out_dir: Path = Path("out")) -> RunConfig:
    """
    Validate a merged parser into a RunConfig.

    :param parser: Output of `read_config`.
    :param mode: CLI mode.
    :param out_dir: Output directory.
    :return: The run configuration.
    """
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
    positive = (lambda v: v > 0, "must be > 0")
    non_negative = (lambda v: v >= 0, "must be >= 0")

    # 01. Data
    source = _choice(parser, "data.source", ("synthetic", "csv"))
    csv_raw = parser.get("data", "csv_path").strip()
    if source == "csv" and not csv_raw:
        raise ConfigError("data.csv_path", "required when data.source = csv")
    columns = _value(parser, "data.feature_columns", lambda r: tuple(c.strip() for c in r.split(",") if c.strip()))
    if not columns:
        raise ConfigError("data.feature_columns", "at least one column is required")
    data = DataSection(
        source=source,
        setting=_choice(parser, "data.setting", ("a", "b", "overlap")),
        b=_value(parser, "data.b", float),
        noise_sd=_value(parser, "data.noise_sd", float, *non_negative),
        overlap_shift=_value(parser, "data.overlap_shift", float),
        n=_value(parser, "data.n", int, lambda v: v >= 2, "must be >= 2"),
        csv_path=Path(csv_raw) if csv_raw else None,
        schema=CsvSchema(
            columns,
            _value(parser, "data.price_column", str, bool, "must not be empty"),
            _value(parser, "data.demand_column", str, bool, "must not be empty"),
        ),
    )

    # 02. Estimator and hyperparameters
    objective = _choice(parser, "estimator.objective", OBJECTIVE_KINDS)
    epsilon = _value(parser, "estimator.epsilon", float, lambda v: 0 < v < 1, "must be in (0, 1)")
    lengthscale_sq = _value(parser, "hyper.lengthscale_sq", _floats, lambda v: all(x > 0 for x in v), "must be > 0")
    hyper = HyperSection(
        source=_choice(parser, "hyper.source", ("fit", "explicit")),
        budget=_value(parser, "hyper.budget", int, *positive),
        lengthscale_sq=lengthscale_sq or None,
        gamma_hat_sq=_value(parser, "hyper.gamma_hat_sq", float, *non_negative),
        sigma_sq=_value(parser, "hyper.sigma_sq", float, *positive),
        lasso_penalty=_value(parser, "hyper.lasso_penalty", _optional_float, lambda v: v is None or v >= 0, ">= 0"),
        lasso_folds=_value(parser, "hyper.lasso_folds", int, lambda v: v >= 2, "must be >= 2"),
        lasso_solver=_choice(parser, "hyper.lasso_solver", ("coordinate", "qp")),
    )

    # 03. Kernel and solver
    jitter = _value(parser, "kernel.jitter", float, *non_negative)
    jitter_cap = _value(parser, "kernel.jitter_cap", float, lambda v: v >= jitter, "must be >= kernel.jitter")
    root_seed = _value(parser, "run.seed", int, *non_negative)
    solver = SolverConfig(
        outer_max_iters=_value(parser, "solver.outer_max_iters", int, *positive),
        inner_max_iters=_value(parser, "solver.inner_max_iters", int, *positive),
        outer_tol=_value(parser, "solver.outer_tol", float, *positive),
        inner_tol=_value(parser, "solver.inner_tol", float, *positive),
        bias_slices=_value(parser, "solver.bias_slices", int, lambda v: v >= 3, "must be >= 3"),
        multistarts=_value(parser, "solver.multistarts", int, *positive),
        smoothing_p=_value(parser, "solver.smoothing_p", int, lambda v: v >= 8 and v % 2 == 0, "must be even, >= 8"),
        seed=root_seed,
    )

    # 04. Run and output
    run = RunSection(
        seed=root_seed,
        seeds=_value(parser, "run.seeds", int, *positive),
        reps=_value(parser, "run.reps", int, lambda v: v >= 2, "must be >= 2"),
        workers=_value(parser, "run.workers", int, *non_negative),
        protocol=_choice(parser, "run.protocol", PROTOCOLS),
        rate_ns=_value(parser, "run.rate_ns", _ints, lambda v: len(v) >= 2 and min(v) >= 2, "needs 2+ sizes >= 2"),
        oracle_instances=_value(parser, "run.oracle_instances", int, *positive),
        oracle_resolution=_value(parser, "run.oracle_resolution", int, lambda v: v >= 2, "must be >= 2"),
        oracle_max_grid_points=_value(parser, "run.oracle_max_grid_points", int, *positive),
    )
    formats = _value(
        parser,
        "output.formats",
        lambda r: tuple(f.strip() for f in r.split(",") if f.strip()),
        lambda v: len(v) > 0 and set(v) <= {"csv", "json"},
        "must list csv and/or json",
    )
    output = OutputSection(
        directory=Path(out_dir),
        formats=formats,
        include_timing=_value(parser, "output.include_timing", _boolean),
    )

    values = tuple(sorted((f"{s}.{k}", v) for s in parser.sections() for k, v in parser[s].items()))
    return RunConfig(
        mode=mode,
        data=data,
        policy=_policy(parser),
        objective=objective,
        bound=BoundConfig(epsilon),
        hyper=hyper,
        jitter=jitter,
        jitter_cap=jitter_cap,
        solver=solver,
        run=run,
        output=output,
        values=values,
    )


def load_config(
    mode: str,
    path: Optional[Path] = None,
    seed: Optional[int] = None,
    out_dir: Path = Path("out"),
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Read, override and validate the configuration of a CLI invocation.

    :param mode: CLI mode.
    :param path: INI file.
    :param seed: Overrides run.seed.
    :param out_dir: Output directory.
    :param environ: Environment (defaults to os.environ).
    """
    overrides = {"run.seed": str(seed)} if seed is not None else {}
    parser = read_config(path, os.environ if environ is None else environ, overrides)
    return resolve_config(parser, mode, out_dir)
