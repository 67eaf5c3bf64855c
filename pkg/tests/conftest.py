from pathlib import Path
from typing import Dict

import numpy as np
import pytest

from bope.core.config import RunConfig, load_config
from bope.core.data import EvaluationInstance, build_instance
from bope.core.estimator import RevenueBall
from bope.core.kernel import GramFactorization, KernelConfig, gram_matrix
from bope.core.wcopt import SolverConfig

# Small but complete settings for end-to-end runs
FAST_SETTINGS: Dict[str, str] = {
    "data.n": "8",
    "hyper.source": "explicit",
    "hyper.lasso_penalty": "0.01",
    "solver.outer_max_iters": "15",
    "solver.inner_max_iters": "200",
    "solver.bias_slices": "7",
    "solver.multistarts": "2",
    "run.seeds": "2",
    "run.reps": "5",
    "run.workers": "1",
}


def as_environ(settings: Dict[str, str]) -> Dict[str, str]:
    """Dotted config keys as BOPE_<SECTION>__<KEY> variables."""
    return {"BOPE_" + key.replace(".", "__").upper(): value for key, value in settings.items()}


def make_config(mode: str, out_dir: Path, **settings: str) -> RunConfig:
    merged = {**FAST_SETTINGS, **{k.replace("__", "."): v for k, v in settings.items()}}
    return load_config(mode, out_dir=out_dir, environ=as_environ(merged))


def random_instance(rng: np.random.Generator, n: int) -> EvaluationInstance:
    features = rng.uniform(-1.0, 1.0, size=(n, 2))
    logged = rng.uniform(2.0, 8.0, size=n)
    target = logged * rng.uniform(0.8, 1.2, size=n)
    demands = rng.integers(0, 2, size=n)
    return build_instance(features, logged, target, demands)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def instance(rng) -> EvaluationInstance:
    return random_instance(rng, 5)


@pytest.fixture
def gram(instance) -> GramFactorization:
    return gram_matrix(instance, KernelConfig(np.full(3, 2.0)))


@pytest.fixture
def ball(instance) -> RevenueBall:
    return RevenueBall(0.5 * instance.price_vector, 1.5, instance.price_vector)


@pytest.fixture
def solver_config() -> SolverConfig:
    return SolverConfig(outer_max_iters=25, inner_max_iters=400, bias_slices=9, multistarts=2)
