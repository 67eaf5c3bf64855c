"""
Module containing the Gaussian ARD kernel and the factorized Gram matrix.

K(z, z') = exp(-(z - z')^T diag(lengthscale_sq)^-1 (z - z')).
The inverse Gram matrix is never formed: quadratic forms go through the
lower Cholesky factor of G + jitter I.
"""

import logging
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, eigh, solve_triangular
from scipy.spatial.distance import cdist

from bope.core.data import EvaluationInstance
from bope.core.errors import KernelError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KernelConfig:
    """
    :param lengthscale_sq: Diagonal of the lengthscale matrix, one entry per
        feature plus one (last) for price.
    :param jitter: Diagonal jitter tried first.
    :param jitter_cap: Largest jitter tried before giving up.
    """

    lengthscale_sq: np.ndarray
    jitter: float = 1e-8
    jitter_cap: float = 1e-2

    def __post_init__(self):
        lengthscale_sq = np.array(self.lengthscale_sq, dtype=float).reshape(-1)
        if lengthscale_sq.size == 0 or not np.all(lengthscale_sq > 0) or not np.all(np.isfinite(lengthscale_sq)):
            raise ValueError(f"Lengthscales must be positive and finite, got {lengthscale_sq}")
        if not self.jitter >= 0:
            raise ValueError(f"Jitter must be non-negative, got {self.jitter}")
        if not self.jitter_cap >= self.jitter:
            raise ValueError(f"Jitter cap {self.jitter_cap} is below the jitter {self.jitter}")
        lengthscale_sq.setflags(write=False)
        object.__setattr__(self, "lengthscale_sq", lengthscale_sq)

    @property
    def dim(self) -> int:
        return self.lengthscale_sq.shape[0]


def _check_dim(z: np.ndarray, cfg: KernelConfig):
    if z.shape[-1] != cfg.dim:
        raise ValueError(f"Kernel expects inputs of dimension {cfg.dim}, got {z.shape[-1]}")


def kernel_eval(z: np.ndarray, z_bar: np.ndarray, cfg: KernelConfig) -> float:
    """
    Evaluate the kernel at one pair of points.
    """
    z = np.asarray(z, dtype=float)
    z_bar = np.asarray(z_bar, dtype=float)
    _check_dim(z, cfg)
    _check_dim(z_bar, cfg)
    diff = z - z_bar
    return float(np.exp(-np.sum(diff * diff / cfg.lengthscale_sq)))


def kernel_matrix(points_a: np.ndarray, points_b: np.ndarray, lengthscale_sq: np.ndarray) -> np.ndarray:
    """
    Kernel matrix between two point sets.

    :param points_a: m x D points.
    :param points_b: k x D points.
    :param lengthscale_sq: D squared lengthscales.
    :return: m x k kernel matrix.
    """
    root = np.sqrt(lengthscale_sq)
    sq_dist = cdist(np.atleast_2d(points_a) / root, np.atleast_2d(points_b) / root, "sqeuclidean")
    return np.exp(-sq_dist)


@dataclass(frozen=True, eq=False)
class GramFactorization:
    """
    Gram matrix with the lower Cholesky factor of (gram + jitter I).

    :param gram: Symmetric kernel matrix (without jitter).
    :param factor: Lower triangular L with L L^T = gram + jitter I.
    :param jitter: Jitter that made the factorization succeed.
    """

    gram: np.ndarray
    factor: np.ndarray
    jitter: float

    @property
    def size(self) -> int:
        return self.gram.shape[0]

    @property
    def regularized(self) -> np.ndarray:
        return self.gram + self.jitter * np.eye(self.size)

    @cached_property
    def spectrum(self) -> Tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and C-ordered eigenvectors of gram + jitter I."""
        evals, evecs = eigh(self.regularized)
        floor = max(self.jitter, 1e-14) * 1e-3
        return np.maximum(evals, floor), np.ascontiguousarray(evecs)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """(gram + jitter I)^-1 rhs through the factor."""
        return cho_solve((self.factor, True), rhs)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.gram @ v + self.jitter * v


def factorize(gram: np.ndarray, jitter: float = 1e-8, jitter_cap: float = 1e-2) -> GramFactorization:
    """
    Cholesky factorize gram + jitter I, escalating the jitter ten-fold on failure.

    :param gram: Symmetric PSD matrix.
    :param jitter: Initial jitter.
    :param jitter_cap: Maximum jitter.
    :return: The factorization with the jitter that worked.
    """
    gram = 0.5 * (gram + gram.T)
    identity = np.eye(gram.shape[0])
    current = jitter
    while current <= jitter_cap:
        try:
            factor = cholesky(gram + current * identity, lower=True)
            if np.all(np.diag(factor) > 0):
                if current > jitter:
                    logger.warning("Gram factorization needed jitter %.1e (requested %.1e)", current, jitter)
                return GramFactorization(gram=gram, factor=factor, jitter=current)
        except LinAlgError:
            pass
        logger.debug("Cholesky failed with jitter %.1e", current)
        current = current * 10 if current > 0 else 1e-12
    raise KernelError(
        f"Gram matrix of size {gram.shape[0]} is not factorizable with jitter up to {jitter_cap:.1e};"
        " check for duplicated points with vanishing lengthscales"
    )


def gram_matrix(inst: EvaluationInstance, cfg: KernelConfig) -> GramFactorization:
    """
    Gram matrix over the 2n standardized evaluation points.

    :param inst: Evaluation instance.
    :param cfg: Kernel configuration.
    :return: Factorized Gram matrix.
    """
    _check_dim(inst.z, cfg)
    start = time.time()
    gram = kernel_matrix(inst.z, inst.z, cfg.lengthscale_sq)
    gf = factorize(gram, cfg.jitter, cfg.jitter_cap)
    logger.debug("Built %s gram matrix in %.3fs (jitter %.1e)", gram.shape, time.time() - start, gf.jitter)
    return gf


def mahalanobis_sq(gf: GramFactorization, delta: np.ndarray) -> float:
    """
    delta^T (gram + jitter I)^-1 delta through one triangular solve.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (gf.size,):
        raise ValueError(f"Expected a vector of length {gf.size}, got shape {delta.shape}")
    y = solve_triangular(gf.factor, delta, lower=True)
    return float(y @ y)
