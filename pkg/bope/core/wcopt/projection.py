"""
Module containing projections onto the feasible revenue set

    {r : (r - c)^T M^-1 (r - c) <= radius^2} ∩ {0 <= r <= p} [∩ {a^T r = offset}]

where M = G + jitter I. The ellipsoid projection works in the eigenbasis of M
and finds the Lagrange multiplier by Newton's method on the secular equation.
Intersections are handled with Dykstra's alternating projections.
"""

import logging
from typing import Optional, Tuple

import numba
import numpy as np

from bope.core.estimator import RevenueBall
from bope.core.kernel import GramFactorization, mahalanobis_sq

logger = logging.getLogger(__name__)


@numba.njit(cache=True)
def _matvec(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    rows, cols = mat.shape
    out = np.zeros(rows)
    for i in range(rows):
        acc = 0.0
        for j in range(cols):
            acc += mat[i, j] * vec[j]
        out[i] = acc
    return out


@numba.njit(cache=True)
def project_ellipsoid(
    x: np.ndarray,
    center: np.ndarray,
    evecs: np.ndarray,
    evecs_t: np.ndarray,
    evals: np.ndarray,
    radius_sq: float,
) -> np.ndarray:
    """
    Euclidean projection onto {y : (y - c)^T M^-1 (y - c) <= radius^2}.

    :param x: Point to project.
    :param center: Ellipsoid center c.
    :param evecs: Eigenvectors of M as columns (C contiguous).
    :param evecs_t: Transpose of evecs (C contiguous).
    :param evals: Eigenvalues of M.
    :param radius_sq: Squared radius.
    :return: The projection.
    """
    coords = _matvec(evecs_t, x - center)
    norm_sq = np.sum(coords * coords / evals)
    if norm_sq <= radius_sq:
        return x.copy()
    if radius_sq <= 0.0:
        return center.copy()

    # psi(lam) = phi(lam)^-1/2 - 1/radius is increasing and concave in lam
    target = np.sqrt(radius_sq)
    lam = 0.0
    for _ in range(100):
        denom = evals + lam
        phi = np.sum(evals * coords * coords / (denom * denom))
        if abs(phi - radius_sq) <= 1e-13 * radius_sq:
            break
        dphi = -2.0 * np.sum(evals * coords * coords / (denom * denom * denom))
        psi = 1.0 / np.sqrt(phi) - 1.0 / target
        dpsi = -0.5 * dphi / (phi * np.sqrt(phi))
        step = psi / dpsi
        if step >= 0.0 or lam - step <= lam:
            break
        lam = lam - step

    scaled = coords * evals / (evals + lam)
    return center + _matvec(evecs, scaled)


@numba.njit(cache=True)
def dykstra(
    x0: np.ndarray,
    center: np.ndarray,
    evecs: np.ndarray,
    evecs_t: np.ndarray,
    evals: np.ndarray,
    radius_sq: float,
    upper: np.ndarray,
    normal: np.ndarray,
    offset: float,
    use_plane: bool,
    max_sweeps: int,
    tol: float,
) -> Tuple[np.ndarray, int]:
    """
    Dykstra's alternating projection onto ellipsoid ∩ box (∩ hyperplane).

    :return: The approximate projection and the number of sweeps done.
    """
    x = x0.copy()
    size = x.shape[0]
    inc_ellipsoid = np.zeros(size)
    inc_box = np.zeros(size)
    inc_plane = np.zeros(size)
    normal_sq = np.sum(normal * normal)

    for sweep in range(max_sweeps):
        previous = x.copy()

        y = x + inc_ellipsoid
        x = project_ellipsoid(y, center, evecs, evecs_t, evals, radius_sq)
        inc_ellipsoid = y - x

        y = x + inc_box
        x = np.minimum(np.maximum(y, 0.0), upper)
        inc_box = y - x

        if use_plane:
            y = x + inc_plane
            x = y - (np.sum(normal * y) - offset) / normal_sq * normal
            inc_plane = y - x

        change = np.max(np.abs(x - previous))
        if change <= tol * (1.0 + np.max(np.abs(x))):
            return x, sweep + 1
    return x, max_sweeps


class FeasibleSet:
    """
    The RKHS ball intersected with the price box, with projection and repair.

    :param ball: Revenue ball.
    :param gf: Gram factorization defining the ellipsoid metric.
    :param max_sweeps: Dykstra sweep limit.
    :param tol: Dykstra tolerance.
    """

    def __init__(self, ball: RevenueBall, gf: GramFactorization, max_sweeps: int = 200, tol: float = 1e-9):
        if gf.size != ball.size:
            raise ValueError(f"Gram matrix of size {gf.size} does not match a ball over {ball.size} points")
        self.ball = ball
        self.gf = gf
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.radius_sq = ball.gamma_hat**2
        evals, evecs = gf.spectrum
        self._evals = evals
        self._evecs = evecs
        self._evecs_t = np.ascontiguousarray(evecs.T)
        self._no_plane = np.ones(ball.size)

    @property
    def center(self) -> np.ndarray:
        return self.ball.r_hat

    @property
    def upper(self) -> np.ndarray:
        return self.ball.price_box

    def project(self, x: np.ndarray, plane: Optional[Tuple[np.ndarray, float]] = None) -> np.ndarray:
        """
        Approximate Euclidean projection, optionally restricted to {normal^T r = offset}.
        """
        normal, offset = plane if plane is not None else (self._no_plane, 0.0)
        projected, _ = dykstra(
            np.ascontiguousarray(x, dtype=np.float64),
            np.ascontiguousarray(self.center),
            self._evecs,
            self._evecs_t,
            self._evals,
            self.radius_sq,
            np.ascontiguousarray(self.upper),
            np.ascontiguousarray(normal, dtype=np.float64),
            float(offset),
            plane is not None,
            self.max_sweeps,
            self.tol,
        )
        return projected

    def mahalanobis_sq(self, r: np.ndarray) -> float:
        return mahalanobis_sq(self.gf, r - self.center)

    def repair(self, r: np.ndarray) -> np.ndarray:
        """
        Make a nearly feasible point exactly feasible: clip into the box, then
        shrink towards the (box feasible) center until it is inside the ellipsoid.
        """
        r = np.clip(r, 0.0, self.upper)
        norm_sq = self.mahalanobis_sq(r)
        if norm_sq > self.radius_sq:
            if self.radius_sq <= 0:
                return self.center.copy()
            shrink = np.sqrt(self.radius_sq / norm_sq) * (1.0 - 1e-12)
            r = self.center + shrink * (r - self.center)
        return r

    def is_feasible(self, r: np.ndarray, rtol: float = 1e-6) -> bool:
        scale = 1e-12 * (1.0 + np.max(self.upper))
        in_box = bool(np.all(r >= -scale) and np.all(r <= self.upper + scale))
        return in_box and self.mahalanobis_sq(r) <= self.radius_sq * (1 + rtol) + 1e-12
