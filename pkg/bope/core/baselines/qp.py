"""
Module containing the quadratic program behind the LASSO verification solver

    minimize (1/2) x^T P x + q^T x  subject to  x_j >= 0 for the flagged j.

The split-variable LASSO Hessian is only positive semidefinite. quadprog
needs it definite, so it gets P plus the smallest diagonal shift reaching a
small eigenvalue floor; cvxopt solves the unshifted problem.
"""

import logging
from typing import Tuple

import numpy as np
from scipy.linalg import eigvalsh

logger = logging.getLogger(__name__)

QP_SOLVERS = ("quadprog", "cvxopt")
EIGEN_FLOOR = 1e-10


def definite_shift(mat_p: np.ndarray, floor: float = EIGEN_FLOOR) -> float:
    """
    Diagonal shift s >= 0 such that the smallest eigenvalue of sym(P) + s I
    is floor times the diagonal scale of P.
    """
    sym = 0.5 * (mat_p + mat_p.T)
    scale = max(1.0, float(np.max(np.abs(np.diag(sym)))))
    lowest = float(eigvalsh(sym, subset_by_index=[0, 0])[0])
    return max(0.0, floor * scale - lowest)


def _quadprog_nonnegative(mat_p: np.ndarray, vec_q: np.ndarray, nonnegative: np.ndarray) -> np.ndarray:
    # quadprog solves min 1/2 x^T G x - a^T x s.t. C^T x >= b
    import quadprog

    size = mat_p.shape[0]
    shift = definite_shift(mat_p)
    if shift > 0:
        logger.debug("Shifted the QP diagonal by %.3g", shift)
    qp_g = 0.5 * (mat_p + mat_p.T) + shift * np.eye(size)
    qp_c = np.eye(size)[:, nonnegative]
    return quadprog.solve_qp(qp_g, -vec_q, qp_c, np.zeros(qp_c.shape[1]), 0)[0]


def _cvxopt_nonnegative(mat_p: np.ndarray, vec_q: np.ndarray, nonnegative: np.ndarray) -> np.ndarray:
    import cvxopt

    size = mat_p.shape[0]
    mat_g = -np.eye(size)[nonnegative]
    cvxopt.solvers.options["show_progress"] = False
    solution = cvxopt.solvers.qp(
        cvxopt.matrix(0.5 * (mat_p + mat_p.T)),
        cvxopt.matrix(vec_q),
        cvxopt.matrix(mat_g),
        cvxopt.matrix(np.zeros(mat_g.shape[0])),
    )
    if "optimal" not in solution["status"]:
        raise ValueError(f"CVXOPT stopped with status {solution['status']}")
    return np.array(solution["x"]).reshape(size)


def nonnegative_qp(
    mat_p: np.ndarray,
    vec_q: np.ndarray,
    nonnegative: np.ndarray,
    solver: str = "quadprog",
) -> Tuple[np.ndarray, str]:
    """
    Solve the QP with sign constraints on part of the variables.

    :param mat_p: Quadratic term P (PSD).
    :param vec_q: Linear term q.
    :param nonnegative: Boolean mask of the variables constrained to be >= 0.
    :param solver: quadprog (falls back to cvxopt when it rejects P) or cvxopt.
    :return: The minimizer and the name of the solver that produced it.
    """
    if solver not in QP_SOLVERS:
        raise NotImplementedError(f"QP solver {solver} not implemented")
    mat_p = np.asarray(mat_p, dtype=float)
    vec_q = np.asarray(vec_q, dtype=float)
    nonnegative = np.asarray(nonnegative, dtype=bool)
    if mat_p.shape != (vec_q.shape[0], vec_q.shape[0]) or nonnegative.shape != vec_q.shape:
        raise ValueError(f"QP shapes do not match: P {mat_p.shape}, q {vec_q.shape}, mask {nonnegative.shape}")
    if solver == "quadprog":
        try:
            return _quadprog_nonnegative(mat_p, vec_q, nonnegative), "quadprog"
        except ValueError as e:
            logger.debug("quadprog failed (%s), falling back to cvxopt", e)
    return _cvxopt_nonnegative(mat_p, vec_q, nonnegative), "cvxopt"
