"""
Perron root and vector by power iteration
"""

import logging
from typing import Tuple

import networkx as nx
import numpy as np

from shared_utils.errors import InvalidParam, NoConvergence, NotIrreducible

logger = logging.getLogger(__name__)


def is_irreducible_matrix(M: np.ndarray) -> bool:
    """Strong connectivity of the support graph; a 1x1 matrix needs a positive entry"""
    M = np.asarray(M)
    if M.shape == (1, 1):
        return bool(M[0, 0] > 0)
    graph = nx.from_numpy_array((M > 0).astype(int), create_using=nx.DiGraph)
    return nx.is_strongly_connected(graph)


def perron_pair(M, tol: float = 1e-12, max_iter: int = 100_000) -> Tuple[float, np.ndarray]:
    """
    Perron root and positive right eigenvector of an irreducible nonnegative matrix.

    Iterates on M + I, which has the same Perron vector and is aperiodic, so
    periodic graphs converge too. Stops on the relative residual
    ||Mx - lambda x|| / (lambda ||x||).

    Args:
        M: Square nonnegative matrix
        tol: Relative residual target
        max_iter: Iteration cap

    Returns:
        (lambda, v) with v normalized to sum 1
    """
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidParam(f"Expected a nonempty square matrix, got shape {A.shape}")
    if (A < 0).any():
        raise InvalidParam("Matrix has negative entries")
    if not is_irreducible_matrix(A):
        raise NotIrreducible("Matrix is not irreducible")

    shifted = A + np.eye(A.shape[0])
    x = np.ones(A.shape[0]) / A.shape[0]
    for iteration in range(1, max_iter + 1):
        y = shifted @ x
        x = y / y.sum()
        Ax = A @ x
        lam = float(Ax.sum() / x.sum())
        residual = np.linalg.norm(Ax - lam * x) / (lam * np.linalg.norm(x)) if lam > 0 else np.inf
        if residual < tol:
            logger.debug(f"Power iteration converged in {iteration} steps (lambda={lam})")
            return lam, x
    raise NoConvergence(f"Power iteration did not reach residual {tol} in {max_iter} steps")


def spectral_radius(M, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Perron root of an irreducible nonnegative matrix"""
    return perron_pair(M, tol, max_iter)[0]
