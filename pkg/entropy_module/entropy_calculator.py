"""
Entropy Calculator
Block entropy, Markov entropy rates, spectral-radius and language-growth entropy
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr

from diagram_module.markov_diagram import Diagram, language_counts, main_component, transition_matrix
from entropy_module.perron import perron_pair, spectral_radius
from measure_module.cylinder_measures import (CylinderMeasure, EmpiricalMeasure, MarkovMeasureOnF,
                                              MixtureMeasure, PeriodicMeasure)
from shared_utils.errors import InvalidParam

logger = logging.getLogger(__name__)

ENTROPY_COLUMNS = ["quantity", "n_or_k", "value", "lower", "upper", "method"]

__all__ = [
    "ENTROPY_COLUMNS", "block_entropy", "markov_entropy_rate", "measure_entropy",
    "spectral_radius", "perron_pair", "topological_entropy", "language_growth_entropy",
    "entropy_rows",
]


def block_entropy(mu: CylinderMeasure, n: int) -> float:
    """(1/n) sum over |w| = n of -mu[w] log mu[w], natural log"""
    if n < 1:
        raise InvalidParam(f"Block length must be >= 1, got {n}")
    masses = np.fromiter(mu.distribution(n).values(), dtype=float)
    return float(entr(masses).sum()) / n


def markov_entropy_rate(m: MarkovMeasureOnF) -> float:
    """-sum_i pi_i sum_j P_ij log P_ij"""
    return float(np.dot(m.pi, entr(m.P).sum(axis=1)))


def measure_entropy(mu: CylinderMeasure) -> float:
    """Exact entropy of a measure of the computable class"""
    if isinstance(mu, PeriodicMeasure):
        return 0.0
    if isinstance(mu, MarkovMeasureOnF):
        return markov_entropy_rate(mu)
    if isinstance(mu, MixtureMeasure):
        return sum(a * measure_entropy(nu) for a, nu in mu.components if a > 0)
    if isinstance(mu, EmpiricalMeasure):
        raise InvalidParam("Empirical measures have no exact entropy; use block_entropy")
    raise InvalidParam(f"No exact entropy for {type(mu).__name__}")


def topological_entropy(F: Sequence[int], diagram: Diagram, tol: float = 1e-12,
                        max_iter: int = 100_000) -> float:
    """log of the Perron root of the subdiagram F"""
    return math.log(spectral_radius(transition_matrix(F, diagram), tol, max_iter))


def language_growth_entropy(diagram: Diagram, n_max: int,
                            F: Optional[Sequence[int]] = None) -> List[Tuple[int, float]]:
    """(n, (1/n) log #L_n) for n = 1..n_max"""
    rows = []
    for n in range(1, n_max + 1):
        count = language_counts(diagram, n, F)
        rows.append((n, math.log(count) / n))
    logger.info(f"Language growth through n={n_max}: {rows[-1][1]:.6f}")
    return rows


def entropy_rows(diagram: Diagram, n_max: int, mu: Optional[CylinderMeasure] = None,
                 block_n: int = 8, tol: float = 1e-12, max_iter: int = 100_000) -> List[Dict]:
    """
    Report rows in the entropy CSV schema.

    Growth entropy for every n, the spectral entropy of the built diagram's main
    transition matrix, log beta for reference and, when a measure is given, its
    exact entropy next to block entropies up to block_n.
    """
    rows = []
    for n, value in language_growth_entropy(diagram, n_max):
        rows.append(_row("growth", n, value, method="log #L_n / n"))
    component = main_component(diagram)
    spectral = topological_entropy(component, diagram, tol, max_iter)
    rows.append(_row("spectral", diagram.depth_built, spectral, method="log Perron root of main component"))
    rows.append(_row("log_beta", 0, math.log(float(diagram.params.beta)), method="reference"))
    if mu is not None:
        rows.append(_row("measure", 0, measure_entropy(mu), method="exact"))
        for n in range(1, block_n + 1):
            rows.append(_row("block", n, block_entropy(mu, n), method="block entropy"))
    return rows


def _row(quantity: str, n: int, value: float, lower: Optional[float] = None,
         upper: Optional[float] = None, method: str = "") -> Dict:
    return {
        "quantity": quantity,
        "n_or_k": n,
        "value": value,
        "lower": value if lower is None else lower,
        "upper": value if upper is None else upper,
        "method": method,
    }
