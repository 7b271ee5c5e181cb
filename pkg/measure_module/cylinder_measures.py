"""
Invariant measures given by cylinder masses
Periodic, Markov-on-subdiagram (including Parry), mixture and empirical measures,
plus the truncated weak* metric D_M
"""

import logging
import sys
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from diagram_module.markov_diagram import DPath, Diagram, is_irreducible, successors, transition_matrix
from entropy_module.perron import is_irreducible_matrix, perron_pair
from shared_utils.errors import (DepthInsufficient, DepthTooLarge, Inadmissible, InvalidParam,
                                 NoConvergence, NotIrreducible)
from shift_module.transformation import Word, validate_word

logger = logging.getLogger(__name__)

UNBOUNDED_DEPTH = sys.maxsize
WEIGHT_TOL = 1e-9


class CylinderMeasure(ABC):
    """Anything answering "mass of the cylinder [w]" up to max_depth"""

    k: int
    max_depth: int

    @abstractmethod
    def mass(self, word: Sequence[int]) -> float:
        ...

    def check_depth(self, m: int) -> None:
        if m > self.max_depth:
            raise DepthTooLarge(f"Depth {m} exceeds measure depth {self.max_depth}")

    def distribution(self, m: int) -> Dict[Word, float]:
        """Every length-m word of positive mass, by tree expansion"""
        self.check_depth(m)
        layer: Dict[Word, float] = {(): 1.0}
        for _ in range(m):
            nxt = {}
            for word in layer:
                for a in range(1, self.k + 1):
                    value = self.mass(word + (a,))
                    if value > 0:
                        nxt[word + (a,)] = value
            layer = nxt
        return layer


def _primitive(cycle: Word) -> Word:
    n = len(cycle)
    for p in range(1, n + 1):
        if n % p == 0 and cycle[:p] * (n // p) == cycle:
            return cycle[:p]
    return cycle


@dataclass(frozen=True)
class PeriodicMeasure(CylinderMeasure):
    """Uniform measure on the orbit of the periodic point cycle^infinity"""
    cycle: Word
    k: int
    max_depth: int = UNBOUNDED_DEPTH

    def __post_init__(self):
        if not self.cycle:
            raise InvalidParam("Cycle must be nonempty")
        validate_word(self.cycle, self.k)
        object.__setattr__(self, "cycle", _primitive(tuple(self.cycle)))

    @property
    def period(self) -> int:
        return len(self.cycle)

    def _window(self, start: int, length: int) -> Word:
        p = self.period
        return tuple(self.cycle[(start + j) % p] for j in range(length))

    def mass(self, word: Sequence[int]) -> float:
        word = tuple(word)
        if not word:
            return 1.0
        hits = sum(1 for i in range(self.period) if self._window(i, len(word)) == word)
        return hits / self.period

    def distribution(self, m: int) -> Dict[Word, float]:
        self.check_depth(m)
        counts = Counter(self._window(i, m) for i in range(self.period))
        return {w: c / self.period for w, c in counts.items()}


@dataclass(frozen=True, eq=False)
class MarkovMeasureOnF(CylinderMeasure):
    """
    Stationary Markov chain on diagram vertices, pushed to the shift by labels.

    P[i][j] > 0 only along arrows vertices[i] -> vertices[j].
    """
    vertices: Tuple[int, ...]
    labels: Tuple[int, ...]
    P: np.ndarray
    pi: np.ndarray
    k: int
    max_depth: int = UNBOUNDED_DEPTH

    def __post_init__(self):
        n = len(self.vertices)
        if len(self.labels) != n or self.P.shape != (n, n) or self.pi.shape != (n,):
            raise InvalidParam("Markov measure: vertices, labels, P and pi disagree in size")

    @property
    def F(self) -> Tuple[int, ...]:
        return self.vertices

    def _mask(self, a: int) -> np.ndarray:
        return np.array([1.0 if lab == a else 0.0 for lab in self.labels])

    def mass(self, word: Sequence[int]) -> float:
        return markov_cylinder_mass(self, word)

    def distribution(self, m: int) -> Dict[Word, float]:
        self.check_depth(m)
        if m <= 0:
            return {(): 1.0}
        masks = {a: self._mask(a) for a in sorted(set(self.labels))}
        layer = {}
        for a, mask in masks.items():
            vec = self.pi * mask
            if vec.sum() > 0:
                layer[(a,)] = vec
        for _ in range(m - 1):
            nxt = {}
            for word, vec in layer.items():
                pushed = vec @ self.P
                for a, mask in masks.items():
                    out = pushed * mask
                    if out.sum() > 0:
                        nxt[word + (a,)] = out
            layer = nxt
        return {w: float(v.sum()) for w, v in layer.items()}


@dataclass(frozen=True)
class MixtureMeasure(CylinderMeasure):
    """Convex combination sum a_i mu_i"""
    components: Tuple[Tuple[float, CylinderMeasure], ...]
    k: int = field(init=False)
    max_depth: int = field(init=False)

    def __post_init__(self):
        if not self.components:
            raise InvalidParam("Mixture needs at least one component")
        weights = [a for a, _ in self.components]
        if any(a < 0 for a in weights) or abs(sum(weights) - 1) > WEIGHT_TOL:
            raise InvalidParam(f"Mixture weights must be nonnegative and sum to 1, got {weights}")
        object.__setattr__(self, "components", tuple((float(a), mu) for a, mu in self.components))
        object.__setattr__(self, "k", max(mu.k for _, mu in self.components))
        object.__setattr__(self, "max_depth", min(mu.max_depth for _, mu in self.components))

    def mass(self, word: Sequence[int]) -> float:
        return sum(a * mu.mass(word) for a, mu in self.components)

    def distribution(self, m: int) -> Dict[Word, float]:
        self.check_depth(m)
        total: Dict[Word, float] = {}
        for a, mu in self.components:
            if a == 0:
                continue
            for w, value in mu.distribution(m).items():
                total[w] = total.get(w, 0.0) + a * value
        return total


@dataclass(frozen=True)
class EmpiricalMeasure(CylinderMeasure):
    """In-window subword frequencies of a finite word"""
    word: Word
    max_depth: int
    k: int

    def mass(self, u: Sequence[int]) -> float:
        u = tuple(u)
        if not u:
            return 1.0
        self.check_depth(len(u))
        windows = len(self.word) - len(u) + 1
        hits = sum(1 for i in range(windows) if self.word[i:i + len(u)] == u)
        return hits / windows

    def distribution(self, m: int) -> Dict[Word, float]:
        self.check_depth(m)
        windows = len(self.word) - m + 1
        counts = Counter(self.word[i:i + m] for i in range(windows))
        return {w: c / windows for w, c in counts.items()}


def as_mixture(mu: CylinderMeasure) -> MixtureMeasure:
    if isinstance(mu, MixtureMeasure):
        return mu
    return MixtureMeasure(((1.0, mu),))


def _walk_label(vid: int, a: int, diagram: Diagram) -> int:
    """Successor of vid carrying label a, distinguishing missing from not-yet-built"""
    for target in diagram.successors_of(vid):
        if diagram.label(target) == a:
            return target
    if diagram.is_expanded(vid):
        raise Inadmissible(f"{diagram.vertex(vid)} has no successor labelled {a}")
    if any(j == a for j, _ in successors(diagram.vertex(vid), diagram.params)):
        raise DepthInsufficient(
            f"Successor of {diagram.vertex(vid)} labelled {a} lies beyond depth {diagram.depth_built}")
    raise Inadmissible(f"{diagram.vertex(vid)} has no successor labelled {a}")


def closed_path(cycle: Sequence[int], diagram: Diagram) -> DPath:
    """
    Closed diagram path realizing cycle^r for the smallest r.

    Follows the labels from the base vertex [c_1]; the walk is deterministic
    because the successors of a vertex carry distinct labels.
    """
    cycle = tuple(cycle)
    if not cycle:
        raise InvalidParam("Cycle must be nonempty")
    validate_word(cycle, diagram.params.k)

    path: List[int] = []
    seen: Dict[int, int] = {}
    p = len(cycle)
    current = diagram.base(cycle[0])
    for i in range(p * (len(diagram) + 1)):
        if i % p == 0:
            if current in seen:
                return tuple(path[seen[current]:])
            seen[current] = i
        path.append(current)
        current = _walk_label(current, cycle[(i + 1) % p], diagram)
    raise Inadmissible(f"Cycle {cycle} does not close within the diagram")


def periodic_measure(cycle: Sequence[int], diagram: Diagram) -> PeriodicMeasure:
    closed_path(cycle, diagram)
    return PeriodicMeasure(tuple(cycle), diagram.params.k)


def periodic_chain(cycle: Sequence[int], diagram: Diagram) -> MarkovMeasureOnF:
    """Vertex chain reproducing the periodic measure along its closed path"""
    path = closed_path(cycle, diagram)
    states = tuple(sorted(set(path)))
    index = {v: i for i, v in enumerate(states)}
    counts = np.zeros((len(states), len(states)))
    for a, b in zip(path, path[1:] + path[:1]):
        counts[index[a], index[b]] += 1
    visits = counts.sum(axis=1)
    P = counts / visits[:, None]
    pi = visits / visits.sum()
    labels = tuple(diagram.label(v) for v in states)
    return MarkovMeasureOnF(states, labels, P, pi, diagram.params.k)


def stationary_distribution(P, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """
    Unique stationary row vector of an irreducible stochastic matrix.

    A least-squares solve gives the starting vector; power iteration on the
    lazy chain (I + P)/2 then drives the residual ||xP - x||_1 below tol.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise InvalidParam(f"Expected a nonempty square matrix, got shape {P.shape}")
    if (P < 0).any() or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
        raise InvalidParam("Matrix is not row-stochastic")
    if not is_irreducible_matrix(P):
        raise NotIrreducible("Transition matrix is not irreducible")

    n = P.shape[0]
    system = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    x = np.clip(np.linalg.lstsq(system, rhs, rcond=None)[0], 0.0, None)
    x = x / x.sum() if x.sum() > 0 else np.ones(n) / n

    lazy = 0.5 * (P + np.eye(n))
    for _ in range(max_iter + 1):
        if np.abs(x @ P - x).sum() < tol:
            return x
        x = x @ lazy
        x = x / x.sum()
    raise NoConvergence(f"Stationary vector did not reach residual {tol} in {max_iter} steps")


def parry_measure(F: Sequence[int], diagram: Diagram, tol: float = 1e-12,
                  max_iter: int = 100_000) -> MarkovMeasureOnF:
    """
    Maximal-entropy Markov measure on the subdiagram F.

    P[D][C] = M[D][C] v[C] / (lambda v[D]) with (lambda, v) the Perron pair of M.
    """
    F = diagram.check_ids(F)
    if not F or not is_irreducible(diagram, F):
        raise NotIrreducible(f"Subdiagram {list(F)} is not irreducible")
    M = transition_matrix(F, diagram).astype(float)
    lam, v = perron_pair(M, tol, max_iter)
    P = M * v[None, :] / (lam * v[:, None])
    P = P / P.sum(axis=1, keepdims=True)
    pi = stationary_distribution(P, tol, max_iter)
    labels = tuple(diagram.label(vid) for vid in F)
    logger.info(f"Parry measure on {len(F)} vertices: lambda={lam:.12f}")
    return MarkovMeasureOnF(F, labels, P, pi, diagram.params.k)


def markov_cylinder_mass(m: MarkovMeasureOnF, w: Sequence[int]) -> float:
    """Sum over label-consistent paths of pi[D_1] * prod P[D_i][D_i+1]"""
    w = tuple(w)
    if not w:
        return 1.0
    validate_word(w, m.k)
    vec = m.pi * m._mask(w[0])
    for a in w[1:]:
        vec = (vec @ m.P) * m._mask(a)
    return float(vec.sum())


def empirical_measure_of_word(w: Sequence[int], M: int, k: int = 0) -> EmpiricalMeasure:
    w = tuple(w)
    if M < 1:
        raise InvalidParam(f"Depth must be >= 1, got {M}")
    if M > len(w):
        raise DepthTooLarge(f"Depth {M} exceeds word length {len(w)}")
    return EmpiricalMeasure(w, M, k or max(w))


def weak_star_distance(mu: CylinderMeasure, nu: CylinderMeasure, M: int) -> float:
    """D_M = sum_{m<=M} 2^{-m-1} sum_{|w|=m} |mu[w] - nu[w]|"""
    if M < 1:
        raise InvalidParam(f"Depth must be >= 1, got {M}")
    total = 0.0
    for m in range(1, M + 1):
        left, right = mu.distribution(m), nu.distribution(m)
        gap = sum(abs(left.get(w, 0.0) - right.get(w, 0.0)) for w in set(left) | set(right))
        total += 2.0 ** (-m - 1) * gap
    return total


def distance_to_profile(profile: List[Dict[Word, float]], nu: CylinderMeasure) -> float:
    """D_M against precomputed distributions profile[m-1] of a fixed measure"""
    return profile_gap(profile, [nu.distribution(m) for m in range(1, len(profile) + 1)])


def profile_gap(profile: List[Dict[Word, float]], distributions: Sequence[Dict[Word, float]]) -> float:
    """D_M between two lists of per-depth distributions"""
    total = 0.0
    for m, (left, right) in enumerate(zip(profile, distributions), start=1):
        gap = sum(abs(left.get(w, 0.0) - right.get(w, 0.0)) for w in set(left) | set(right))
        total += 2.0 ** (-m - 1) * gap
    return total


def measure_profile(mu: CylinderMeasure, M: int) -> List[Dict[Word, float]]:
    return [mu.distribution(m) for m in range(1, M + 1)]
