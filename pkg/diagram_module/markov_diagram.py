"""
Hofbauer Markov Diagram
Interval-labelled vertices, successor rule, breadth-first build to a finite depth,
and the symbolic read-off of diagram paths (languages, transition matrices)
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from shared_utils.errors import (BudgetExceeded, DepthInsufficient, InvalidParam,
                                 VertexBudgetExceeded)
from shared_utils.helpers import format_value
from shift_module.params import Params
from shift_module.transformation import OpenInterval, Word, branch_image, partition

logger = logging.getLogger(__name__)

DEFAULT_VERTEX_BUDGET = 1_000_000

DPath = Tuple[int, ...]


@dataclass(frozen=True)
class Vertex:
    id: int
    label: int
    interval: OpenInterval
    depth: int

    @property
    def is_base(self) -> bool:
        return self.depth == 0

    def __str__(self) -> str:
        if self.is_base:
            return f"[{self.label}]"
        return f"({self.interval}, {self.label})"


@dataclass(frozen=True)
class Diagram:
    """D_n: vertices, arrows among them, and the depth up to which arrows are complete"""
    params: Params
    vertices: Tuple[Vertex, ...]
    arrows: Dict[int, Tuple[int, ...]]
    base_ids: Tuple[int, ...]
    depth_built: int

    def vertex(self, vid: int) -> Vertex:
        return self.vertices[vid]

    def label(self, vid: int) -> int:
        return self.vertices[vid].label

    def successors_of(self, vid: int) -> Tuple[int, ...]:
        return self.arrows.get(vid, ())

    def base(self, j: int) -> int:
        """Vertex id of the base vertex [j]"""
        if not 1 <= j <= self.params.k:
            raise InvalidParam(f"No base vertex [{j}] for k={self.params.k}")
        return self.base_ids[j - 1]

    @property
    def two(self) -> int:
        return self.base(2)

    def is_expanded(self, vid: int) -> bool:
        """All successors of an expanded vertex are present"""
        return self.vertices[vid].depth < self.depth_built

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(v.id for v in self.vertices)
        for source, targets in self.arrows.items():
            g.add_edges_from((source, t) for t in targets)
        return g

    def check_ids(self, ids: Iterable[int]) -> Tuple[int, ...]:
        ids = tuple(ids)
        for vid in ids:
            if not 0 <= vid < len(self.vertices):
                raise InvalidParam(f"Unknown vertex id {vid}")
        return ids

    def __len__(self) -> int:
        return len(self.vertices)


class _VertexIndex:
    """Lookup of (label, interval) up to exact or tolerant endpoint equality"""

    BUCKET = 1e-6

    def __init__(self, params: Params):
        self.params = params
        self.table: Dict[tuple, List[Tuple[OpenInterval, int]]] = {}

    def _key(self, label: int, lo) -> tuple:
        if self.params.exact:
            return (label, lo)
        return (label, math.floor(lo / self.BUCKET))

    def find(self, label: int, interval: OpenInterval) -> Optional[int]:
        if self.params.exact:
            for stored, vid in self.table.get(self._key(label, interval.lo), []):
                if stored.hi == interval.hi:
                    return vid
            return None
        _, bucket = self._key(label, interval.lo)
        for b in (bucket - 1, bucket, bucket + 1):
            for stored, vid in self.table.get((label, b), []):
                if self.params.same(stored.lo, interval.lo) and self.params.same(stored.hi, interval.hi):
                    return vid
        return None

    def add(self, vertex: Vertex) -> None:
        key = self._key(vertex.label, vertex.interval.lo)
        self.table.setdefault(key, []).append((vertex.interval, vertex.id))


def successors(vertex: Vertex, params: Params) -> List[Tuple[int, OpenInterval]]:
    """
    Candidate successors [j] ∩ T(D), ordered by label.

    The image is taken through the affine branch of the vertex label, so the
    open interval is tracked one-sidedly. A candidate equal to I_j comes back
    as I_j itself (identified with the base vertex [j] by the builder).
    """
    a, b = branch_image(vertex.interval.lo, vertex.interval.hi, vertex.label, params)
    result = []
    for j, part in enumerate(partition(params), start=1):
        lo = part.lo if not params.less(part.lo, a) else a
        hi = part.hi if not params.less(b, part.hi) else b
        if not params.less(lo, hi):
            continue
        result.append((j, OpenInterval(params.num(lo), params.num(hi))))
    return result


def build_diagram(params: Params, n: int, vertex_budget: int = DEFAULT_VERTEX_BUDGET) -> Diagram:
    """
    Build D_n breadth-first with deterministic ids.

    Args:
        params: Map parameters
        n: Depth (D_0 holds the k base vertices)
        vertex_budget: Cap on the number of vertices

    Returns:
        Diagram: D_n with every arrow among its vertices
    """
    if n < 0:
        raise InvalidParam(f"Depth must be >= 0, got {n}")

    parts = partition(params)
    vertices: List[Vertex] = [Vertex(j - 1, j, parts[j - 1], 0) for j in range(1, params.k + 1)]
    if len(vertices) > vertex_budget:
        raise VertexBudgetExceeded(f"{len(vertices)} base vertices exceed budget {vertex_budget}")
    index = _VertexIndex(params)
    for v in vertices:
        index.add(v)

    arrows: Dict[int, Tuple[int, ...]] = {}
    frontier = [v.id for v in vertices]
    for depth in range(1, n + 1):
        next_frontier = []
        for vid in frontier:
            targets = []
            for j, interval in successors(vertices[vid], params):
                found = index.find(j, interval)
                if found is None:
                    if len(vertices) >= vertex_budget:
                        raise VertexBudgetExceeded(
                            f"Vertex budget {vertex_budget} exhausted at depth {depth}")
                    new = Vertex(len(vertices), j, interval, depth)
                    vertices.append(new)
                    index.add(new)
                    next_frontier.append(new.id)
                    found = new.id
                targets.append(found)
            arrows[vid] = tuple(targets)
        frontier = next_frontier

    # frontier arrows: only those landing inside D_n
    for vid in frontier:
        targets = []
        for j, interval in successors(vertices[vid], params):
            found = index.find(j, interval)
            if found is not None:
                targets.append(found)
        arrows[vid] = tuple(targets)

    diagram = Diagram(params=params, vertices=tuple(vertices), arrows=arrows,
                      base_ids=tuple(range(params.k)), depth_built=n)
    logger.info(f"Built diagram to depth {n}: {len(vertices)} vertices ({params.describe()})")
    _warn_outside_main_component(diagram)
    return diagram


def main_component(diagram: Diagram) -> Tuple[int, ...]:
    """Ids of the strongly connected component holding [2]"""
    for scc in nx.strongly_connected_components(diagram.graph):
        if diagram.two in scc:
            return tuple(sorted(scc))
    return (diagram.two,)


def _warn_outside_main_component(diagram: Diagram) -> None:
    main = set(main_component(diagram))
    outside = [v.id for v in diagram.vertices if diagram.is_expanded(v.id) and v.id not in main]
    if outside:
        logger.warning(f"Diagram not irreducible at depth {diagram.depth_built}: "
                       f"expanded vertices {outside} lie outside the component of [2]")


def has_self_loop_two(diagram: Diagram) -> bool:
    return diagram.two in diagram.successors_of(diagram.two)


def is_irreducible(diagram: Diagram, vertex_subset: Iterable[int]) -> bool:
    """Strong connectivity of the induced subgraph (a singleton needs its self-loop)"""
    subset = set(diagram.check_ids(vertex_subset))
    if not subset:
        raise InvalidParam("Vertex subset must be nonempty")
    sub = diagram.graph.subgraph(subset)
    if len(subset) == 1:
        (only,) = subset
        return sub.has_edge(only, only)
    return nx.is_strongly_connected(sub)


def transition_matrix(F: Sequence[int], diagram: Diagram) -> np.ndarray:
    """M[D][C] = 1 iff D -> C, rows and columns in the order of F"""
    F = diagram.check_ids(F)
    position = {vid: i for i, vid in enumerate(F)}
    M = np.zeros((len(F), len(F)), dtype=int)
    for i, vid in enumerate(F):
        for target in diagram.successors_of(vid):
            if target in position:
                M[i, position[target]] = 1
    return M


def is_path(path: Sequence[int], diagram: Diagram) -> bool:
    diagram.check_ids(path)
    return all(b in diagram.successors_of(a) for a, b in zip(path, path[1:]))


def psi_project(path: Sequence[int], diagram: Diagram) -> Word:
    return tuple(diagram.label(vid) for vid in path)


def _require_depth(diagram: Diagram, n: int) -> None:
    if n < 1:
        raise InvalidParam(f"Word length must be >= 1, got {n}")
    if diagram.depth_built < n:
        raise DepthInsufficient(f"Diagram built to depth {diagram.depth_built}, need {n}")


def _start_sets(diagram: Diagram, F: Optional[Iterable[int]]) -> Tuple[FrozenSet[int], List[FrozenSet[int]]]:
    """Allowed vertices and, per first symbol, the set of possible start vertices"""
    if F is None:
        allowed = frozenset(v.id for v in diagram.vertices)
        starts = [frozenset([b]) for b in diagram.base_ids]
        return allowed, starts
    allowed = frozenset(diagram.check_ids(F))
    by_label: Dict[int, Set[int]] = {}
    for vid in sorted(allowed):
        by_label.setdefault(diagram.label(vid), set()).add(vid)
    return allowed, [frozenset(by_label[a]) for a in sorted(by_label)]


def _step(state: FrozenSet[int], diagram: Diagram, allowed: FrozenSet[int]) -> Dict[int, FrozenSet[int]]:
    """Word-level transition: next symbol -> set of vertices still realizing the word"""
    nxt: Dict[int, Set[int]] = {}
    for vid in state:
        for target in diagram.successors_of(vid):
            if target in allowed:
                nxt.setdefault(diagram.label(target), set()).add(target)
    return {a: frozenset(s) for a, s in nxt.items()}


def iter_words(diagram: Diagram, n: int, F: Optional[Iterable[int]] = None,
               limit: Optional[int] = None) -> Iterator[Word]:
    """
    Distinct labels of length-n paths, in lexicographic word order.

    With F the paths stay inside F (the language of X_F); otherwise the whole
    diagram is used and paths start at base vertices, which already realize
    every word.
    """
    allowed, starts = _start_sets(diagram, F)
    produced = 0
    stack = [((diagram.label(next(iter(s))),), s) for s in reversed(starts)]
    while stack:
        word, state = stack.pop()
        if len(word) == n:
            produced += 1
            if limit is not None and produced > limit:
                raise BudgetExceeded(f"More than {limit} words of length {n}")
            yield word
            continue
        for a, nxt in sorted(_step(state, diagram, allowed).items(), reverse=True):
            stack.append((word + (a,), nxt))


def language(diagram: Diagram, n: int, limit: Optional[int] = None) -> Set[Word]:
    """L_n read off the diagram"""
    _require_depth(diagram, n)
    return set(iter_words(diagram, n, limit=limit))


def language_counts(diagram: Diagram, n: int, F: Optional[Iterable[int]] = None) -> int:
    """#L_n (or #L_n(X_F)) by counting over word-level states"""
    if F is None:
        _require_depth(diagram, n)
    elif n < 1:
        raise InvalidParam(f"Word length must be >= 1, got {n}")
    allowed, starts = _start_sets(diagram, F)
    counts: Dict[FrozenSet[int], int] = {}
    for s in starts:
        counts[s] = counts.get(s, 0) + 1
    for _ in range(n - 1):
        nxt_counts: Dict[FrozenSet[int], int] = {}
        for state, c in counts.items():
            for nxt in _step(state, diagram, allowed).values():
                nxt_counts[nxt] = nxt_counts.get(nxt, 0) + c
        counts = nxt_counts
    return sum(counts.values())


def canonical_path(word: Sequence[int], F: Iterable[int], diagram: Diagram) -> Optional[DPath]:
    """Lexicographically smallest vertex-id path inside F realizing word"""
    allowed = set(diagram.check_ids(F))
    if not word:
        return ()
    # feasible[i]: vertices from which word[i:] can be read inside F
    feasible: List[Set[int]] = [set() for _ in word]
    feasible[-1] = {v for v in allowed if diagram.label(v) == word[-1]}
    for i in range(len(word) - 2, -1, -1):
        feasible[i] = {v for v in allowed if diagram.label(v) == word[i]
                       and any(t in feasible[i + 1] for t in diagram.successors_of(v))}
    if not feasible[0]:
        return None
    path = [min(feasible[0])]
    for i in range(1, len(word)):
        path.append(min(t for t in diagram.successors_of(path[-1]) if t in feasible[i]))
    return tuple(path)


def export_diagram(diagram: Diagram) -> str:
    """One line per vertex: `id label lo hi depth succ:id,id,...`"""
    lines = []
    for v in diagram.vertices:
        succ = ",".join(str(t) for t in diagram.successors_of(v.id))
        lines.append(f"{v.id} {v.label} {format_value(v.interval.lo)} "
                     f"{format_value(v.interval.hi)} {v.depth} succ:{succ}")
    return "\n".join(lines) + "\n"
