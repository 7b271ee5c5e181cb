"""
Gamma sets: words of a subdiagram whose empirical measure stays close to rho
Short lengths are enumerated. Long lengths use whichever certified construction holds
more words: concatenations of short blocks, or one whole window-type class of rho.
"""

import itertools
import logging
import math
import random
import weakref
from bisect import bisect_right
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx

from diagram_module.markov_diagram import DPath, Diagram, canonical_path, iter_words
from measure_module.cylinder_measures import (EmpiricalMeasure, MarkovMeasureOnF, distance_to_profile,
                                              measure_profile)
from shared_utils.errors import BudgetExceeded, CardinalityShortfall, InvalidParam
from shift_module.transformation import Word

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_LENGTH = 12
DEFAULT_ENUMERATION_BUDGET = 200_000
CYCLE_SEARCH_LIMIT = 64

Endpoints = Tuple[int, int]
State = Tuple[int, ...]
Edge = Tuple[int, ...]
Profile = List[Dict[Word, float]]

# rho -> {(M, block): [(word, distance), ...]}; distances do not depend on l or eps
_BLOCK_DISTANCES: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def crossing_correction(length: int, block: int, M: int) -> float:
    """sum_m 2^-m (r-1)(m-1)/(length-m+1): D_M mass carried by windows crossing block joins"""
    r = length // block
    return sum(2.0 ** -m * (r - 1) * (m - 1) / (length - m + 1) for m in range(1, M + 1))


def block_size(length: int, block_length: int) -> int:
    """Largest divisor of length not above block_length"""
    for b in range(min(length, block_length), 0, -1):
        if length % b == 0:
            return b
    return 1


def word_distance(word: Word, profile: Profile, k: int) -> float:
    return distance_to_profile(profile, EmpiricalMeasure(word, len(profile), k))


def _block_distances(rho: MarkovMeasureOnF, block: int, profile: Profile, diagram: Diagram,
                     budget: int, threads: int) -> List[Tuple[Word, float]]:
    per_rho = _BLOCK_DISTANCES.setdefault(rho, {})
    key = (len(profile), block)
    if key not in per_rho:
        candidates = list(iter_words(diagram, block, rho.vertices, limit=budget))
        k = diagram.params.k
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                distances = list(pool.map(lambda w: word_distance(w, profile, k), candidates))
        else:
            distances = [word_distance(w, profile, k) for w in candidates]
        per_rho[key] = list(zip(candidates, distances))
    return per_rho[key]


class BlockProduct:
    """
    Concatenations of r length-b blocks of X_F, each within margin of rho,
    joined along arrows of F between canonical block paths. With r = 1 this is
    the plain enumeration of Gamma. Words are ranked by block class
    (start vertex, end vertex), then block order.
    """

    def __init__(self, rho: MarkovMeasureOnF, l: int, block: int, eps: float, profile: Profile,
                 diagram: Diagram, enumeration_budget: int = DEFAULT_ENUMERATION_BUDGET, threads: int = 1):
        self.l = l
        self.block = block
        self.r = l // block
        self.diagram = diagram
        self.F = tuple(rho.vertices)
        M = len(profile)
        self.margin = eps - (crossing_correction(l, block, M) if self.r > 1 else 0.0)
        self.classes: Dict[Endpoints, List[Tuple[Word, DPath]]] = {}
        if self.margin >= 0:
            self.classes = self._filter_blocks(rho, profile, enumeration_budget, threads)

    def _filter_blocks(self, rho, profile, budget, threads) -> Dict[Endpoints, List[Tuple[Word, DPath]]]:
        classes: Dict[Endpoints, List[Tuple[Word, DPath]]] = defaultdict(list)
        for word, d in _block_distances(rho, self.block, profile, self.diagram, budget, threads):
            if d <= self.margin:
                path = canonical_path(word, self.F, self.diagram)
                classes[(path[0], path[-1])].append((word, path))
        return dict(sorted(classes.items()))

    def describe(self) -> str:
        return f"blocks of {self.block} x {self.r}"

    def _followers(self, v: int) -> List[Endpoints]:
        allowed = set(self.diagram.successors_of(v))
        return [key for key in self.classes if key[0] in allowed]

    @cached_property
    def completions(self) -> List[Dict[int, int]]:
        """completions[j][v]: number of j-block continuations after a block ending at v"""
        ends = {e for _, e in self.classes}
        table = [{v: 1 for v in ends}]
        for _ in range(1, self.r):
            prev = table[-1]
            table.append({v: sum(len(self.classes[key]) * prev[key[1]] for key in self._followers(v))
                          for v in ends})
        return table

    def _class_weights(self, classes: Sequence[Endpoints], remaining: int) -> List[int]:
        after = self.completions[remaining]
        return [len(self.classes[key]) * after[key[1]] for key in classes]

    @cached_property
    def count(self) -> int:
        return sum(self._class_weights(list(self.classes), self.r - 1))

    @cached_property
    def start_vertices(self) -> Tuple[int, ...]:
        weights = self._class_weights(list(self.classes), self.r - 1)
        return tuple(sorted({key[0] for key, w in zip(self.classes, weights) if w > 0}))

    def word_path(self, index: int) -> Tuple[Word, DPath]:
        word: List[int] = []
        path: List[int] = []
        options = list(self.classes)
        for remaining in range(self.r - 1, -1, -1):
            weights = self._class_weights(options, remaining)
            bounds = [0]
            for w in weights:
                bounds.append(bounds[-1] + w)
            slot = bisect_right(bounds, index) - 1
            key = options[slot]
            index -= bounds[slot]
            per_block = self.completions[remaining][key[1]]
            block_word, block_path = self.classes[key][index // per_block]
            index %= per_block
            word.extend(block_word)
            path.extend(block_path)
            options = self._followers(key[1])
        return tuple(word), tuple(path)

    @cached_property
    def _block_lookup(self) -> Dict[Word, Endpoints]:
        return {w: key for key, members in self.classes.items() for w, _ in members}

    def contains(self, word: Word) -> bool:
        lookup = self._block_lookup
        previous: Optional[int] = None
        for i in range(0, self.l, self.block):
            key = lookup.get(word[i:i + self.block])
            if key is None:
                return False
            if previous is not None and key[0] not in self.diagram.successors_of(previous):
                return False
            previous = key[1]
        return True

    def prefix_count(self, o: int) -> int:
        full, rest = divmod(o, self.block)
        sequences = self._class_weights(list(self.classes), full - 1) if full else [1]
        partial = len({w[:rest] for members in self.classes.values() for w, _ in members}) if rest else 1
        return sum(sequences) * partial


def window_flows(rho: MarkovMeasureOnF, q: int, total: int) -> Dict[Edge, float]:
    """total * rho(e) for every (q+1)-path e of positive rho-mass, in vertex indices"""
    n = len(rho.vertices)
    successors = [[j for j in range(n) if rho.P[i, j] > 0] for i in range(n)]
    flows: Dict[Edge, float] = {}
    stack = [((i,), float(rho.pi[i])) for i in range(n) if rho.pi[i] > 0]
    while stack:
        path, mass = stack.pop()
        if len(path) == q + 1:
            flows[path] = total * mass
            continue
        for j in successors[path[-1]]:
            stack.append((path + (j,), mass * float(rho.P[path[-1], j])))
    return dict(sorted(flows.items()))


def _ends(e: Edge) -> Tuple[State, State]:
    return e[:-1], e[1:]


def round_circulation(flows: Dict[Edge, float]) -> Dict[Edge, int]:
    """
    Integer circulation within one unit of flows on every edge.

    Floors first; the node imbalances are then repaired by a min-cost flow over
    the edges with a fractional part, preferring the larger fractions.
    """
    x = {e: math.floor(f) for e, f in flows.items()}
    excess: Dict[State, int] = defaultdict(int)
    repair = nx.DiGraph()
    for e, f in flows.items():
        source, target = _ends(e)
        if source == target:
            x[e] = round(f)
            continue
        excess[target] += x[e]
        excess[source] -= x[e]
        fraction = f - x[e]
        if fraction > 0:
            repair.add_edge(source, target, capacity=1, weight=round(1000 * (1 - 2 * fraction)), edge=e)
    for state, value in excess.items():
        if value:
            repair.add_node(state, demand=-value)
    if repair.number_of_nodes():
        flow = nx.min_cost_flow(repair)
        for source, target, data in repair.edges(data=True):
            x[data["edge"]] += flow[source][target]
    return x


def _support(x: Dict[Edge, int]) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_edges_from(_ends(e) for e, c in x.items() if c > 0)
    return graph


def _walk_edges(states: Sequence[State]) -> List[Edge]:
    return [a + (b[-1],) for a, b in zip(states, states[1:])]


def connect_support(x: Dict[Edge, int], flows: Dict[Edge, float]) -> Dict[Edge, int]:
    """
    Make the support of x strongly connected.

    The heaviest component stays. Every other one is joined to it by a closed
    walk of the full window graph, or dropped when that walk would carry more
    edges than the component itself.
    """
    x = dict(x)
    full = nx.DiGraph()
    full.add_edges_from(_ends(e) for e in flows)
    support = _support(x)
    throughput: Dict[State, int] = defaultdict(int)
    for e, c in x.items():
        throughput[e[:-1]] += c

    def weight(component) -> int:
        return sum(c for e, c in x.items() if c > 0 and e[:-1] in component)

    components = sorted(nx.strongly_connected_components(support), key=lambda comp: (-weight(comp), min(comp)))
    if not components:
        return x
    hub = max(sorted(components[0]), key=lambda s: throughput[s])
    for component in components[1:]:
        node = max(sorted(component), key=lambda s: throughput[s])
        loop = _walk_edges(nx.shortest_path(full, hub, node)) + _walk_edges(nx.shortest_path(full, node, hub))
        if weight(component) <= len(loop):
            for e in x:
                if e[:-1] in component:
                    x[e] = 0
        else:
            for e in loop:
                x[e] += 1
    return x


def _adjust_with_loops(x: Dict[Edge, int], flows: Dict[Edge, float], delta: int) -> int:
    states = set(_support(x).nodes)
    loops = [e for e in flows if e[:-1] == e[1:] and e[:-1] in states]
    while delta > 0 and loops:
        e = max(loops, key=lambda e: (flows[e] - x[e], e))
        x[e] += 1
        delta -= 1
    while delta < 0:
        spare = [e for e in loops if x[e] > 0]
        if not spare:
            break
        e = max(spare, key=lambda e: (x[e] - flows[e], e))
        x[e] -= 1
        delta += 1
    return delta


def _adjust_with_cycles(x: Dict[Edge, int], delta: int) -> int:
    cycles = [_walk_edges(c + [c[0]]) for c in itertools.islice(nx.simple_cycles(_support(x)), CYCLE_SEARCH_LIMIT)]
    if delta > 0:
        # fewest cycles summing exactly to delta
        best: List[Optional[List[int]]] = [[]] + [None] * delta
        for amount in range(1, delta + 1):
            for i, cycle in enumerate(cycles):
                rest = amount - len(cycle)
                if rest >= 0 and best[rest] is not None and (
                        best[amount] is None or len(best[rest]) + 1 < len(best[amount])):
                    best[amount] = best[rest] + [i]
        if best[delta] is None:
            return delta
        for i in best[delta]:
            for e in cycles[i]:
                x[e] += 1
        return 0
    while delta < 0:
        removable = [c for c in cycles if len(c) <= -delta and all(x[e] >= 2 for e in c)]
        if not removable:
            break
        cycle = max(removable, key=len)
        for e in cycle:
            x[e] -= 1
        delta += len(cycle)
    return delta


def integer_window_type(flows: Dict[Edge, float], total: int) -> Optional[Dict[Edge, int]]:
    """Strongly connected integer circulation of the given total close to flows, or None"""
    try:
        x = connect_support(round_circulation(flows), flows)
    except (nx.NetworkXUnfeasible, nx.NetworkXNoPath):
        return None
    delta = total - sum(x.values())
    delta = _adjust_with_loops(x, flows, delta)
    if delta:
        delta = _adjust_with_cycles(x, delta)
    if delta or not sum(x.values()) or not nx.is_strongly_connected(_support(x)):
        return None
    return {e: c for e, c in x.items() if c > 0}


def _unrank_multiset(counts: Sequence[Tuple[Edge, int]], index: int) -> List[Edge]:
    """index-th arrangement of the multiset, ranked by the order of counts"""
    remaining = [list(pair) for pair in counts]
    n = sum(c for _, c in remaining)
    arrangements = math.factorial(n)
    for _, c in remaining:
        arrangements //= math.factorial(c)
    order = []
    while n:
        for pair in remaining:
            if not pair[1]:
                continue
            block = arrangements * pair[1] // n
            if index < block:
                order.append(pair[0])
                arrangements = block
                pair[1] -= 1
                n -= 1
                break
            index -= block
    return order


class WindowTypeClass:
    """
    Closed walks of one fixed window type.

    States are (M-1)-paths of rho's vertices (single vertices when M = 1) and
    edges are the M-paths of positive rho-mass. The type x rounds
    (l - q) * rho(e) to a strongly connected integer circulation. The words are
    the walks from the root state back to itself using every edge e exactly x_e
    times and leaving every other state for the last time along its tree edge
    towards the root. They share all window frequencies up to length M, so one
    representative certifies the whole class, and the BEST theorem counts it.
    """

    def __init__(self, rho: MarkovMeasureOnF, l: int, eps: float, profile: Profile, diagram: Diagram):
        self.l = l
        self.eps = eps
        self.M = len(profile)
        self.q = max(self.M - 1, 1)
        self.vertices = tuple(rho.vertices)
        self.labels = tuple(rho.labels)
        self.flows = window_flows(rho, self.q, l - self.q)
        self.x = integer_window_type(self.flows, l - self.q) if l > self.q else None
        self.distance = math.inf
        if self.x is None:
            return
        self.root = max(sorted(self._out_degree), key=lambda s: self._out_degree[s])
        self.tree = self._tree_edges()
        self.exits = self._exit_counts()
        self.distance = word_distance(self._walk_word(self._walk(0)), profile, diagram.params.k)
        if self.distance > eps:
            logger.debug(f"Window type at l={l} sits at distance {self.distance:.4g} > {eps}")

    def describe(self) -> str:
        return f"window type over {len(self.exits)} states"

    @cached_property
    def _out_degree(self) -> Dict[State, int]:
        degree: Dict[State, int] = defaultdict(int)
        for e, c in self.x.items():
            degree[e[:-1]] += c
        return dict(degree)

    def _tree_edges(self) -> Dict[State, Edge]:
        """Last exit of every non-root state, along a shortest route to the root"""
        support = _support(self.x)
        depth = nx.single_source_shortest_path_length(support.reverse(copy=False), self.root)
        tree = {}
        for e in sorted(self.x):
            source, target = _ends(e)
            if source != self.root and depth[target] == depth[source] - 1 and source not in tree:
                tree[source] = e
        return tree

    def _exit_counts(self) -> Dict[State, List[Tuple[Edge, int]]]:
        """Free exits per state: the tree edge keeps one copy back for the last exit"""
        exits: Dict[State, List[Tuple[Edge, int]]] = defaultdict(list)
        for e, c in sorted(self.x.items()):
            exits[e[:-1]].append((e, c - (1 if self.tree.get(e[:-1]) == e else 0)))
        return dict(sorted(exits.items()))

    @cached_property
    def radix(self) -> List[Tuple[State, int]]:
        """Number of free exit orders per state"""
        radix = []
        for state, exits in self.exits.items():
            n = sum(c for _, c in exits)
            orders = math.factorial(n)
            for _, c in exits:
                orders //= math.factorial(c)
            radix.append((state, orders))
        return radix

    @cached_property
    def count(self) -> int:
        if self.x is None or self.distance > self.eps:
            return 0
        return math.prod(orders for _, orders in self.radix)

    def _walk(self, index: int) -> List[State]:
        sequences = {}
        for state, orders in self.radix:
            index, digit = divmod(index, orders)
            order = _unrank_multiset(self.exits[state], digit)
            if state in self.tree:
                order.append(self.tree[state])
            sequences[state] = iter(order)
        states = [self.root]
        for _ in range(self.l - self.q):
            states.append(next(sequences[states[-1]])[1:])
        return states

    def _walk_vertices(self, states: List[State]) -> DPath:
        indices = list(states[0]) + [s[-1] for s in states[1:]]
        return tuple(self.vertices[i] for i in indices)

    def _walk_word(self, states: List[State]) -> Word:
        indices = list(states[0]) + [s[-1] for s in states[1:]]
        return tuple(self.labels[i] for i in indices)

    @property
    def start_vertices(self) -> Tuple[int, ...]:
        return (self.vertices[self.root[0]],) if self.count else ()

    def word_path(self, index: int) -> Tuple[Word, DPath]:
        states = self._walk(index)
        path = self._walk_vertices(states)
        return self._walk_word(states), path

    @cached_property
    def _step(self) -> Dict[Tuple[int, int], int]:
        """(vertex index, next label) -> vertex index along edges of the type"""
        step = {}
        for e in self.x:
            for a, b in zip(e, e[1:]):
                step[(a, self.labels[b])] = b
        return step

    def contains(self, word: Word) -> bool:
        if tuple(self.labels[i] for i in self.root) != word[:self.q]:
            return False
        indices = list(self.root)
        for a in word[self.q:]:
            nxt = self._step.get((indices[-1], a))
            if nxt is None:
                return False
            indices.append(nxt)
        states = [tuple(indices[i:i + self.q]) for i in range(len(indices) - self.q + 1)]
        if states[-1] != self.root or Counter(_walk_edges(states)) != Counter(self.x):
            return False
        last_exit = {}
        for e in _walk_edges(states):
            last_exit[e[:-1]] = e
        return all(last_exit[s] == e for s, e in self.tree.items())

    @cached_property
    def _walk_counts(self) -> List[int]:
        """_walk_counts[s]: walks of s steps from the root inside the support"""
        support = _support(self.x)
        counts = [1]
        layer = {self.root: 1}
        for _ in range(self.l - self.q):
            nxt: Dict[State, int] = defaultdict(int)
            for state, c in layer.items():
                for target in support.successors(state):
                    nxt[target] += c
            layer = nxt
            counts.append(sum(layer.values()))
        return counts

    def prefix_count(self, o: int) -> int:
        if not self.count:
            return 0
        if o <= self.q:
            return 1
        return min(self.count, self._walk_counts[o - self.q])


Construction = Union[BlockProduct, WindowTypeClass]


@dataclass(eq=False)
class GammaSet:
    """
    Gamma_k for (rho, l, eps, M) as an implicit word set.

    For l <= block_length every word of X_F is tested directly. Otherwise two
    certified subsets of Gamma_k are built and the larger one kept:
    concatenations of certified length-b blocks (b the largest divisor of l not
    above block_length, each block within eps - crossing_correction of rho) and
    the window-type class of rho at length l. Either way every word is within
    eps of rho and count is a certified lower bound on #Gamma_k.
    """
    rho: MarkovMeasureOnF
    l: int
    eps: float
    M: int
    diagram: Diagram
    block_length: int = DEFAULT_BLOCK_LENGTH
    enumeration_budget: int = DEFAULT_ENUMERATION_BUDGET
    threads: int = 1
    construction: Construction = field(init=False, repr=False)

    def __post_init__(self):
        if self.l < self.M:
            raise InvalidParam(f"Word length {self.l} is below metric depth {self.M}")
        self.F = tuple(self.rho.vertices)
        profile = measure_profile(self.rho, self.M)
        if self.l <= self.block_length:
            options: List[Construction] = [BlockProduct(self.rho, self.l, self.l, self.eps, profile, self.diagram,
                                                        self.enumeration_budget, self.threads)]
        else:
            options = []
            block = block_size(self.l, self.block_length)
            if block >= self.M:
                options.append(BlockProduct(self.rho, self.l, block, self.eps, profile, self.diagram,
                                            self.enumeration_budget, self.threads))
            options.append(WindowTypeClass(self.rho, self.l, self.eps, profile, self.diagram))
        self.construction = max(options, key=lambda c: c.count)
        logger.info(f"Gamma set l={self.l} ({self.construction.describe()}): log count {self.log_count:.3f}")

    @property
    def kind(self) -> str:
        return "blocks" if isinstance(self.construction, BlockProduct) else "window type"

    @property
    def block(self) -> Optional[int]:
        return self.construction.block if isinstance(self.construction, BlockProduct) else None

    @property
    def r(self) -> Optional[int]:
        return self.construction.r if isinstance(self.construction, BlockProduct) else None

    @property
    def explicit(self) -> bool:
        return self.r == 1

    @property
    def count(self) -> int:
        return self.construction.count

    @property
    def log_count(self) -> float:
        return math.log(self.count) if self.count > 0 else -math.inf

    def meets_cardinality(self, h: float, eps: float) -> bool:
        """#Gamma >= exp(l (h - eps))"""
        return self.count > 0 and self.log_count >= self.l * (h - eps) - 1e-9

    @property
    def start_vertices(self) -> Tuple[int, ...]:
        return self.construction.start_vertices

    def word_path(self, index: int) -> Tuple[Word, DPath]:
        """Unrank: the index-th word and its realizing path inside F"""
        if not 0 <= index < self.count:
            raise InvalidParam(f"Index {index} outside Gamma set of size {self.count}")
        return self.construction.word_path(index)

    def word(self, index: int) -> Word:
        return self.word_path(index)[0]

    def sample(self, rng: random.Random) -> Word:
        """Uniform draw from the set"""
        return self.word(rng.randrange(self.count))

    def words(self) -> Iterator[Word]:
        if self.count > self.enumeration_budget:
            raise BudgetExceeded(f"Gamma set holds {self.count} words, budget {self.enumeration_budget}")
        for index in range(self.count):
            yield self.word(index)

    def contains(self, word: Sequence[int]) -> bool:
        word = tuple(word)
        return len(word) == self.l and self.count > 0 and self.construction.contains(word)

    def prefix_count(self, o: int) -> int:
        """Upper bound on the number of distinct length-o prefixes"""
        if o <= 0:
            return 1
        if o >= self.l:
            return self.count
        return self.construction.prefix_count(o)


def build_gamma(rho: MarkovMeasureOnF, l: int, eps: float, M: int, diagram: Diagram,
                h: Optional[float] = None, epsilon: Optional[float] = None, max_doublings: int = 0,
                block_length: int = DEFAULT_BLOCK_LENGTH,
                enumeration_budget: int = DEFAULT_ENUMERATION_BUDGET, threads: int = 1) -> GammaSet:
    """
    Gamma set of rho at length l.

    With h given, l doubles (at most max_doublings times) until
    #Gamma >= exp(l * (h - epsilon)); epsilon defaults to eps.
    """
    target_eps = eps if epsilon is None else epsilon
    for _ in range(max_doublings + 1):
        gamma = GammaSet(rho, l, eps, M, diagram, block_length, enumeration_budget, threads)
        if h is None or gamma.meets_cardinality(h, target_eps):
            return gamma
        logger.warning(f"Gamma at l={l} has log count {gamma.log_count:.3f} < {l * (h - target_eps):.3f}")
        l *= 2
    raise CardinalityShortfall(f"No Gamma length up to {l // 2} reaches exp(l * {h - target_eps:.4f}) words")
