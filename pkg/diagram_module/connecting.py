"""
Connecting times and paths through the [2] self-loop
"""

from typing import Dict, Iterable, Tuple

import networkx as nx

from diagram_module.markov_diagram import DPath, Diagram
from shared_utils.errors import DepthInsufficient, InvalidParam


def distances_to(target: int, diagram: Diagram) -> Dict[int, int]:
    """Arrow count of a shortest path from each vertex to target"""
    return nx.single_source_shortest_path_length(diagram.graph.reverse(copy=False), target)


def shortest_path(source: int, target: int, diagram: Diagram) -> DPath:
    """Shortest path source ... target; ties go to the smallest vertex id at each step"""
    diagram.check_ids((source, target))
    dist = distances_to(target, diagram)
    if source not in dist:
        raise DepthInsufficient(
            f"No path from {diagram.vertex(source)} to {diagram.vertex(target)} "
            f"within depth {diagram.depth_built}")
    path = [source]
    while path[-1] != target:
        here = dist[path[-1]]
        path.append(min(u for u in diagram.successors_of(path[-1]) if dist.get(u) == here - 1))
    return tuple(path)


def time_to_two(C: int, diagram: Diagram) -> int:
    """t1(C): vertex count of a shortest path C ... [2] (t1([2]) = 1)"""
    return len(shortest_path(C, diagram.two, diagram))


def time_from_two(D: int, diagram: Diagram) -> int:
    """t2(D): vertex count of a shortest path [2] ... D (t2([2]) = 1)"""
    return len(shortest_path(diagram.two, D, diagram))


def connecting_time(F: Iterable[int], F_prime: Iterable[int], diagram: Diagram) -> int:
    """t(F, F') = max of t1(C) + t2(D) over C in F, D in F'"""
    F, F_prime = tuple(F), tuple(F_prime)
    if not F or not F_prime:
        raise InvalidParam("Connecting time needs nonempty vertex sets")
    diagram.check_ids(F + F_prime)

    to_two = distances_to(diagram.two, diagram)
    from_two = nx.single_source_shortest_path_length(diagram.graph, diagram.two)
    missing = [v for v in F if v not in to_two] + [v for v in F_prime if v not in from_two]
    if missing:
        raise DepthInsufficient(
            f"[2] not connected to vertices {sorted(set(missing))} within depth {diagram.depth_built}")
    return max(to_two[C] + 1 for C in F) + max(from_two[D] + 1 for D in F_prime)


def connecting_path(C: int, D: int, t: int, diagram: Diagram) -> DPath:
    """
    Path C_0 ... C_{t+1} with C_0 = C and C_{t+1} = D.

    Shortest prefix to [2], then [2] repeated through its self-loop, then the
    shortest suffix from [2]; exactly t + 2 vertices.
    """
    head = shortest_path(C, diagram.two, diagram)
    tail = shortest_path(diagram.two, D, diagram)
    if t < len(head) + len(tail):
        raise InvalidParam(f"t={t} is below t1(C) + t2(D) = {len(head) + len(tail)}")
    padding = t + 2 - len(head) - len(tail)
    return head + (diagram.two,) * padding + tail


def connector_word(C: int, D: int, t: int, diagram: Diagram) -> Tuple[Tuple[int, ...], DPath]:
    """Interior of connecting_path(C, D, t): its labels and vertex ids"""
    path = connecting_path(C, D, t, diagram)
    interior = path[1:-1]
    return tuple(diagram.label(v) for v in interior), interior
