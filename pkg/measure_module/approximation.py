"""
Ergodic approximation of mixtures by a single switching Markov chain
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from diagram_module.connecting import shortest_path
from diagram_module.markov_diagram import DPath, Diagram
from entropy_module.entropy_calculator import markov_entropy_rate, measure_entropy
from entropy_module.perron import is_irreducible_matrix
from measure_module.cylinder_measures import (CylinderMeasure, MarkovMeasureOnF, PeriodicMeasure,
                                              as_mixture, distance_to_profile, measure_profile,
                                              periodic_chain, stationary_distribution)
from shared_utils.errors import DepthInsufficient, InvalidParam, NotIrreducible, TargetUnreachable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ApproximationReport:
    """Outcome of one switching rate: closeness in D_M and in entropy"""
    delta: float
    distance: float
    entropy_mu: float
    entropy_rho: float
    accepted: bool
    switching: bool
    vertex_count: int
    sweep: Tuple[Tuple[float, float, float], ...] = field(default=())

    @property
    def entropy_gap(self) -> float:
        return abs(self.entropy_mu - self.entropy_rho)

    def to_dict(self) -> Dict[str, float]:
        return {
            "delta": self.delta,
            "distance": self.distance,
            "entropy_mu": self.entropy_mu,
            "entropy_rho": self.entropy_rho,
            "entropy_gap": self.entropy_gap,
            "accepted": self.accepted,
            "switching": self.switching,
            "vertices": self.vertex_count,
        }


def component_chain(mu: CylinderMeasure, diagram: Diagram) -> MarkovMeasureOnF:
    """Vertex chain of a mixture component"""
    if isinstance(mu, MarkovMeasureOnF):
        return mu
    if isinstance(mu, PeriodicMeasure):
        return periodic_chain(mu.cycle, diagram)
    raise InvalidParam(f"Cannot approximate component of type {type(mu).__name__}")


@dataclass
class _SwitchPlan:
    """Delta-independent part of the switching chain"""
    vertices: Tuple[int, ...]
    base_flow: np.ndarray
    exit_mass: Dict[int, float]
    routes: List[DPath]

    @property
    def switching(self) -> bool:
        return bool(self.routes)


def _closest_route(source: Sequence[int], target: Sequence[int], diagram: Diagram) -> DPath:
    best: Optional[Tuple[int, int, int]] = None
    for e in sorted(source):
        lengths = nx.single_source_shortest_path_length(diagram.graph, e)
        for s in sorted(target):
            if s in lengths and (best is None or (lengths[s], e, s) < best):
                best = (lengths[s], e, s)
    if best is None:
        raise DepthInsufficient(
            f"No diagram path joins supports {sorted(source)} and {sorted(target)} "
            f"within depth {diagram.depth_built}")
    return shortest_path(best[1], best[2], diagram)


def _plan(chains: List[MarkovMeasureOnF], weights: List[float], diagram: Diagram) -> _SwitchPlan:
    supports = [frozenset(c.vertices[i] for i in range(len(c.vertices)) if c.pi[i] > 0) for c in chains]
    routes = []
    for i, src in enumerate(supports):
        for j, dst in enumerate(supports):
            if i != j and src.isdisjoint(dst):
                routes.append(_closest_route(src, dst, diagram))

    vertices = set().union(*supports)
    for route in routes:
        vertices.update(route)
    vertices = tuple(sorted(vertices))
    index = {v: n for n, v in enumerate(vertices)}

    # flow(v, u) = sum_i a_i nu_i(v) P_i(v, u), whose row-normalization has stationary vector sum a_i nu_i
    flow = np.zeros((len(vertices), len(vertices)))
    for a, chain in zip(weights, chains):
        if a == 0:
            continue
        local = [index[v] for v in chain.vertices]
        flow[np.ix_(local, local)] += a * chain.pi[:, None] * chain.P

    exit_mass = {route[0]: float(flow[index[route[0]]].sum()) for route in routes}
    return _SwitchPlan(vertices, flow, exit_mass, routes)


def switching_chain(plan: _SwitchPlan, delta: float, diagram: Diagram) -> MarkovMeasureOnF:
    """Row-normalized flows: base kernel, with exits diverting delta of their mass along routes"""
    index = {v: n for n, v in enumerate(plan.vertices)}
    flow = plan.base_flow.copy()
    exits: Dict[int, int] = {}
    for route in plan.routes:
        exits[route[0]] = exits.get(route[0], 0) + 1
    for e in exits:
        flow[index[e]] *= 1.0 - delta
    for route in plan.routes:
        share = delta * plan.exit_mass[route[0]] / exits[route[0]]
        for a, b in zip(route, route[1:]):
            flow[index[a], index[b]] += share

    totals = flow.sum(axis=1)
    if (totals <= 0).any():
        raise NotIrreducible("Switching chain has a vertex without outgoing mass")
    P = flow / totals[:, None]
    if not is_irreducible_matrix(P):
        raise NotIrreducible("Switching chain is not irreducible")
    pi = stationary_distribution(P)
    labels = tuple(diagram.label(v) for v in plan.vertices)
    return MarkovMeasureOnF(plan.vertices, labels, P, pi, diagram.params.k)


def _evaluate(rho: MarkovMeasureOnF, profile, h_mu: float, delta: float, epsilon: float,
              lower_entropy_only: bool, plan: _SwitchPlan) -> ApproximationReport:
    distance = distance_to_profile(profile, rho)
    h_rho = markov_entropy_rate(rho)
    entropy_ok = h_rho >= h_mu - epsilon if lower_entropy_only else abs(h_mu - h_rho) <= epsilon
    return ApproximationReport(delta, distance, h_mu, h_rho, distance <= epsilon and entropy_ok,
                               plan.switching, len(plan.vertices))


def _prepare(mu: CylinderMeasure, diagram: Diagram):
    mixture = as_mixture(mu)
    pairs = [(a, component_chain(nu, diagram)) for a, nu in mixture.components if a > 0]
    weights = [a for a, _ in pairs]
    chains = [c for _, c in pairs]
    return mixture, chains, weights


def ergodic_approximation(mu: CylinderMeasure, epsilon: float, delta: float, M: int,
                          diagram: Diagram, max_halvings: int = 10,
                          lower_entropy_only: bool = False
                          ) -> Tuple[Tuple[int, ...], MarkovMeasureOnF, ApproximationReport]:
    """
    Ergodic Markov measure rho on a finite subdiagram F close to mu.

    Halves delta until D_M(mu, rho) <= epsilon and the entropy condition holds.

    Args:
        mu: Mixture of Markov and periodic measures (or a single one)
        epsilon: Target for the distance and the entropy gap
        delta: Initial per-visit switching probability
        M: Metric depth
        diagram: Diagram supplying the connecting routes
        max_halvings: Sweep length before giving up
        lower_entropy_only: Require only h(rho) >= h(mu) - epsilon

    Returns:
        (F, rho, report)
    """
    if epsilon <= 0 or not 0 < delta < 1:
        raise InvalidParam(f"Need epsilon > 0 and 0 < delta < 1, got {epsilon}, {delta}")
    mixture, chains, weights = _prepare(mu, diagram)
    h_mu = measure_entropy(mixture)
    profile = measure_profile(mixture, M)

    if len(chains) == 1:
        rho = chains[0]
        plan = _SwitchPlan(rho.vertices, np.zeros(0), {}, [])
        report = _evaluate(rho, profile, h_mu, delta, epsilon, lower_entropy_only, plan)
        if not report.accepted:
            raise TargetUnreachable(f"Single component misses the target: {report.to_dict()}")
        return rho.vertices, rho, report

    plan = _plan(chains, weights, diagram)
    sweep = []
    for _ in range(max_halvings + 1):
        rho = switching_chain(plan, delta, diagram)
        report = _evaluate(rho, profile, h_mu, delta, epsilon, lower_entropy_only, plan)
        sweep.append((delta, report.distance, report.entropy_gap))
        logger.info(f"Approximation delta={delta:.6g}: distance={report.distance:.6g}, "
                    f"entropy gap={report.entropy_gap:.6g}")
        if report.accepted:
            return plan.vertices, rho, replace(report, sweep=tuple(sweep))
        if not plan.switching:
            break
        delta /= 2
    raise TargetUnreachable(
        f"No switching rate down to delta={delta:.3g} brings the chain within epsilon={epsilon}")


def delta_sweep(mu: CylinderMeasure, delta: float, halvings: int, M: int,
                diagram: Diagram) -> List[ApproximationReport]:
    """Reports for delta, delta/2, ..., delta/2^halvings (acceptance judged against epsilon = 1)"""
    mixture, chains, weights = _prepare(mu, diagram)
    h_mu = measure_entropy(mixture)
    profile = measure_profile(mixture, M)
    plan = _plan(chains, weights, diagram)
    reports = []
    for step in range(halvings + 1):
        rho = switching_chain(plan, delta / 2 ** step, diagram)
        reports.append(_evaluate(rho, profile, h_mu, delta / 2 ** step, 1.0, False, plan))
    return reports
