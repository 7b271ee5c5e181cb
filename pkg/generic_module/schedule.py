"""
Schedules for the generic-set construction
Outer blocks (eps_j, F_j, mu_j, l_j, L_j, Gamma_j) and their inner expansion (l'_k, F'_k, Gamma'_k, t_k, n_k)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from diagram_module.connecting import connecting_time
from diagram_module.markov_diagram import Diagram
from entropy_module.entropy_calculator import markov_entropy_rate, measure_entropy
from generic_module.gamma import GammaSet, build_gamma
from measure_module.approximation import ApproximationReport, ergodic_approximation
from measure_module.cylinder_measures import CylinderMeasure, MarkovMeasureOnF
from shared_utils.errors import CardinalityShortfall, InvalidParam, TargetUnreachable

logger = logging.getLogger(__name__)

RATIO_SLACK = 1e-12


@dataclass(frozen=True)
class ScheduleSettings:
    """Budgets of the schedule search"""
    delta: float = 0.01
    max_halvings: int = 10
    block_length: int = 12
    enumeration_budget: int = 200_000
    min_block_length: int = 24
    max_doublings: int = 8
    threads: int = 1

    @classmethod
    def from_config(cls, config) -> "ScheduleSettings":
        return cls(delta=config.delta, max_halvings=config.max_halvings,
                   block_length=config.block_length, enumeration_budget=config.enumeration_budget,
                   min_block_length=config.min_block_length, threads=config.threads)


@dataclass
class ScheduleBlock:
    """Outer level j"""
    j: int
    eps: float
    F: Tuple[int, ...]
    mu: Optional[MarkovMeasureOnF]
    h: float
    l: int
    L: int
    t_self: int
    t_next: int
    gamma: Optional[GammaSet] = None
    report: Optional[ApproximationReport] = None

    @property
    def count(self) -> int:
        return self.gamma.count if self.gamma is not None else 0


@dataclass(frozen=True)
class InnerLevel:
    """Inner level k = L_1 + ... + L_{j-1} + q"""
    k: int
    j: int
    q: int
    l: int
    t: int
    n: int
    N: int


@dataclass
class Schedule:
    epsilon: float
    M: int
    h_mu: float
    blocks: List[ScheduleBlock]
    expanded: List[InnerLevel] = field(default_factory=list)
    marks: List[int] = field(default_factory=list)

    @property
    def eps_seq(self) -> List[float]:
        return [b.eps for b in self.blocks]

    def block_of(self, level: InnerLevel) -> ScheduleBlock:
        return self.blocks[level.j - 1]

    def gamma(self, k: int) -> GammaSet:
        """Gamma'_k"""
        return self.block_of(self.expanded[k - 1]).gamma

    def moran_levels(self) -> List[Tuple[int, int]]:
        return [(level.n, self.block_of(level).count) for level in self.expanded]

    def rows(self) -> List[Dict]:
        return [{
            "k": level.k, "j": level.j, "l": level.l, "L": self.block_of(level).L,
            "t": level.t, "n": level.n, "N": level.N,
            "gamma_count": self.block_of(level).count,
            "log_gamma": math.log(self.block_of(level).count) if self.block_of(level).count else None,
        } for level in self.expanded]


def eps_sequence(epsilon: float, levels: int) -> List[float]:
    """eps_k = eps / 2^(k-1)"""
    return [epsilon / 2 ** (k - 1) for k in range(1, levels + 1)]


def _repetitions(l_next: int, previous: int, l: int, eps: float) -> int:
    """Smallest L with max(l_next, previous) <= eps * (previous + l L)"""
    need = max(l_next, previous) / eps - previous
    L = max(1, math.ceil(need / l - RATIO_SLACK))
    while max(l_next, previous) > eps * (previous + l * L) + RATIO_SLACK:
        L += 1
    return L


def choose_repetitions(blocks: List[ScheduleBlock]) -> None:
    """Greedy L_j, with l_{K+1} := l_K for the last block"""
    previous = 0
    for i, block in enumerate(blocks):
        l_next = blocks[i + 1].l if i + 1 < len(blocks) else block.l
        block.L = _repetitions(l_next, previous, block.l, block.eps)
        previous += block.l * block.L


def expand_schedule(schedule: Schedule) -> Schedule:
    """Fill the inner sequences: n_k = l'_k + t(F'_k, F'_{k+1})"""
    expanded, marks = [], []
    k, N = 0, 0
    for block in schedule.blocks:
        for q in range(1, block.L + 1):
            k += 1
            t = block.t_next if q == block.L else block.t_self
            n = block.l + t
            N += n
            expanded.append(InnerLevel(k=k, j=block.j, q=q, l=block.l, t=t, n=n, N=N))
        marks.append(k)
    schedule.expanded = expanded
    schedule.marks = marks
    return schedule


def _rounded_length(start: int, block_length: int) -> int:
    if start <= block_length:
        return start
    return block_length * math.ceil(start / block_length)


def _search_length(block: ScheduleBlock, epsilon: float, M: int, diagram: Diagram,
                   settings: ScheduleSettings) -> None:
    """Doubling search for l_j meeting the connecting-time ratio and the Gamma cardinality"""
    l = _rounded_length(max(settings.min_block_length, M), settings.block_length)
    t_max = max(block.t_self, block.t_next)
    for _ in range(settings.max_doublings + 1):
        if t_max <= block.eps * l + RATIO_SLACK:
            gamma = build_gamma(block.mu, l, block.eps, M, diagram, block_length=settings.block_length,
                                enumeration_budget=settings.enumeration_budget, threads=settings.threads)
            if gamma.meets_cardinality(block.h, epsilon):
                block.l, block.gamma = l, gamma
                logger.info(f"Level {block.j}: l={l}, log #Gamma={gamma.log_count:.3f}")
                return
            logger.warning(f"Level {block.j}: Gamma at l={l} has log count {gamma.log_count:.3f} "
                           f"< {l * (block.h - epsilon):.3f}; doubling")
        l *= 2
    raise CardinalityShortfall(
        f"Level {block.j}: no block length up to {l // 2} meets the cardinality and ratio bounds")


def auto_schedule(mu: CylinderMeasure, epsilon: float, k_levels: int, M: int, diagram: Diagram,
                  settings: Optional[ScheduleSettings] = None) -> Schedule:
    """
    Build and validate a schedule.

    Args:
        mu: Target measure (computable class)
        epsilon: Global epsilon
        k_levels: Number of outer levels
        M: Metric depth
        diagram: Diagram supplying subdiagrams and connecting times
        settings: Search budgets

    Returns:
        Schedule: expanded and checked against every schedule inequality
    """
    if epsilon <= 0 or k_levels < 1:
        raise InvalidParam(f"Need epsilon > 0 and at least one level, got {epsilon}, {k_levels}")
    settings = settings or ScheduleSettings()
    h_mu = measure_entropy(mu)

    blocks = []
    for j, eps_j in enumerate(eps_sequence(epsilon, k_levels), start=1):
        F, rho, report = ergodic_approximation(mu, eps_j, settings.delta, M, diagram,
                                               settings.max_halvings, lower_entropy_only=True)
        blocks.append(ScheduleBlock(j=j, eps=eps_j, F=F, mu=rho, h=markov_entropy_rate(rho),
                                    l=0, L=0, t_self=connecting_time(F, F, diagram), t_next=0,
                                    report=report))
    for i, block in enumerate(blocks):
        following = blocks[i + 1].F if i + 1 < len(blocks) else block.F
        block.t_next = connecting_time(block.F, following, diagram)
        _search_length(block, epsilon, M, diagram, settings)

    choose_repetitions(blocks)
    schedule = expand_schedule(Schedule(epsilon=epsilon, M=M, h_mu=h_mu, blocks=blocks))
    violations = validate_schedule(schedule)
    if violations:
        raise TargetUnreachable("Schedule violates: " + "; ".join(violations))
    logger.info(f"Schedule: {len(schedule.expanded)} inner levels, N={schedule.expanded[-1].N}")
    return schedule


def validate_schedule(schedule: Schedule) -> List[str]:
    """Descriptions of every violated schedule inequality (empty when all hold)"""
    violations = []
    eps = schedule.epsilon
    for b in schedule.blocks:
        if b.report is not None:
            if b.report.distance > b.eps + RATIO_SLACK:
                violations.append(f"j={b.j}: D_M(mu, mu_j)={b.report.distance:.6g} > eps_j={b.eps:.6g}")
            if b.h < schedule.h_mu - eps - RATIO_SLACK:
                violations.append(f"j={b.j}: h(mu_j)={b.h:.6g} < h(mu) - eps")
        if b.gamma is not None and not b.gamma.meets_cardinality(b.h, eps):
            violations.append(f"j={b.j}: #Gamma_j below exp(l_j (h(mu_j) - eps))")
        if max(b.t_self, b.t_next) > b.eps * b.l + RATIO_SLACK:
            violations.append(f"j={b.j}: connecting time {max(b.t_self, b.t_next)} exceeds eps_j l_j")

    total = 0
    for i, b in enumerate(schedule.blocks):
        previous = total
        total += b.l * b.L
        l_next = schedule.blocks[i + 1].l if i + 1 < len(schedule.blocks) else b.l
        if max(l_next, previous) > b.eps * total + RATIO_SLACK:
            violations.append(f"k={b.j}: max(l_(k+1), S_(k-1))={max(l_next, previous)} > eps_k S_k")

    for level in schedule.expanded:
        block = schedule.block_of(level)
        expected = block.t_next if level.q == block.L else block.t_self
        if level.n != level.l + expected:
            violations.append(f"k={level.k}: n_k={level.n} != l'_k + t = {level.l + expected}")
    return violations


def block_ratios(schedule: Schedule) -> Dict[str, List]:
    """
    Achieved growth ratios.

    `marks`: N_{m_j} / N_{m_{j+1}} per consecutive outer block (reported only).
    `steps`: per inner k >= 2, (k, N_k / N_{k-1}, 1 + eps'_{k-1} + t_max / N_{k-1}).
    """
    N = {level.k: level.N for level in schedule.expanded}
    marks = [N[a] / N[b] for a, b in zip(schedule.marks, schedule.marks[1:])]
    t_max = max(level.t for level in schedule.expanded)
    steps = []
    for level in schedule.expanded[1:]:
        prev = schedule.expanded[level.k - 2]
        bound = 1 + schedule.block_of(prev).eps + t_max / prev.N
        steps.append((level.k, level.N / prev.N, bound))
    return {"marks": marks, "steps": steps}
