"""
Saturation report: h(mu) against Bowen estimates of the constructed generic set
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from diagram_module.markov_diagram import Diagram, is_path, psi_project
from entropy_module.bowen import EntropyEstimate, bowen_lower_moran, bowen_upper
from entropy_module.entropy_calculator import measure_entropy
from generic_module.moran import (Checkpoint, PrefixCount, birkhoff_check, count_prefixes, generic_prefix,
                                  generic_prefix_counts)
from generic_module.schedule import Schedule, ScheduleSettings, auto_schedule, validate_schedule
from measure_module.cylinder_measures import CylinderMeasure

logger = logging.getLogger(__name__)


@dataclass
class SaturationReport:
    h: float
    estimate: EntropyEstimate
    passed: bool
    seed: int
    epsilon: float
    M: int
    bracket_tol: float
    prefix_length: int
    admissible: bool
    counting: PrefixCount
    checkpoints: List[Checkpoint] = field(default_factory=list)
    rows: List[Dict] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    @property
    def lower(self) -> float:
        return self.estimate.lower

    @property
    def upper(self) -> float:
        return self.estimate.upper

    def summary(self) -> Dict:
        return {
            "h": self.h,
            "lower": self.lower,
            "upper": self.upper,
            "passed": self.passed,
            "seed": self.seed,
            "eps": self.epsilon,
            "M": self.M,
            "bracket_tol": self.bracket_tol,
            "prefix_length": self.prefix_length,
            "admissible": self.admissible,
            "count_exponent": self.counting.exponent,
            "count_target": self.counting.target,
            "checkpoints_within_bound": all(c.within_bound for c in self.checkpoints),
            "violations": self.violations,
        }

    def table(self) -> List[Dict]:
        """Schedule rows joined with the checkpoint deviation and running count exponent"""
        by_k = {c.k: c for c in self.checkpoints}
        table = []
        log_total = 0.0
        for row in self.rows:
            log_total += row["log_gamma"] or 0.0
            check = by_k.get(row["k"])
            table.append({**row,
                          "deviation": check.segment_deviation if check else None,
                          "exponent": log_total / row["N"]})
        return table


def saturation_report(mu: CylinderMeasure, diagram: Diagram, epsilon: float, k_levels: int, M: int,
                      seed: int = 0, m: int = 1, s_step: float = 0.01, bracket_tol: float = 0.12,
                      settings: Optional[ScheduleSettings] = None,
                      schedule: Optional[Schedule] = None) -> SaturationReport:
    """
    Build the generic set for mu and bracket h(mu) by Bowen estimates.

    Lower: the Moran bound over all inner checkpoints. Upper: uniform covers of
    the generic-prefix tree at every checkpoint and word middle from half the
    prefix length on. A cover cheaper than the Moran bound caps the lower
    estimate, since the bound is only checked at checkpoints.
    """
    h = measure_entropy(mu)
    schedule = schedule or auto_schedule(mu, epsilon, k_levels, M, diagram, settings)
    levels = len(schedule.expanded)

    prefix = generic_prefix(schedule, seed, levels, diagram)
    admissible = is_path(prefix.path, diagram) and psi_project(prefix.path, diagram) == prefix.word
    checkpoints = birkhoff_check(prefix.word, mu, schedule, M)

    lower = bowen_lower_moran(schedule, levels, m)
    upper = bowen_upper(generic_prefix_counts(schedule), m=m, s_step=s_step)
    if upper < lower:
        logger.warning(f"Uniform cover {upper:.6f} undercuts the Moran bound {lower:.6f}")
        lower = upper
    estimate = EntropyEstimate(lower, upper, method="moran lower / uniform-cover upper")
    passed = lower <= h + bracket_tol and h <= upper + bracket_tol
    logger.info(f"Saturation: h={h:.6f}, lower={lower:.6f}, upper={upper:.6f}, passed={passed}")
    return SaturationReport(
        h=h, estimate=estimate, passed=passed, seed=seed, epsilon=epsilon, M=M,
        bracket_tol=bracket_tol, prefix_length=len(prefix), admissible=admissible,
        counting=count_prefixes(schedule, levels), checkpoints=checkpoints,
        rows=schedule.rows(), violations=validate_schedule(schedule))
