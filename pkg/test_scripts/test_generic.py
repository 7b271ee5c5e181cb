"""
Tests for the generic-set construction: Gamma sets, schedules, generic prefixes and saturation
"""

import math
import random
from dataclasses import replace
from math import comb

import pytest

from diagram_module.connecting import connecting_time
from diagram_module.markov_diagram import is_path, psi_project
from entropy_module.bowen import bowen_upper
from generic_module.gamma import (GammaSet, WindowTypeClass, block_size, build_gamma, crossing_correction,
                                  integer_window_type, round_circulation)
from generic_module.moran import birkhoff_check, count_prefixes, generic_prefix, generic_prefix_counts
from generic_module.saturation import saturation_report
from generic_module.schedule import (Schedule, ScheduleBlock, ScheduleSettings, auto_schedule, block_ratios,
                                     choose_repetitions, eps_sequence, expand_schedule, validate_schedule)
from measure_module.approximation import ergodic_approximation
from measure_module.cylinder_measures import (empirical_measure_of_word, measure_profile, parry_measure,
                                              periodic_chain, periodic_measure, weak_star_distance)
from measure_module.serialization import parse_measure_expression
from shared_utils.errors import (BudgetExceeded, CardinalityShortfall, InvalidParam, PrefixTooShort,
                                 SelectorOutOfRange)

BALANCED_BLOCKS = comb(12, 5) + comb(12, 6) + comb(12, 7)


@pytest.fixture(scope="module")
def parry_23(diagram):
    return parry_measure([diagram.base(2), diagram.base(3)], diagram)


@pytest.fixture(scope="module")
def fixed_point_schedule(diagram):
    mu = periodic_measure((2,), diagram)
    return auto_schedule(mu, 0.2, 2, 2, diagram)


@pytest.fixture(scope="module")
def parry_schedule(diagram, parry_23):
    return auto_schedule(parry_23, 0.3, 2, 1, diagram)


def _block(j, eps, l, t, L=0, gamma=None):
    return ScheduleBlock(j=j, eps=eps, F=(), mu=None, h=0.0, l=l, L=L, t_self=t, t_next=t, gamma=gamma)


# Gamma sets

def test_block_helpers():
    assert block_size(24, 12) == 12
    assert block_size(26, 12) == 2
    assert block_size(7, 12) == 7
    assert crossing_correction(24, 12, 1) == 0.0
    assert crossing_correction(24, 12, 2) == pytest.approx(0.25 / 23)


def test_gamma_of_fixed_point(diagram):
    gamma = GammaSet(periodic_chain((2,), diagram), 4, 0.05, 2, diagram)
    assert list(gamma.words()) == [(2, 2, 2, 2)]
    assert gamma.explicit


@pytest.mark.parametrize("eps, count", [(0.6, 16), (0.05, 6)])
def test_explicit_gamma_of_parry(diagram, parry_23, eps, count):
    gamma = GammaSet(parry_23, 4, eps, 1, diagram)
    words = list(gamma.words())
    assert gamma.count == len(words) == count
    assert len(set(words)) == len(words)
    if count == 6:
        assert all(w.count(2) == 2 for w in words)


def test_block_product_gamma(diagram, parry_23):
    gamma = GammaSet(parry_23, 24, 0.05, 1, diagram)
    assert (gamma.block, gamma.r) == (12, 2)
    assert gamma.count == BALANCED_BLOCKS ** 2
    assert gamma.prefix_count(12) == BALANCED_BLOCKS
    assert gamma.prefix_count(30) == gamma.count
    assert gamma.start_vertices == (diagram.base(2), diagram.base(3))

    rng = random.Random(7)
    indices = {rng.randrange(gamma.count) for _ in range(200)}
    seen = set()
    for index in indices:
        word, path = gamma.word_path(index)
        assert len(word) == 24
        assert gamma.contains(word)
        assert is_path(path, diagram) and psi_project(path, diagram) == word
        assert weak_star_distance(parry_23, empirical_measure_of_word(word, 1, 3), 1) <= 0.05 + 1e-12
        seen.add(word)
    assert len(seen) == len(indices)
    assert gamma.contains(gamma.sample(random.Random(0)))
    assert not gamma.contains((2,) * 24)


def test_build_gamma_doubles_to_cardinality(diagram, parry_23):
    gamma = build_gamma(parry_23, 4, 0.05, 1, diagram, h=math.log(2), epsilon=0.2, max_doublings=1)
    assert gamma.l == 8
    assert gamma.count == comb(8, 4)
    assert build_gamma(parry_23, 4, 0.05, 1, diagram).count == 6
    with pytest.raises(CardinalityShortfall):
        build_gamma(parry_23, 4, 0.05, 1, diagram, h=math.log(2), epsilon=0.2)


def test_gamma_rejects(diagram, parry_23):
    gamma = GammaSet(parry_23, 24, 0.05, 1, diagram)
    with pytest.raises(InvalidParam):
        gamma.word_path(gamma.count)
    with pytest.raises(BudgetExceeded):
        list(gamma.words())
    with pytest.raises(InvalidParam):
        GammaSet(parry_23, 2, 0.05, 4, diagram)


def test_window_type_rounding():
    flows = {(0, 0): 5.75, (0, 1): 5.75, (1, 0): 5.75, (1, 1): 5.75}
    assert round_circulation(flows) == {e: 6 for e in flows}
    balanced = {(0, 0): 10.4, (1, 1): 10.4, (0, 1): 0.1, (1, 0): 0.1}
    assert integer_window_type(balanced, 21) == {(0, 0): 10, (1, 1): 9, (0, 1): 1, (1, 0): 1}
    # the light loop costs more to reach than it carries
    lopsided = {(0, 0): 10.4, (1, 1): 1.2, (0, 1): 0.1, (1, 0): 0.1}
    assert integer_window_type(lopsided, 12) == {(0, 0): 12}


def test_window_type_class_of_parry(diagram, parry_23):
    window_type = WindowTypeClass(parry_23, 24, 0.05, measure_profile(parry_23, 1), diagram)
    assert window_type.x == {(0, 0): 6, (0, 1): 6, (1, 0): 6, (1, 1): 5}
    assert window_type.root == (0,)
    assert window_type.count == comb(12, 6) * comb(10, 5) == 232_848
    assert window_type.start_vertices == (diagram.base(2),)
    assert window_type.prefix_count(5) == 16
    assert window_type.prefix_count(24) == window_type.count

    rng = random.Random(11)
    indices = {0, window_type.count - 1} | {rng.randrange(window_type.count) for _ in range(100)}
    seen = set()
    for index in indices:
        word, path = window_type.word_path(index)
        assert len(word) == 24 and word[0] == word[-1] == 2
        assert word.count(2) == 13
        assert window_type.contains(word)
        assert is_path(path, diagram) and psi_project(path, diagram) == word
        seen.add(word)
    assert len(seen) == len(indices)
    assert not window_type.contains((2,) * 24)


def test_gamma_of_switching_chain(diagram):
    mu = parse_measure_expression("0.5*periodic:2 + 0.5*periodic:3", diagram)
    _, rho, _ = ergodic_approximation(mu, 0.1, 0.01, 4, diagram)
    assert WindowTypeClass(rho, 48, 0.1, measure_profile(rho, 4), diagram).count > 0
    gamma = GammaSet(rho, 48, 0.1, 4, diagram)
    assert gamma.count > 0
    indices = {0, gamma.count - 1} | set(random.Random(3).sample(range(gamma.count), min(20, gamma.count)))
    for index in indices:
        word, path = gamma.word_path(index)
        assert len(word) == 48 and gamma.contains(word)
        assert is_path(path, diagram) and psi_project(path, diagram) == word
        assert weak_star_distance(rho, empirical_measure_of_word(word, 4, 3), 4) <= 0.1 + 1e-12


# Schedules

def test_eps_sequence():
    assert eps_sequence(0.2, 3) == [0.2, 0.1, 0.05]


def test_expand_schedule():
    schedule = expand_schedule(Schedule(0.2, 1, 0.0, [_block(1, 0.2, 5, 2, L=2), _block(2, 0.1, 7, 2, L=3)]))
    assert [level.n for level in schedule.expanded] == [7, 7, 9, 9, 9]
    assert [level.N for level in schedule.expanded] == [7, 14, 23, 32, 41]
    assert [level.j for level in schedule.expanded] == [1, 1, 2, 2, 2]
    assert schedule.marks == [2, 5]


def test_choose_and_validate_repetitions():
    blocks = [_block(1, 0.2, 20, 2), _block(2, 0.1, 40, 2)]
    choose_repetitions(blocks)
    assert [b.L for b in blocks] == [10, 45]
    schedule = expand_schedule(Schedule(0.2, 1, 0.0, blocks))
    assert validate_schedule(schedule) == []

    blocks[1].L = 1
    assert any("S_" in v for v in validate_schedule(expand_schedule(schedule)))

    blocks[1].L = 45
    expand_schedule(schedule)
    schedule.expanded[0] = replace(schedule.expanded[0], n=99)
    assert any("n_k" in v for v in validate_schedule(schedule))

    blocks[0].t_self = 50
    assert any("connecting time" in v for v in validate_schedule(schedule))


def test_fixed_point_schedule(fixed_point_schedule):
    schedule = fixed_point_schedule
    assert [b.l for b in schedule.blocks] == [24, 24]
    assert [b.L for b in schedule.blocks] == [5, 45]
    assert all(level.t == 2 and level.n == 26 for level in schedule.expanded)
    assert schedule.expanded[-1].N == 1300
    assert all(b.count == 1 for b in schedule.blocks)
    assert validate_schedule(schedule) == []


def test_parry_schedule(parry_schedule):
    schedule = parry_schedule
    assert [b.l for b in schedule.blocks] == [24, 48]
    assert [b.L for b in schedule.blocks] == [7, 20]
    assert [(b.t_self, b.t_next) for b in schedule.blocks] == [(4, 4), (4, 4)]
    assert schedule.blocks[0].count == 4096 ** 2
    assert schedule.blocks[1].count == (4096 - 2 * (1 + 12 + 66)) ** 4
    assert schedule.expanded[-1].N == 1236
    assert validate_schedule(schedule) == []


def test_block_ratios_at_block_boundaries(parry_schedule):
    ratios = block_ratios(parry_schedule)
    assert len(ratios["marks"]) == 1
    boundaries = {mark + 1 for mark in parry_schedule.marks[:-1]}
    checked = [(k, ratio, bound) for k, ratio, bound in ratios["steps"] if k in boundaries]
    assert checked
    for k, ratio, bound in checked:
        assert ratio <= bound


def test_schedule_search_limits(diagram):
    mu = periodic_measure((2,), diagram)
    with pytest.raises(InvalidParam):
        auto_schedule(mu, 0.0, 2, 2, diagram)
    with pytest.raises(CardinalityShortfall):
        auto_schedule(mu, 0.05, 1, 2, diagram, ScheduleSettings(max_doublings=0))


@pytest.mark.slow
def test_switching_schedule(diagram):
    mu = parse_measure_expression("0.5*periodic:2 + 0.5*periodic:3", diagram)
    schedule = auto_schedule(mu, 0.1, 2, 4, diagram)
    assert validate_schedule(schedule) == []
    assert all(b.count > 0 for b in schedule.blocks)
    prefix = generic_prefix(schedule, 0, None, diagram)
    assert is_path(prefix.path, diagram) and psi_project(prefix.path, diagram) == prefix.word
    assert all(c.within_bound for c in birkhoff_check(prefix.word, mu, schedule, 4))


# Generic prefixes

def test_fixed_point_prefix(diagram, fixed_point_schedule):
    mu = periodic_measure((2,), diagram)
    prefix = generic_prefix(fixed_point_schedule, 0, None, diagram)
    assert prefix.word == (2,) * 1300
    assert set(prefix.path) == {diagram.two}
    checks = birkhoff_check(prefix.word, mu, fixed_point_schedule, 2)
    assert all(c.segment_deviation == 0.0 and c.cumulative_deviation == 0.0 for c in checks)
    counting = count_prefixes(fixed_point_schedule, len(fixed_point_schedule.expanded))
    assert counting.count == 1 and counting.exponent == 0.0 and counting.meets_target


def test_prefixes_are_admissible(diagram, parry_schedule):
    final_N = parry_schedule.expanded[-1].N
    for seed in range(100):
        prefix = generic_prefix(parry_schedule, seed, None, diagram)
        assert len(prefix) == final_N
        assert is_path(prefix.path, diagram)
        assert psi_project(prefix.path, diagram) == prefix.word
    again = generic_prefix(parry_schedule, 5, None, diagram)
    assert again.word == generic_prefix(parry_schedule, 5, None, diagram).word


def test_checkpoints_within_bound(diagram, parry_23, parry_schedule):
    prefix = generic_prefix(parry_schedule, 3, None, diagram)
    checks = birkhoff_check(prefix.word, parry_23, parry_schedule, 1)
    assert [c.N for c in checks] == [level.N for level in parry_schedule.expanded]
    assert all(c.within_bound for c in checks)
    with pytest.raises(PrefixTooShort):
        birkhoff_check(prefix.word[:100], parry_23, parry_schedule, 1)


def test_prefix_counting(parry_schedule):
    counting = count_prefixes(parry_schedule, len(parry_schedule.expanded))
    assert counting.target == pytest.approx((math.log(2) - 0.6) / 1.3)
    assert counting.meets_target
    counts = generic_prefix_counts(parry_schedule)
    assert counts[parry_schedule.expanded[0].N] == 4096 ** 2 * 2


def test_prefix_count_by_enumeration(diagram, parry_23):
    t = connecting_time([diagram.base(2), diagram.base(3)], [diagram.base(2), diagram.base(3)], diagram)
    gamma = GammaSet(parry_23, 4, 0.05, 1, diagram)
    schedule = expand_schedule(Schedule(0.05, 1, math.log(2), [_block(1, 0.05, 4, t, L=2, gamma=gamma)]))
    prefixes = {generic_prefix(schedule, [i, j], None, diagram).word for i in range(6) for j in range(6)}
    assert len(prefixes) == count_prefixes(schedule, 2).count == 36
    assert all(len(w) == 2 * (4 + t) for w in prefixes)
    assert generic_prefix_counts(schedule)[2 * (4 + t)] == 36 * 2


def test_selector_errors(diagram, parry_schedule):
    with pytest.raises(SelectorOutOfRange):
        generic_prefix(parry_schedule, [0], None, diagram)
    levels = len(parry_schedule.expanded)
    with pytest.raises(SelectorOutOfRange):
        generic_prefix(parry_schedule, [parry_schedule.gamma(1).count] + [0] * levels, None, diagram)


# Saturation

def test_fixed_point_saturation(diagram, fixed_point_schedule):
    mu = periodic_measure((2,), diagram)
    report = saturation_report(mu, diagram, 0.2, 2, 2, schedule=fixed_point_schedule)
    assert report.lower == 0.0 and report.upper == 0.0
    assert report.passed and report.admissible
    assert report.violations == []
    assert report.summary()["checkpoints_within_bound"]
    assert len(report.table()) == len(fixed_point_schedule.expanded)


@pytest.mark.slow
def test_parry_base_saturation(diagram):
    mu = parry_measure(diagram.base_ids, diagram)
    h = math.log(1 + math.sqrt(2))
    report = saturation_report(mu, diagram, 0.2, 1, 1, settings=ScheduleSettings(min_block_length=240))
    assert report.h == pytest.approx(h, abs=1e-9)
    assert report.lower >= h - 0.1
    assert report.upper <= h + 0.1
    assert report.lower <= report.upper
    assert report.passed and report.admissible
    assert all(c.within_bound for c in report.checkpoints)
    assert report.violations == []



@pytest.mark.slow
def test_overlapping_mixture_bracket(diagram):
    mu = parse_measure_expression("0.5*parry:[2],[3] + 0.5*periodic:2", diagram)
    h = 0.5 * math.log(2)
    report = saturation_report(mu, diagram, 0.2, 3, 4)
    assert report.h == pytest.approx(h)
    assert h - 0.12 <= report.lower <= report.upper <= h + 0.12
    assert report.passed and report.admissible
    assert all(c.within_bound for c in report.checkpoints)
    assert report.counting.exponent >= report.counting.target - 0.05
    assert report.violations == []


def test_upper_estimate_uses_every_depth(diagram, parry_23, parry_schedule):
    counts = generic_prefix_counts(parry_schedule)
    assert counts[12] == 4096
    final_N = parry_schedule.expanded[-1].N
    # a single cover at the deepest level is coarser
    assert bowen_upper({final_N: counts[final_N]}) == pytest.approx(0.64)
    report = saturation_report(parry_23, diagram, 0.3, 2, 1, schedule=parry_schedule)
    assert report.upper == pytest.approx(0.63)
    assert report.lower < report.upper
    assert report.passed
