"""
Tests for the Markov diagram: successors, build, languages and connecting paths
"""

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diagram_module.connecting import (connecting_path, connecting_time, connector_word, shortest_path,
                                       time_from_two, time_to_two)
from diagram_module.diagram_cache import DiagramCache, load_diagram
from diagram_module.markov_diagram import (build_diagram, canonical_path, export_diagram, has_self_loop_two,
                                           is_irreducible, is_path, iter_words, language, language_counts,
                                           main_component, psi_project, successors, transition_matrix)
from shared_utils.errors import BoundaryError, DepthInsufficient, InvalidParam, VertexBudgetExceeded
from shift_module.params import make_params
from shift_module.transformation import branch_image, itinerary, partition


def _intervals(diagram, vids):
    return [(diagram.label(v), diagram.vertex(v).interval.lo, diagram.vertex(v).interval.hi) for v in vids]


def test_base_successors(small_diagram):
    one, two, three = small_diagram.base_ids
    assert _intervals(small_diagram, small_diagram.successors_of(one)) == [
        (2, Fraction(1, 2), Fraction(3, 5)),
        (3, Fraction(3, 5), Fraction(1)),
    ]
    assert small_diagram.successors_of(two) == (one, two, three)
    assert small_diagram.successors_of(three) == (one, two, three)


def test_successor_candidates_are_ordered(params, small_diagram):
    first = successors(small_diagram.vertex(small_diagram.base(1)), params)
    assert [j for j, _ in first] == [2, 3]


def test_chain_of_new_vertices(small_diagram):
    # [1] -> ((1/2, 3/5), 2) -> ((3/4, 1), 3) -> ((3/8, 3/5), 2)
    assert len(small_diagram) == 3 + 4
    a = small_diagram.successors_of(small_diagram.base(1))[0]
    (b,) = small_diagram.successors_of(a)
    assert _intervals(small_diagram, [b]) == [(3, Fraction(3, 4), Fraction(1))]
    assert _intervals(small_diagram, small_diagram.successors_of(b)) == [
        (2, Fraction(3, 8), Fraction(3, 5)),
        (3, Fraction(3, 5), Fraction(1)),
    ]


def test_build_is_deterministic_and_nested(params):
    d6, d8 = build_diagram(params, 6), build_diagram(params, 8)
    assert export_diagram(d6) == export_diagram(build_diagram(params, 6))
    assert [v.interval for v in d6.vertices] == [v.interval for v in d8.vertices[:len(d6)]]
    for v in d6.vertices:
        if d6.is_expanded(v.id):
            assert d6.successors_of(v.id) == d8.successors_of(v.id)


def test_build_rejects_bad_input(params):
    with pytest.raises(InvalidParam):
        build_diagram(params, -1)
    with pytest.raises(VertexBudgetExceeded):
        build_diagram(params, 10, vertex_budget=5)


def test_self_loop_and_main_component(diagram):
    assert has_self_loop_two(diagram)
    main = main_component(diagram)
    assert set(diagram.base_ids) <= set(main)
    assert is_irreducible(diagram, main)
    assert is_irreducible(diagram, [diagram.two])
    assert not is_irreducible(diagram, [diagram.base(1)])


def test_transition_matrix_on_base(diagram):
    M = transition_matrix(diagram.base_ids, diagram)
    assert M.tolist() == [[0, 0, 1], [1, 1, 1], [1, 1, 1]]


@pytest.mark.parametrize("n, count", [(1, 3), (2, 8), (3, 20)])
def test_language_counts(diagram, n, count):
    assert language_counts(diagram, n) == count
    assert len(language(diagram, n)) == count


def test_language_of_length_two(diagram):
    expected = {w for w in itertools.product((1, 2, 3), repeat=2) if w != (1, 1)}
    assert language(diagram, 2) == expected


def test_base_subshift_counts(diagram):
    # Pell-type recursion of the base graph
    assert [language_counts(diagram, n, diagram.base_ids) for n in (1, 2, 3, 4, 12)] == [3, 7, 17, 41, 47321]


def test_language_matches_orbits(params, diagram):
    n = 6
    words = language(diagram, n)
    for q in range(1, 241):
        try:
            w = itinerary(Fraction(q, 241), n, params)
        except BoundaryError:
            continue
        assert w in words


def test_language_needs_depth(small_diagram):
    with pytest.raises(DepthInsufficient):
        language(small_diagram, 5)
    with pytest.raises(InvalidParam):
        language_counts(small_diagram, 0)


def test_iter_words_is_lexicographic(diagram):
    words = list(iter_words(diagram, 3))
    assert words == sorted(words)


def _cylinders(params, n):
    """Nonempty n-cylinders as (lo, hi, word), refined branch by branch in exact arithmetic"""
    parts = partition(params)
    layer = [(p.lo, p.hi, branch_image(p.lo, p.hi, j, params), (j,)) for j, p in enumerate(parts, start=1)]
    for _ in range(n - 1):
        refined = []
        for lo, hi, (c, d), word in layer:
            scale = (hi - lo) / (d - c)
            for a, part in enumerate(parts, start=1):
                s, e = max(c, part.lo), min(d, part.hi)
                if s < e:
                    refined.append((lo + (s - c) * scale, lo + (e - c) * scale,
                                    branch_image(s, e, a, params), word + (a,)))
        layer = refined
    return [(lo, hi, word) for lo, hi, _, word in layer]


def test_language_equals_cylinder_itineraries(params, diagram):
    cylinders = _cylinders(params, 12)
    for lo, hi, word in cylinders[::97]:
        assert itinerary((lo + hi) / 2, 12, params) == word
    for n in range(1, 13):
        assert {word[:n] for _, _, word in cylinders} == language(diagram, n)


@pytest.mark.slow
def test_language_equals_sampled_orbits(params, diagram):
    sampled = set()
    for q in range(1, 100_000):
        try:
            sampled.add(itinerary(Fraction(q, 100_000), 3, params))
        except BoundaryError:
            continue
    assert sampled == language(diagram, 3)


def test_language_counts_are_submultiplicative(diagram):
    counts = {n: language_counts(diagram, n) for n in range(1, 14)}
    for n in range(1, 14):
        for m in range(1, 14 - n + 1):
            assert counts[n + m] <= counts[n] * counts[m]


@pytest.mark.parametrize("alpha, beta, depth", [("1/2", "5/2", 18), ("9/10", "41/20", 8), ("1/3", "7/3", 8)])
def test_vertex_and_arrow_intervals(alpha, beta, depth):
    params = make_params(alpha, beta)
    built = build_diagram(params, depth)
    parts = partition(params)
    for v in built.vertices:
        part = parts[v.label - 1]
        assert part.lo <= v.interval.lo < v.interval.hi <= part.hi
        targets = built.successors_of(v.id)
        assert len(targets) <= params.k
        if not built.is_expanded(v.id):
            continue
        a, b = branch_image(v.interval.lo, v.interval.hi, v.label, params)
        expected = {j: (max(a, p.lo), min(b, p.hi)) for j, p in enumerate(parts, start=1)
                    if max(a, p.lo) < min(b, p.hi)}
        assert {built.label(w): (built.vertex(w).interval.lo, built.vertex(w).interval.hi)
                for w in targets} == expected


def test_self_loop_at_two_for_steep_slope():
    params = make_params("9/10", "41/20")
    assert params.k == 3
    assert has_self_loop_two(build_diagram(params, 3))


@settings(max_examples=100)
@given(st.fractions(min_value=0, max_value=Fraction(99, 100), max_denominator=50),
       st.fractions(min_value=Fraction(201, 100), max_value=6, max_denominator=50))
def test_self_loop_at_two_for_accepted_params(alpha, beta):
    assert has_self_loop_two(build_diagram(make_params(alpha, beta), 1))


def test_paths_project_to_words(diagram):
    path = canonical_path((2, 3, 2, 2), [diagram.base(2), diagram.base(3)], diagram)
    assert path == (diagram.base(2), diagram.base(3), diagram.base(2), diagram.base(2))
    assert is_path(path, diagram)
    assert psi_project(path, diagram) == (2, 3, 2, 2)
    assert canonical_path((1, 1), diagram.base_ids, diagram) is None


@pytest.mark.parametrize("F, F_prime, t", [
    ([2], [2], 2),
    ([2], [3], 3),
    ([3], [3], 4),
    ([1, 2, 3], [1, 2, 3], 5),
])
def test_connecting_times(diagram, F, F_prime, t):
    ids = [diagram.base(j) for j in F]
    ids_prime = [diagram.base(j) for j in F_prime]
    assert connecting_time(ids, ids_prime, diagram) == t


def test_times_through_two(diagram):
    assert time_to_two(diagram.two, diagram) == 1
    assert time_from_two(diagram.two, diagram) == 1
    # [1] reaches [2] only through [3]
    assert time_to_two(diagram.base(1), diagram) == 3
    assert shortest_path(diagram.base(1), diagram.two, diagram) == (diagram.base(1), diagram.base(3), diagram.two)


def test_connecting_path_has_t_plus_two_vertices(diagram):
    C, D = diagram.base(1), diagram.base(3)
    for t in (5, 6, 9):
        path = connecting_path(C, D, t, diagram)
        assert len(path) == t + 2
        assert path[0] == C and path[-1] == D
        assert is_path(path, diagram)
    labels, interior = connector_word(C, D, 6, diagram)
    assert len(labels) == 6 and len(interior) == 6
    with pytest.raises(InvalidParam):
        connecting_path(C, D, 4, diagram)


def test_diagram_cache_round_trip(params, tmp_path):
    cache = DiagramCache(str(tmp_path))
    try:
        built = cache.get_or_build(params, 5)
        again = cache.get_or_build(params, 5)
    finally:
        cache.close()
    assert export_diagram(built) == export_diagram(again)
    assert export_diagram(load_diagram(params, 5, cache_dir=str(tmp_path))) == export_diagram(built)
