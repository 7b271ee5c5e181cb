"""
Measure records and CLI measure expressions

Records:
    periodic: 2 3
    markov: F=1,2 P=0.5,0.5;0.5,0.5 pi=0.5,0.5
    mixture: 0.5 periodic: 2 ; 0.5 markov: F=... P=... pi=...
Expressions:
    0.5*parry:[2],[3] + 1/2*periodic:2      parry:base      parry:0,1,2
    markov: F=1,2 P=0.5,0.5;0.5,0.5 pi=0.5,0.5
"""

import logging
from typing import List

import numpy as np

from diagram_module.markov_diagram import Diagram
from measure_module.cylinder_measures import (CylinderMeasure, MarkovMeasureOnF, MixtureMeasure,
                                              PeriodicMeasure, parry_measure, periodic_measure)
from shared_utils.errors import Inadmissible, InvalidParam
from shift_module.params import parse_number
from shift_module.transformation import format_word, parse_word

logger = logging.getLogger(__name__)

COMPONENT_SEPARATOR = " ; "
STATIONARITY_TOL = 1e-9


def _floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def to_record(mu: CylinderMeasure) -> str:
    if isinstance(mu, PeriodicMeasure):
        return f"periodic: {format_word(mu.cycle)}"
    if isinstance(mu, MarkovMeasureOnF):
        rows = ";".join(_floats(row) for row in mu.P)
        return (f"markov: F={','.join(str(v) for v in mu.vertices)} "
                f"P={rows} pi={_floats(mu.pi)}")
    if isinstance(mu, MixtureMeasure):
        parts = [f"{a!r} {to_record(nu)}" for a, nu in mu.components]
        return "mixture: " + COMPONENT_SEPARATOR.join(parts)
    raise InvalidParam(f"No record format for {type(mu).__name__}")


def _parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidParam(f"Not a list of numbers: {text!r}")


def _markov_from_fields(body: str, diagram: Diagram) -> MarkovMeasureOnF:
    fields = {}
    for token in body.split():
        key, sep, value = token.partition("=")
        if not sep or key not in ("F", "P", "pi"):
            raise InvalidParam(f"Bad markov record field: {token!r}")
        fields[key] = value
    if set(fields) != {"F", "P", "pi"}:
        raise InvalidParam("Markov record needs F=, P= and pi=")
    try:
        F = tuple(int(v) for v in fields["F"].split(","))
    except ValueError:
        raise InvalidParam(f"Bad vertex list: {fields['F']!r}")
    diagram.check_ids(F)
    P = np.array([_parse_floats(row) for row in fields["P"].split(";")])
    pi = np.array(_parse_floats(fields["pi"]))
    n = len(F)
    if P.shape != (n, n) or pi.shape != (n,):
        raise InvalidParam(f"Markov record sizes disagree with |F|={n}")
    if (P < 0).any() or not np.allclose(P.sum(axis=1), 1.0, atol=STATIONARITY_TOL):
        raise InvalidParam("Markov record P is not row-stochastic")
    for i, source in enumerate(F):
        for j, target in enumerate(F):
            if P[i, j] > 0 and target not in diagram.successors_of(source):
                raise Inadmissible(f"P charges {source} -> {target}, which is not an arrow")
    if np.abs(pi @ P - pi).sum() > STATIONARITY_TOL or abs(pi.sum() - 1) > STATIONARITY_TOL:
        raise InvalidParam("Markov record pi is not stationary for P")
    labels = tuple(diagram.label(v) for v in F)
    return MarkovMeasureOnF(F, labels, P, pi, diagram.params.k)


def from_record(text: str, diagram: Diagram) -> CylinderMeasure:
    kind, sep, body = text.strip().partition(":")
    if not sep:
        raise InvalidParam(f"Not a measure record: {text!r}")
    kind, body = kind.strip(), body.strip()
    if kind == "periodic":
        return periodic_measure(parse_word(body, diagram.params.k), diagram)
    if kind == "markov":
        return _markov_from_fields(body, diagram)
    if kind == "mixture":
        components = []
        for part in body.split(COMPONENT_SEPARATOR):
            weight, _, record = part.strip().partition(" ")
            components.append((float(parse_number(weight)), from_record(record, diagram)))
        return MixtureMeasure(tuple(components))
    raise InvalidParam(f"Unknown measure record kind: {kind!r}")


def vertex_list(text: str, diagram: Diagram) -> List[int]:
    if text.strip() == "base":
        return list(diagram.base_ids)
    ids = []
    for item in text.split(","):
        item = item.strip()
        try:
            if item.startswith("[") and item.endswith("]"):
                ids.append(diagram.base(int(item[1:-1])))
            else:
                ids.append(int(item))
        except ValueError:
            raise InvalidParam(f"Bad vertex reference: {item!r}")
    return sorted(set(diagram.check_ids(ids)))


def _component(text: str, diagram: Diagram, power_tol: float, power_max_iter: int) -> CylinderMeasure:
    kind, sep, body = text.strip().partition(":")
    if not sep:
        raise InvalidParam(f"Measure component needs a kind: {text!r}")
    kind = kind.strip()
    if kind == "periodic":
        return periodic_measure(parse_word(body, diagram.params.k), diagram)
    if kind == "parry":
        return parry_measure(vertex_list(body, diagram), diagram, power_tol, power_max_iter)
    if kind == "markov":
        return _markov_from_fields(body, diagram)
    raise InvalidParam(f"Unknown measure kind: {kind!r}")


def parse_measure_expression(expr: str, diagram: Diagram, power_tol: float = 1e-12,
                             power_max_iter: int = 100_000) -> CylinderMeasure:
    """A single component, or a mixture when weights are given"""
    terms = [t.strip() for t in expr.split("+") if t.strip()]
    if not terms:
        raise InvalidParam("Empty measure expression")
    components = []
    for term in terms:
        head, star, rest = term.partition("*")
        if star and ":" not in head:
            weight, component = float(parse_number(head)), rest
        else:
            weight, component = 1.0, term
        components.append((weight, _component(component, diagram, power_tol, power_max_iter)))
    if len(components) == 1 and components[0][0] == 1.0:
        return components[0][1]
    return MixtureMeasure(tuple(components))
