"""
On-disk cache of built diagrams
"""

import logging
from typing import Optional

import diskcache

from diagram_module.markov_diagram import DEFAULT_VERTEX_BUDGET, Diagram, build_diagram
from shared_utils.helpers import generate_cache_key
from shift_module.params import Params

logger = logging.getLogger(__name__)


class DiagramCache:
    """Diagrams keyed by parameters, backend, tolerance, depth and budget"""

    def __init__(self, cache_dir: str):
        self.cache_dir = cache_dir
        self.cache = diskcache.Cache(cache_dir)

    @staticmethod
    def key(params: Params, depth: int, vertex_budget: int) -> str:
        return generate_cache_key("diagram", params.alpha, params.beta, params.mode.value,
                                  params.tol, depth, vertex_budget)

    def get_or_build(self, params: Params, depth: int,
                     vertex_budget: int = DEFAULT_VERTEX_BUDGET) -> Diagram:
        key = self.key(params, depth, vertex_budget)
        diagram = self.cache.get(key)
        if diagram is not None:
            logger.info(f"Diagram cache hit for {params.describe()} at depth {depth}")
            return diagram
        diagram = build_diagram(params, depth, vertex_budget)
        self.cache.set(key, diagram)
        return diagram

    def close(self) -> None:
        self.cache.close()


def load_diagram(params: Params, depth: int, vertex_budget: int = DEFAULT_VERTEX_BUDGET,
                 cache_dir: Optional[str] = None) -> Diagram:
    """Build D_depth, going through the disk cache when cache_dir is set"""
    if not cache_dir:
        return build_diagram(params, depth, vertex_budget)
    cache = DiagramCache(cache_dir)
    try:
        return cache.get_or_build(params, depth, vertex_budget)
    finally:
        cache.close()
