"""
Shared pytest fixtures
Exact-mode parameters (1/2, 5/2) and diagrams built once per session
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from diagram_module.markov_diagram import build_diagram  # noqa: E402
from shift_module.params import make_params  # noqa: E402


@pytest.fixture(scope="session")
def params():
    return make_params("1/2", "5/2")


@pytest.fixture(scope="session")
def float_params():
    return make_params(0.5, 2.5)


@pytest.fixture(scope="session")
def diagram(params):
    return build_diagram(params, 18)


@pytest.fixture(scope="session")
def small_diagram(params):
    return build_diagram(params, 4)


@pytest.fixture(scope="session")
def full_shift_diagram():
    return build_diagram(make_params("0", "3"), 8)
