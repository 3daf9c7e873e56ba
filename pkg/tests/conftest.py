import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from polyspec.lattice import LatticeSpec
from polyspec.polycrystal import ContrastParams, realize_indicators, sample_orientations
from polyspec.projection import build_projections

REF_SIGMA1 = 51.0741 + 45.1602j
REF_SIGMA2 = 3.07 + 0.0019j


@functools.lru_cache(maxsize=None)
def projections_for(d, L):
    return build_projections(LatticeSpec(d, L))


def realization(d, L, Lc, seed=0, sample_id=0):
    spec = LatticeSpec(d, L, Lc)
    return realize_indicators(sample_orientations(spec, seed, sample_id))


@pytest.fixture
def ref_contrast():
    return ContrastParams(REF_SIGMA1, REF_SIGMA2)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
