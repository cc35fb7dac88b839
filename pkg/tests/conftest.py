import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qrm.grid import OccupancyGrid

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@st.composite
def grids(draw, min_width=2, max_width=16):
    w = draw(st.integers(min_width // 2, max_width // 2)) * 2
    p = draw(st.sampled_from([0.0, 0.2, 0.5, 0.8, 1.0]))
    seed = draw(st.integers(0, 2**32))
    rng = np.random.default_rng(seed)
    return OccupancyGrid(rng.random((w, w)) < p)


@st.composite
def grid_and_target(draw, min_width=2, max_width=16):
    g = draw(grids(min_width, max_width))
    t = draw(st.integers(1, g.width // 2)) * 2
    return g, t


@pytest.fixture
def tmp_files(tmp_path):
    return tmp_path


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
