import math
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from illiq.kernel import PiecewiseConvex

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_pwl(rng, bounded_left=None, bounded_right=None, k=None):
    """Random closed convex piecewise-linear function."""
    k = int(rng.integers(1, 6)) if k is None else k
    bps = np.sort(rng.uniform(-5, 5, size=k))
    while np.any(np.diff(bps) < 1e-3):
        bps = np.sort(rng.uniform(-5, 5, size=k))
    slopes = np.sort(rng.normal(scale=2.0, size=k + 1))
    if bounded_left is None:
        bounded_left = rng.random() < 0.25
    if bounded_right is None:
        bounded_right = rng.random() < 0.25
    slopes = list(slopes)
    if bounded_left and k >= 2:
        slopes[0] = -math.inf
    if bounded_right and k >= 2:
        slopes[-1] = math.inf
    return PiecewiseConvex.pwl(list(bps), slopes, (float(bps[0]), float(rng.normal())))


@st.composite
def pwl_functions(draw):
    k = draw(st.integers(1, 5))
    bps = sorted(draw(st.lists(st.integers(-40, 40), min_size=k, max_size=k, unique=True)))
    slopes = sorted(draw(st.lists(st.integers(-30, 30), min_size=k + 1, max_size=k + 1)))
    anchor = draw(st.integers(-10, 10))
    left = draw(st.booleans()) and k >= 2
    right = draw(st.booleans()) and k >= 2
    s = [v / 4 for v in slopes]
    if left:
        s[0] = -math.inf
    if right:
        s[-1] = math.inf
    return PiecewiseConvex.pwl([b / 8 for b in bps], s, (bps[0] / 8, anchor / 2))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k][1])
