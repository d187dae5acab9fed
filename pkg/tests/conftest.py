import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from granuloma.grid import BoxDomain, SimState

# jit-compiled kernels make the first example slow; wall-time deadlines
# would flake, so they are disabled across the suite
settings.register_profile(
    "suite", deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("suite")


@pytest.fixture
def dom64():
    return BoxDomain(extents=(1.0,), cells=(64,))


@pytest.fixture
def dom2d():
    return BoxDomain(extents=(1.0, 1.5), cells=(24, 36))


def random_state(dom: BoxDomain, seed: int, amp: float = 1.0,
                 t: float = 0.0) -> SimState:
    """Nonnegative random fields, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    f = {name: amp * rng.uniform(0.0, 1.0, dom.cells)
         for name in ("u", "v", "w", "z")}
    return SimState(t=t, **f)
