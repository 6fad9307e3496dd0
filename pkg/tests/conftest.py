import math
import os
import sys
import time

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from hessnse import generate_test_field, integrate, make_grid  # noqa: E402

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

# Wall-clock seconds spent building each shared trajectory fixture.
BUILD_SECONDS = {}


def timed(name, build):
    start = time.perf_counter()
    out = build()
    BUILD_SECONDS[name] = time.perf_counter() - start
    return out


@pytest.fixture(scope="session")
def grid16():
    return make_grid(16, 0.1)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(32, 0.1)


@pytest.fixture(scope="session")
def random32(grid32):
    return generate_test_field("random_solenoidal", 0, grid32)


@pytest.fixture(scope="session")
def tg_trajectory():
    """Taylor-Green, n=32, nu=0.1, dt=1e-3 to t=1, snapshots every 10 steps."""
    grid = make_grid(32, 0.1)
    u0 = generate_test_field("taylor_green_2d", 0, grid)
    return timed("tg_trajectory", lambda: integrate(
        u0, 1e-3, 1.0, snapshot_stride=10, betas=(2.0, 4.0 / 3.0, math.inf),
        serrin_betas=(math.inf, 4.0), keep_snapshots=True))


@pytest.fixture(scope="session")
def random_trajectory():
    """Random solenoidal run, n=32, nu=0.05, dt=1e-3 to T=1 with stored snapshots."""
    grid = make_grid(32, 0.05)
    u0 = generate_test_field("random_solenoidal", 0, grid)
    return timed("random_trajectory", lambda: integrate(
        u0, 1e-3, 1.0, snapshot_stride=10, betas=(2.0, math.inf),
        triples=((1, 2, 3), (2, 3, 1), (3, 1, 2)), keep_snapshots=True))


@pytest.fixture(scope="session")
def abc_trajectory():
    grid = make_grid(32, 0.1)
    u0 = generate_test_field("abc_flow", 0, grid)
    return integrate(u0, 1e-3, 0.2, snapshot_stride=10, betas=(2.0, math.inf),
                     keep_snapshots=True)
