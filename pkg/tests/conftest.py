import pathlib

import numpy as np
import pytest

from pwbandits import run_single
from pwbandits.environments import PiecewiseEnv, Segment

ROOT = pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def problems_dir():
    return ROOT / "problems"


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger JIT compilation once so timed tests measure algorithms, not numba."""
    env = PiecewiseEnv(
        2, 30, [Segment(1, (0.2, 0.8)), Segment(16, (0.8, 0.2))]
    )
    for name, params in [
        ("klucb", None),
        ("oracle", None),
        ("glr-klucb-local", {"alpha": 0.1, "delta": 0.1}),
        ("glr-klucb-global", {"alpha": 0.1, "delta": 0.1, "threshold_family": "full"}),
        ("cusum-klucb", {"m_init": 5, "epsilon": 0.05, "threshold": 2.0}),
        ("m-klucb", {"window": 4, "threshold": 0.5, "gamma": 0.2}),
    ]:
        run_single(env, name, params, seed=0, stride=5)


def make_env(arms, horizon, starts, rows):
    segs = [Segment(start=s, means=tuple(r)) for s, r in zip(starts, rows)]
    return PiecewiseEnv(arms, horizon, segs)


@pytest.fixture
def two_arm_stationary():
    return make_env(2, 2000, [1], [[0.1, 0.9]])


def bernoulli_stream(rng, mu, n):
    return (rng.random(n) < mu).astype(np.float64)
