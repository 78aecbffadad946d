import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_povm(dim: int, rng: np.random.Generator, outcomes: int = 4):
    """Generic full-rank POVM: E_b = S^-1/2 G_b^dag G_b S^-1/2."""
    gs = [rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)) for _ in range(outcomes)]
    pos = [g.conj().T @ g for g in gs]
    vals, vecs = np.linalg.eigh(sum(pos))
    inv_sqrt = vecs @ np.diag(vals**-0.5) @ vecs.conj().T
    return tuple(inv_sqrt @ p @ inv_sqrt for p in pos)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
