import numpy as np
import pytest

from oulab import build_model, standard_model, substream


@pytest.fixture(scope="session")
def std1():
    return standard_model(1)


@pytest.fixture(scope="session")
def std2():
    return standard_model(2)


def random_stable_model(seed: int, n: int):
    """A random well-conditioned diffusion: SPD Q, drift with spectrum in
    the open left half plane (symmetric negative part plus a skew part)."""
    gen = substream(seed, 9000 + n)
    a = gen.standard_normal((n, n))
    Q = a @ a.T + 0.2 * np.eye(n)
    s = gen.standard_normal((n, n))
    B = 0.5 * (s - s.T) - (s @ s.T * 0.1 + 0.3 * np.eye(n))
    return build_model(Q, B)


@pytest.fixture
def model_factory():
    return random_stable_model
