import numpy as np
import pytest

from klwalk import CostFunction, StochasticMatrix


def random_ergodic_kernel(rng: np.random.Generator, n: int) -> StochasticMatrix:
    """Strictly positive rows (flat Dirichlet), hence primitive."""
    return StochasticMatrix(rng.dirichlet(np.ones(n), size=n))


def random_cost(rng: np.random.Generator, n: int, cap: float = 1.0) -> CostFunction:
    return CostFunction(rng.random(n) * cap)


@pytest.fixture
def rng():
    return np.random.default_rng(987654321)
