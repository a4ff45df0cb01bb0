import numpy as np
import pytest

from fluidpricing import DemandModel, MultiDemandModel, benchmark_model


@pytest.fixture(scope="session")
def bernoulli_model() -> DemandModel:
    return benchmark_model()


@pytest.fixture(scope="session")
def additive_model() -> DemandModel:
    return DemandModel.linear_additive(alpha=0.75, beta=0.5, p_lo=0.0, p_hi=1.0,
                                       noise_half_width=0.1)


@pytest.fixture(scope="session")
def multi_model() -> MultiDemandModel:
    return MultiDemandModel(g=[1.0, 1.0], H=[[-2.0, -0.5], [-0.5, -2.0]], box_hi=[1.0, 1.0])


def random_multi_model(rng: np.random.Generator, n: int) -> MultiDemandModel:
    """Random strictly concave quadratic instance with an interior optimum."""
    A = rng.normal(size=(n, n)) / np.sqrt(n)
    H = -(A @ A.T + (0.5 + rng.random()) * np.eye(n))
    box_hi = np.ones(n)
    # pick g so the unconstrained optimum sits strictly inside the box
    target = 0.15 + 0.6 * rng.random(n)
    g = -H @ target
    return MultiDemandModel(g=g, H=H, box_hi=box_hi)
