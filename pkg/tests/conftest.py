import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dermarket import DerParams, SupplyModel, make_curve

settings.register_profile(
    "ci", derandomize=True, max_examples=80, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


def random_asset(rng: np.random.Generator, a_range=(0.5, 1.0)) -> DerParams:
    """One controllable asset with moderate, same-sign-friendly scales."""
    a = rng.uniform(*a_range)
    x_lo = rng.uniform(0.0, 5.0)
    x_hi = x_lo + rng.uniform(2.0, 10.0)
    d_hi = rng.uniform((1.0 - a) * x_lo + 0.2, (1.0 - a) * x_lo + 3.0)
    d_lo = rng.uniform(-2.0, min(0.0, (1.0 - a) * x_hi) - 1e-9)
    return DerParams(
        a=a, x_lo=x_lo, x_hi=x_hi, d_lo=d_lo, d_hi=d_hi,
        q=rng.uniform(0.5, 3.0), r=rng.uniform(-2.0, 1.0), c=rng.uniform(-2.0, 8.0),
    )


def random_market(rng: np.random.Generator, m: int):
    """Population + supply + in-box state + curves, for clearing tests."""
    population = [random_asset(rng) for _ in range(m)]
    sm = SupplyModel(beta1=rng.uniform(0.01, 0.3), beta2=rng.uniform(0.5, 10.0))
    x = np.array([rng.uniform(p.x_lo, p.x_hi) for p in population])
    curves = [make_curve(p, xi) for p, xi in zip(population, x)]
    return population, sm, x, curves


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
