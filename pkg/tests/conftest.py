import numpy as np
import pytest

from verhulst_solow.model import ModelParams


def random_params(rng, regime="finite", *, k_lo=0.2, k_hi=2.0, **overrides):
    """Random valid parameters with k_bar in [k_lo, k_hi]."""
    a1 = rng.uniform(0.2, 0.85)
    a2 = rng.uniform(0.2, 1.2)
    kw = dict(
        alpha1=a1, alpha2=a2,
        b_bar=rng.uniform(0.3, 2.0), k_bar=rng.uniform(k_lo, k_hi),
        d=rng.uniform(0.5, 2.0), s0=rng.uniform(0.5, 2.0),
    )
    if regime == "finite":
        kw["RT"] = rng.uniform(10.0, 1000.0)
    elif regime == "exponential":
        kw["RT"] = rng.uniform(10.0, 1000.0)
    kw.update(overrides)
    return ModelParams.from_rescaled(kw.pop("alpha1"), kw.pop("alpha2"), kw.pop("b_bar"), kw.pop("k_bar"), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture
def half_params():
    """alpha1 = alpha2 = 0.5, beta = 1, b_bar = k_bar = 1 (d = 1)."""
    return ModelParams.from_rescaled(0.5, 0.5, 1.0, 1.0, RT=50.0)


@pytest.fixture
def half_params_inf():
    return ModelParams.from_rescaled(0.5, 0.5, 1.0, 1.0)
