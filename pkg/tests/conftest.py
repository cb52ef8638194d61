import numpy as np
import pytest

from survbench.core import Dataset
from survbench.simulate import SimConfig, generate_dataset


@pytest.fixture(scope="session")
def paper_data():
    return generate_dataset(SimConfig(n=500, seed=0))


def random_survival(rng, n, d=1, tie_prob=0.0):
    """Random covariates and censored outcomes with optional time ties."""
    x = rng.normal(size=(n, d))
    time = rng.exponential(size=n) + 0.01
    if tie_prob:
        ties = rng.random(n) < tie_prob
        time[ties] = np.round(time[ties], 1) + 0.1
    event = rng.random(n) < 0.7
    return Dataset.complete(x, time, event)
