import itertools

import numpy as np
import pytest

from ddecop.model import DdeDims, DdeParams, LatentState


def tiny_params(depth=2, widths=(2, 1), n_obs=3, seed=0, scale=1.0):
    """Random small model with finite coefficients and interior probabilities."""
    rng = np.random.default_rng(seed)
    dims = DdeDims(depth, tuple(widths), n_obs)
    B = []
    for d in range(1, depth + 1):
        rows = n_obs if d == 1 else widths[d - 2]
        B.append(rng.normal(scale=scale, size=(rows, 1 + widths[d - 1])))
    gamma = rng.uniform(0.5, 2.0, size=n_obs)
    pi = rng.uniform(0.2, 0.8, size=widths[-1])
    return DdeParams(dims, B, gamma, pi)


def all_configurations(widths):
    """Iterate every joint binary configuration as a tuple of per-layer tuples."""
    spaces = [list(itertools.product((0, 1), repeat=k)) for k in widths]
    return itertools.product(*spaces)


def state_for_config(config, z_row):
    A = [np.asarray([layer], dtype=np.int8) for layer in config]
    return LatentState(A, np.asarray([z_row], dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
