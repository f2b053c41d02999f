import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=None, max_examples=25)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_matrix(weights):
    """CombinationMatrix from a weight list, for hand-built fixtures."""
    from beliefgraph import CombinationMatrix

    w = np.asarray(weights, dtype=float)
    return CombinationMatrix(w.shape[0], w)


def make_model(betas, z_counts=None):
    """LikelihoodModel from an explicit (n, z, theta) table."""
    from beliefgraph import LikelihoodModel
    from beliefgraph.likelihoods import _exact_log_ratio_bound

    b = np.asarray(betas, dtype=float)
    if z_counts is None:
        z_counts = np.full(b.shape[0], b.shape[1], dtype=np.int64)
    else:
        z_counts = np.asarray(z_counts, dtype=np.int64)
    return LikelihoodModel(
        n=b.shape[0],
        theta_count=b.shape[2],
        z_counts=z_counts,
        betas=b,
        log_ratio_bound=_exact_log_ratio_bound(b, z_counts),
    )
