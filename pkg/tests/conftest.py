import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def naive_kde_log_density(support, query, h):
    """Double-loop KDE oracle, independent of the panel kernels."""
    import math
    m, dim = support.shape
    total = 0.0
    for i in range(m):
        sq = 0.0
        for k in range(dim):
            sq += (query[k] - support[i][k]) ** 2
        total += math.exp(-sq / (2.0 * h * h))
    return math.log(total / m) - 0.5 * dim * math.log(2.0 * math.pi * h * h)
