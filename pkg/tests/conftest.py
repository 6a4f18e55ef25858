import numpy as np
import pytest

from projcorr import DenseOperator


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def random_full_row_rank(rng, m, n, min_singular=0.3):
    """Random dense m x n operator with smallest singular value bounded away
    from zero, so it is genuinely full row rank."""
    assert m <= n
    for _ in range(1000):
        a = rng.standard_normal((m, n))
        if np.linalg.svd(a, compute_uv=False)[-1] >= min_singular:
            return DenseOperator(a)
    raise AssertionError("could not draw a well-conditioned full-row-rank matrix")


@pytest.fixture
def full_row_rank_factory(rng):
    def factory(m, n, min_singular=0.3):
        return random_full_row_rank(rng, m, n, min_singular)

    return factory
