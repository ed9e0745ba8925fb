import numpy as np
import pytest
from hypothesis import settings

from adaptqp.core import Dataset, Domain, compute_pair_weights
from adaptqp.svm import SvmModel

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def make_instance(seed, m_s=3, m_t=3, n_t=4, n_s=6, k=2):
    """Random W-step inputs with every class present in both domains."""
    rng = np.random.default_rng(seed)

    def labels(n):
        return rng.permutation(np.concatenate([np.arange(1, k + 1),
                                               rng.integers(1, k + 1, n - k)]))

    source = Dataset(rng.standard_normal((n_s, m_s)), labels(n_s), Domain.SOURCE, k)
    target = Dataset(rng.standard_normal((n_t, m_t)), labels(n_t), Domain.TARGET, k)
    model = SvmModel(rng.standard_normal((k, m_s)), 0.3 * rng.standard_normal(k))
    return source, target, model, compute_pair_weights(source.labels, target.labels)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
