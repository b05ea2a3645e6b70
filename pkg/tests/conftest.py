import numpy as np
import pytest

from batchstate.model import LinearModel, observability_rank


def random_observable_model(rng, n, spectral_scale=0.85):
    """Random stable model, redrawn until the pair is observable."""
    for _ in range(50):
        A = rng.standard_normal((n, n))
        A *= spectral_scale / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12)
        C = rng.standard_normal(n)
        model = LinearModel(A=A, C=C)
        _, observable = observability_rank(model)
        if observable:
            return model
    raise RuntimeError("failed to draw an observable model")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
