import numpy as np
import pytest

from app.schemas.experiment import ExperimentConfig
from app.services.training import make_synthetic_embeddings


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def synthetic():
    """Four well-separated classes, 25 samples each."""
    return make_synthetic_embeddings(C=4, n_per_class=25, dim=16,
                                     cluster_tightness=8.0, seed=0)


@pytest.fixture
def exact_clusters():
    """Samples sitting exactly on their prototypes."""
    return make_synthetic_embeddings(C=3, n_per_class=10, dim=8,
                                     cluster_tightness=float("inf"), seed=1)


@pytest.fixture
def fast_config(tmp_path):
    return ExperimentConfig(epochs=3, batch_size=16, timings="off",
                            output_dir=str(tmp_path / "run"))
