"""Shared fixtures: one small classification task and its logistic model."""
import pytest

from stalesgd import Logistic, SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def blob_data():
    spec = SyntheticSpec(n=60, d_in=4, feature_bound=1.0, separation=2.5)
    return generate_synthetic(spec, seed=321)


@pytest.fixture(scope="session")
def logistic_model(blob_data):
    return Logistic(blob_data.d_in, feature_bound=1.0)
