import numpy as np
import pytest

from nsanet import kernels
from nsanet.model import MlpModel

BACKENDS = kernels.available()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def make_model():
    """Factory for random well-formed models with live nodes."""

    def build(rng, h=6, p=4, C=1, scale=1.0) -> MlpModel:
        return MlpModel.create(
            W=scale * rng.normal(size=(h, p)) + 0.1,
            b=rng.normal(size=h),
            Beta=rng.normal(size=(h, C)),
            c=rng.normal(size=C),
        )

    return build
