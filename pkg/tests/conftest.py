"""
Fixtures compartilhadas: contextos pequenos com chaves de semente fixa.
"""

import numpy as np
import pytest

from src.services.bfv import BfvContext, SchemeParams, default_rotation_steps
from src.services.hermes_pack import HermesEngine, OpTrace


class KeySet:
    def __init__(self, params, seed):
        self.params = params
        self.context = BfvContext(params, seed=seed)
        self.secret_key, self.public_key = self.context.keygen(seed=seed + 1)
        self.galois_keys = self.context.gen_rotation_keys(
            self.secret_key, default_rotation_steps(params.slot_count), seed=seed + 2
        )

    def engine(self, **kwargs):
        kwargs.setdefault("secret_key", self.secret_key)
        kwargs.setdefault("trace", OpTrace())
        return HermesEngine(self.context, self.public_key, self.galois_keys, **kwargs)


@pytest.fixture(scope="session")
def toy():
    """N=8, t=17, n=4."""
    return KeySet(SchemeParams.create(8, 17, 2), seed=11)


@pytest.fixture(scope="session")
def desk16():
    """N=16, t=65537, n=8."""
    return KeySet(SchemeParams.create(16, 65537, 3), seed=21)


@pytest.fixture(scope="session")
def desk32():
    """N=32, t=65537, n=16."""
    return KeySet(SchemeParams.create(32, 65537, 3), seed=31)


@pytest.fixture
def engine(desk16):
    return desk16.engine()


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
