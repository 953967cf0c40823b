import sys
from pathlib import Path

import numpy as np
import pytest

# Allow running the tests straight from a checkout without installing.
_SRC = Path(__file__).resolve().parent.parent / "src"
try:
    import lossfair  # noqa: F401
except ImportError:
    sys.path.insert(0, str(_SRC))

from lossfair.data import Dataset
from lossfair.synthgen import SynthConfig, gen_sp_dataset


def make_dataset(features, labels, sensitive, name="fixture"):
    """Build a Dataset from raw features (bias column appended here)."""
    features = np.asarray(features, dtype=np.float64)
    ones = np.ones((features.shape[0], 1))
    return Dataset(np.hstack([features, ones]), labels, sensitive, name)


@pytest.fixture(scope="session")
def tiny_sp():
    # 400 rows keeps constrained solves well under a second
    return gen_sp_dataset(SynthConfig(400, seed=7))


@pytest.fixture(scope="session")
def small_sp():
    return gen_sp_dataset(SynthConfig(1200, seed=3))
