import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def random_code(rng, rows=18, cols=512):
    """Random float32-valued latent block (float32 so LTF round-trips exactly)."""
    return rng.normal(size=(rows, cols)).astype(np.float32).astype(np.float64)
