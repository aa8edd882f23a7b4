from __future__ import annotations

import numpy as np
import pytest

from tests.helpers import make_trace


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def walk_trace(rng: np.random.Generator):
    """480 one-second points of a 50 Hz random walk, stamped 1..480 s."""
    freqs = 50.0 + np.cumsum(rng.normal(0.0, 0.002, 480))
    return make_trace(freqs, window_s=2.0)
