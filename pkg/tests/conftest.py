import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")

REPO = Path(__file__).resolve().parents[1]
STUB = REPO / "scripts" / "stub_adapter.py"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
