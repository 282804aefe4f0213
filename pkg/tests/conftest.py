import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def assert_grad_close(analytic, numeric, rel=1e-4, abs_tol=1e-7):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    bad = np.abs(analytic - numeric) > np.maximum(abs_tol, rel * scale)
    assert not bad.any(), (
        f"gradient mismatch at {np.argwhere(bad)[:5]}: "
        f"analytic {analytic[bad][:5]} vs numeric {numeric[bad][:5]}"
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
