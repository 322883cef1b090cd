"""Shared test helpers: an independent finite-difference oracle and a
relative-error metric. These are deliberately separate implementations
from anything inside the package so the analytic backward passes are
checked against code that cannot share their bugs.
"""

import numpy as np
import pytest


def central_differences(f, arrays, step=1e-5):
    """Gradient of scalar f() w.r.t. each array, probing entries in place."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            fp = f()
            arr[idx] = orig - step
            fm = f()
            arr[idx] = orig
            g[idx] = (fp - fm) / (2.0 * step)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric, floor=1e-8):
    """Worst per-coordinate |a - n| / max(floor, |a|, |n|)."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(n)))
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
