"""Synthetic designs shared by the demo scripts."""

import numpy as np


def intercept_trend_regressor(n: int = 100, seed: int = 2024) -> np.ndarray:
    rng = np.random.default_rng(seed)
    t = np.arange(1, n + 1, dtype=float)
    return np.column_stack([np.ones(n), t, rng.normal(size=n)])
