import numpy as np
import pytest
from hypothesis import settings

from sizeguard.teststats import DesignProblem

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_problem(rng: np.random.Generator, n: int | None = None, k: int | None = None,
                   q: int | None = None, intercept: bool = True, r_scale: float = 1.0) -> DesignProblem:
    """Intercept (optional) plus Gaussian regressors and a random restriction."""
    n = int(rng.integers(12, 40)) if n is None else n
    k = int(rng.integers(2, 5)) if k is None else k
    q = int(rng.integers(1, k + 1)) if q is None else q
    cols = [np.ones(n)] if intercept else []
    cols += [rng.normal(size=n) for _ in range(k - len(cols))]
    X = np.column_stack(cols)
    # singular values in [0.5, 2] keep mu0 of moderate size
    U = np.linalg.qr(rng.normal(size=(q, q)))[0]
    V = np.linalg.qr(rng.normal(size=(k, q)))[0]
    R = U @ np.diag(rng.uniform(0.5, 2.0, size=q)) @ V.T
    r = r_scale * rng.normal(size=q)
    return DesignProblem(X, R, r)


def trend_design(n: int, seed: int) -> np.ndarray:
    """Intercept, linear trend and one seeded Gaussian regressor."""
    rng = np.random.default_rng(seed)
    t = np.arange(1, n + 1, dtype=float)
    return np.column_stack([np.ones(n), t, rng.normal(size=n)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
