"""Worst-case size of the fixed-b critical value over AR(1) and AR(2) errors.

Rejecting when |t_w| >= 2.260568 is nominally a 5% test, yet the maximal
rejection probability over stationary autoregressive errors is far larger.
Tuning is reduced so the script runs in seconds.
"""

from _designs import intercept_trend_regressor

from sizeguard.algorithms import AlgoConfig, size
from sizeguard.teststats import DesignProblem, StatisticSpec

prob = DesignProblem(intercept_trend_regressor(), [[0.0, 0.0, 1.0]], 0.0)
spec = StatisticSpec.bartlett("tw", prob.n, root=True)
for p in (1, 2):
    cfg = AlgoConfig(p=p, M0=200, M1=4, M2=1, N0=500, N1=2000, N2=10_000, seed=1)
    res = size(prob, spec, 2.260568, cfg)
    print(f"AR({p}): worst-case size {res.value:.3f} at partial autocorrelations {[round(r, 4) for r in res.argmax_pacf]}")
