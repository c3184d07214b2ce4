"""Size-controlling critical values over AR(1) and AR(2) errors.

Computes the critical value for |t_w| with the default tuning and confirms it
by simulating the rejection probability, with fresh draws, at the partial
autocorrelations where the search found the worst case.

Two things to try. Cutting the tuning (M0=500, N1=5000) gives a visibly
smaller AR(2) value: the worst case sits next to the boundary and a short
search does not reach it. Running ``size`` at the critical value is a weak
check, because the rejection probability is then essentially zero over most
of the parameter space and the search has nothing to climb.
About a minute on one core.
"""

from _designs import intercept_trend_regressor

from sizeguard.algorithms import AlgoConfig, critical_value, fixed_cov_rejection
from sizeguard.conditions import scan_noninclusion
from sizeguard.covariance import ARPacf
from sizeguard.teststats import DesignProblem, StatisticSpec

prob = DesignProblem(intercept_trend_regressor(), [[0.0, 0.0, 1.0]], 0.0)
spec = StatisticSpec.bartlett("tw", prob.n, root=True)
assert scan_noninclusion(prob, spec).passed

for p in (1, 2):
    cv = critical_value(prob, spec, AlgoConfig(p=p, seed=3))
    worst = ARPacf(tuple(cv.argmax_pacf))
    rate = fixed_cov_rejection(prob, spec, worst, cv.value, 100_000, seed=77)
    print(f"AR({p}): critical value {cv.value:.3f} (fixed-b value 2.261); "
          f"rejection rate {rate:.4f} at {[round(r, 4) for r in cv.argmax_pacf]}")
