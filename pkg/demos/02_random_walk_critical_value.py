"""Critical value for the location model under random-walk errors.

With Bartlett weights and bandwidth 10 at n = 100, the 95% quantile of |t_w|
under a Gaussian random walk is close to 9.6, far above conventional values.
"""

import numpy as np

from sizeguard.algorithms import fixed_cov_quantile
from sizeguard.covariance import Identity, RandomWalk
from sizeguard.teststats import DesignProblem, StatisticSpec

n = 100
prob = DesignProblem(np.ones((n, 1)), [[1.0]], 0.0)
spec = StatisticSpec.bartlett("tw", n, 10, root=True)
for label, model in [("i.i.d.", Identity()), ("random walk", RandomWalk())]:
    q = fixed_cov_quantile(prob, spec, model, 0.95, 10_000, seed=0)
    print(f"{label:>12}: 95% quantile of |t_w| = {q:.3f}")
