"""Which restrictions admit size control?

For an intercept + trend + regressor design we scan the non-containment
condition twice: once for a test on the regressor coefficient and once for a
test on the intercept. The first passes; the second fails at frequency zero,
because the constant vector cannot be separated from the null mean space.
"""

from _designs import intercept_trend_regressor

from sizeguard.conditions import rho_profile, scan_noninclusion
from sizeguard.teststats import DesignProblem

X = intercept_trend_regressor()
slope = DesignProblem(X, [[0.0, 0.0, 1.0]])
intercept = DesignProblem(X, [[1.0, 0.0, 0.0]])

print("exceptional frequencies of the null mean space:", rho_profile(slope))
for label, prob in [("regressor coefficient", slope), ("intercept", intercept)]:
    for stat in ("tw", "eicker"):
        rep = scan_noninclusion(prob, stat)
        print(f"{label:>22} / {stat:<6} passed={rep.passed!s:<5} "
              f"min criterion {rep.min_criterion:.3e} at {rep.argmin_frequency:.3g}")
