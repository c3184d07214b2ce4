"""Size control diagnostics for autocorrelation robust tests in linear regression.

Submodules
----------
design_algebra
    trigonometric design matrices, difference operators, subspace orders
covariance
    AR(p) correlation models in the partial-autocorrelation parameterization
teststats
    OLS machinery and the robust Wald-type statistics
conditions
    checks of the size-control conditions for a design and restriction
algorithms
    size-controlling critical values and worst-case sizes by Monte Carlo
cli
    command line front end
"""

from .exceptions import InputError, NumericalError, SizeGuardError

__version__ = "0.1.0"

__all__ = ["InputError", "NumericalError", "SizeGuardError", "__version__"]
