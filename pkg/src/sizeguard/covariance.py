"""Stationary AR(p) correlation models in the partial-autocorrelation parameterization.

A vector ``rho`` in ``(-1, 1)^p`` of partial autocorrelations determines a
unique normalized stationary AR(p) spectral density and hence an ``n x n``
Toeplitz correlation matrix. The Cholesky factor of that matrix is obtained
directly from ``rho`` by the Durbin-Levinson recursion in ``O(n^2 p)``.

Also provided: the covariance of a Gaussian random walk, the covariance of an
AR(1) recursion started at zero, and a sampler that draws ``rho`` so that the
induced AR coefficients are uniform on the stationarity region.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from .exceptions import InputError, NumericalError

#: Partial autocorrelations this close to +-1 are rejected.
BOUNDARY_GAP = 1e-12


def check_pacf(rho) -> np.ndarray:
    """Validate and return ``rho`` as a float vector (``p = 0`` allowed)."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float)).ravel()
    if rho.size and not np.all(np.abs(rho) < 1.0 - BOUNDARY_GAP):
        raise InputError(f"partial autocorrelations must lie in (-1, 1): {rho}")
    return rho


@dataclass(frozen=True)
class PacfBox:
    """Feasible set ``(-1 + epsilon, 1 - epsilon)^p`` for the partial autocorrelations."""

    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise InputError("epsilon must lie in [0, 1)")

    @property
    def half_width(self) -> float:
        return 1.0 - self.epsilon


# ---------------------------------------------------------------------------
# Covariance kinds


@dataclass(frozen=True)
class ARPacf:
    rho: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(check_pacf(self.rho).tolist()))


@dataclass(frozen=True)
class RandomWalk:
    pass


@dataclass(frozen=True)
class AR1StartValue:
    coef: float

    def __post_init__(self):
        if not abs(self.coef) < 1.0:
            raise InputError("AR(1) coefficient must lie in (-1, 1)")


@dataclass(frozen=True)
class Identity:
    pass


CovKind = Union[ARPacf, RandomWalk, AR1StartValue, Identity]


# ---------------------------------------------------------------------------
# Durbin-Levinson


def _levinson_step(phi: np.ndarray, r: float) -> np.ndarray:
    # order k-1 -> k: phi_kj = phi_{k-1,j} - r phi_{k-1,k-j}, phi_kk = r
    return np.concatenate([phi - r * phi[::-1], [r]])


def pacf_to_ar_coeffs(rho) -> np.ndarray:
    """AR coefficients ``phi`` (``y_t = sum phi_j y_{t-j} + e_t``) with the given PACF."""
    phi = np.empty(0)
    for r in check_pacf(rho):
        phi = _levinson_step(phi, r)
    return phi


def ar_coeffs_to_pacf(phi) -> np.ndarray:
    """Inverse of :func:`pacf_to_ar_coeffs` (step-down recursion).

    Raises :class:`InputError` if ``phi`` is not in the stationarity region.
    """
    a = np.asarray(phi, dtype=float).ravel().copy()
    p = a.size
    out = np.empty(p)
    for k in range(p, 0, -1):
        r = a[k - 1]
        if not abs(r) < 1.0:
            raise InputError("coefficients outside the stationarity region")
        out[k - 1] = r
        if k > 1:
            prev = a[: k - 1]
            a = (prev + r * prev[::-1]) / (1.0 - r * r)
    return out


def pacf_to_acf(rho, nlags: int) -> np.ndarray:
    """Autocorrelations at lags ``0..nlags`` of the AR model with PACF ``rho``."""
    rho = check_pacf(rho)
    p = rho.size
    acf = np.empty(nlags + 1)
    acf[0] = 1.0
    phi = np.empty(0)
    v = 1.0
    for k in range(1, nlags + 1):
        if k <= p:
            r = rho[k - 1]
            acf[k] = phi @ acf[k - 1 : 0 : -1] + r * v if k > 1 else r
            phi = _levinson_step(phi, r)
            v *= 1.0 - r * r
        else:
            acf[k] = phi @ acf[k - 1 : k - 1 - p : -1] if p else 0.0
    return acf


def ar_corr_matrix(rho, n: int) -> np.ndarray:
    """Toeplitz correlation matrix ``Sigma(f_rho)`` of size ``n``."""
    return scipy.linalg.toeplitz(pacf_to_acf(rho, n - 1))


def cholesky_from_pacf(rho, n: int) -> np.ndarray:
    """Lower Cholesky factor of :func:`ar_corr_matrix` computed from ``rho`` directly.

    Row ``t`` follows the one-step prediction ``y_t = sum_j phi_{t,j} y_{t-j} + e_t``
    with innovation variance ``v_t``; no ``n x n`` factorization is performed.
    """
    rho = check_pacf(rho)
    p = rho.size
    L = np.zeros((n, n))
    L[0, 0] = 1.0
    phi = np.empty(0)
    v = 1.0
    for t in range(1, n):
        if t <= p:
            r = rho[t - 1]
            phi = _levinson_step(phi, r)
            v *= 1.0 - r * r
        m = phi.size
        if m:
            L[t, :t] = phi @ L[t - m : t, :t][::-1]  # rows t-1, ..., t-m
        L[t, t] = np.sqrt(v)
    return L


def random_walk_cov(n: int) -> np.ndarray:
    """Covariance ``min(i, j)`` of partial sums of unit-variance white noise."""
    idx = np.arange(1, n + 1)
    return np.minimum.outer(idx, idx).astype(float)


def ar1_startvalue_cov(rho_coef: float, n: int) -> np.ndarray:
    """Covariance of ``u_t = rho u_{t-1} + e_t`` started at ``u_0 = 0``."""
    rho_coef = float(rho_coef)
    if not abs(rho_coef) < 1.0:
        raise InputError("AR(1) coefficient must lie in (-1, 1)")
    idx = np.arange(1, n + 1)
    lo = np.minimum.outer(idx, idx)
    lag = np.abs(np.subtract.outer(idx, idx))
    if rho_coef == 0.0:
        return np.eye(n)
    return rho_coef**lag * (1.0 - rho_coef ** (2 * lo)) / (1.0 - rho_coef**2)


def dense_cholesky(S: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(S, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance matrix is not numerically positive definite: {exc}") from exc


def cov_matrix(kind: CovKind, n: int) -> np.ndarray:
    if isinstance(kind, ARPacf):
        return ar_corr_matrix(kind.rho, n)
    if isinstance(kind, RandomWalk):
        return random_walk_cov(n)
    if isinstance(kind, AR1StartValue):
        return ar1_startvalue_cov(kind.coef, n)
    if isinstance(kind, Identity):
        return np.eye(n)
    raise InputError(f"unknown covariance kind {kind!r}")


def cov_factor(kind: CovKind, n: int) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L' ``equal to the covariance of ``kind``."""
    if isinstance(kind, ARPacf):
        return cholesky_from_pacf(kind.rho, n)
    if isinstance(kind, Identity):
        return np.eye(n)
    if isinstance(kind, RandomWalk):
        return np.tril(np.ones((n, n)))
    return dense_cholesky(cov_matrix(kind, n))


# ---------------------------------------------------------------------------
# Sampling


def jones_beta_params(k: int) -> tuple[int, int]:
    """Beta parameters of ``(rho_k + 1)/2`` under the uniform law on AR coefficients."""
    return (k + 1) // 2, k // 2 + 1


def jones_sample(p: int, box: PacfBox | float = 0.0, rng: np.random.Generator | None = None,
                 size: int | None = None) -> np.ndarray:
    """Draw partial autocorrelations inducing uniform AR(p) coefficients.

    The k-th coordinate is ``2 B_k - 1`` with independent
    ``B_k ~ Beta(floor((k+1)/2), floor(k/2) + 1)``; the draw is then scaled by
    ``1 - epsilon``. Returns shape ``(p,)`` or ``(size, p)``.
    """
    if p < 1:
        raise InputError("jones_sample needs p >= 1")
    if not isinstance(box, PacfBox):
        box = PacfBox(float(box))
    rng = np.random.default_rng() if rng is None else rng
    shape = (1 if size is None else int(size), p)
    out = np.empty(shape)
    for k in range(1, p + 1):
        a, b = jones_beta_params(k)
        out[:, k - 1] = 2.0 * rng.beta(a, b, size=shape[0]) - 1.0
    lim = 1.0 - 2.0 * BOUNDARY_GAP
    np.clip(out, -lim, lim, out=out)
    out *= box.half_width
    return out[0] if size is None else out


def padded_candidates(p: int, orders, count: int, box: PacfBox, rng_for_order) -> np.ndarray:
    """Stack Jones draws of each order in ``orders``, zero-padded to length ``p``."""
    blocks = []
    for order in orders:
        draws = jones_sample(order, box, rng_for_order(order), size=count)
        blocks.append(np.hstack([draws, np.zeros((count, p - order))]))
    return np.vstack(blocks)
