"""OLS machinery and autocorrelation robust Wald-type statistics.

Four statistics share the quadratic form ``(R b - r)' Omega^{-1} (R b - r)``
and differ only in the covariance estimate ``Omega``:

``tw``
    kernel long-run variance estimator of ``u_t x_t'`` with lag weights
    ``w(j, n)`` (the classical HAC / Newey-West-type statistic);
``eicker``
    weighted Eicker estimator ``n^{-1} X'(K(y) o W) X`` built from the
    residual autocovariances ``K(y)`` and a Toeplitz weight matrix ``W``;
``gq``
    general quadratic estimator ``sum_{t,s} w(t,s) v_t v_s'`` with a full
    symmetric weight matrix;
``tref``
    scalar long-run variance of the residuals times ``R (X'X)^{-1} R'``.

The statistic is set to 0 where ``Omega`` is singular. Everything is
vectorized over the columns of an ``n x N`` panel so that Monte-Carlo
evaluation is a handful of BLAS calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .design_algebra import TAU_SPAN
from .exceptions import InputError

#: Relative threshold for declaring ``Omega`` (or ``B(y)``) singular.
TAU_SING = 1e-10

STATISTICS = ("tw", "eicker", "gq", "tref")


@dataclass(frozen=True, eq=False)
class DesignProblem:
    """Design ``X`` (n x k) and affine restriction ``R beta = r`` (q x k, q)."""

    X: np.ndarray
    R: np.ndarray
    r: np.ndarray | float = 0.0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n, k = X.shape
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if R.shape[1] != k:
            raise InputError(f"R has {R.shape[1]} columns, X has {k}")
        q = R.shape[0]
        r = np.broadcast_to(np.asarray(self.r, dtype=float), (q,)).copy()
        if not 1 <= k < n:
            raise InputError(f"need 1 <= k < n, got n={n}, k={k}")
        if np.linalg.matrix_rank(X) != k:
            raise InputError("X must have full column rank")
        if np.linalg.matrix_rank(R) != q:
            raise InputError("R must have full row rank")
        for name, val in (("X", X), ("R", R), ("r", r)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.R.shape[0]

    @cached_property
    def xtx_inv(self) -> np.ndarray:
        return np.linalg.inv(self.X.T @ self.X)

    @cached_property
    def Q(self) -> np.ndarray:
        """Orthonormal basis of ``span(X)``."""
        return np.linalg.qr(self.X)[0]

    @cached_property
    def A(self) -> np.ndarray:
        """``R (X'X)^{-1} X'`` (q x n); ``R beta_hat(y) = A y``."""
        return self.R @ self.xtx_inv @ self.X.T

    @cached_property
    def a_rowmax(self) -> float:
        return float(np.max(np.sum(self.A**2, axis=0)))

    @cached_property
    def beta0(self) -> np.ndarray:
        """Minimum-norm solution of ``R beta = r``."""
        return np.linalg.lstsq(self.R, self.r, rcond=None)[0]

    @cached_property
    def mu0(self) -> np.ndarray:
        """A fixed element of the null mean space ``M0``."""
        return self.X @ self.beta0

    def with_r(self, r) -> "DesignProblem":
        return DesignProblem(self.X, self.R, r)


def ols_fit(prob: DesignProblem, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """OLS coefficients and residuals; ``y`` may be a vector or an ``n x N`` panel."""
    y = np.asarray(y, dtype=float)
    beta = prob.xtx_inv @ (prob.X.T @ y)
    u = y - prob.Q @ (prob.Q.T @ y)
    return beta, u


# ---------------------------------------------------------------------------
# Weights


def bartlett_weights(n: int, M: float) -> np.ndarray:
    """One-sided Bartlett weights ``w(j) = max(0, 1 - j/M)`` for ``j = 0..n-1``."""
    if M <= 0:
        raise InputError("bandwidth must be positive")
    w = np.maximum(0.0, 1.0 - np.arange(n) / M)
    w[0] = 1.0
    return w


def toeplitz_weights(w: np.ndarray) -> np.ndarray:
    """Symmetric Toeplitz matrix with first row ``w``."""
    return scipy.linalg.toeplitz(np.asarray(w, dtype=float))


def check_weights_pd(w: np.ndarray) -> bool:
    """True iff the symmetric Toeplitz matrix of ``w`` is numerically positive definite."""
    w = np.asarray(w, dtype=float)
    if w[0] != 1.0:
        return False
    ev = np.linalg.eigvalsh(toeplitz_weights(w))
    return bool(ev[0] > 1e-12 * ev[-1])


@dataclass(frozen=True, eq=False)
class StatisticSpec:
    """Which statistic to compute and with which weights.

    ``weights`` is the one-sided lag vector ``w(0..n-1)`` for ``tw`` and
    ``tref``, the first row of the Toeplitz matrix ``W`` for ``eicker``, and a
    full symmetric ``n x n`` matrix for ``gq``. With ``root=True`` (``q = 1``
    only) Monte-Carlo routines work with ``|t|`` instead of the quadratic form.
    """

    kind: str
    weights: np.ndarray
    root: bool = False

    def __post_init__(self):
        if self.kind not in STATISTICS:
            raise InputError(f"unknown statistic {self.kind!r}; expected one of {STATISTICS}")
        w = np.asarray(self.weights, dtype=float)
        if self.kind == "gq":
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise InputError("gq weights must be a square matrix")
            if not np.allclose(w, w.T, rtol=0, atol=1e-12 * max(1.0, np.abs(w).max())):
                raise InputError("gq weight matrix must be symmetric")
        else:
            if w.ndim != 1 or w.size == 0 or w[0] != 1.0:
                raise InputError("lag weights must be a vector with w(0) = 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def bartlett(cls, kind: str, n: int, M: float | None = None, root: bool = False) -> "StatisticSpec":
        """Bartlett weights with bandwidth ``M`` (default ``n / 10``)."""
        M = n / 10.0 if M is None else M
        if kind == "gq":
            return cls("gq", toeplitz_weights(bartlett_weights(n, M)) / n, root)
        return cls(kind, bartlett_weights(n, M), root)

    def lag_weights(self, n: int) -> np.ndarray:
        w = self.weights
        if w.size < n:
            w = np.r_[w, np.zeros(n - w.size)]
        return w[:n]

    @cached_property
    def family(self) -> str:
        """``"B"`` when the singular set is ``B``; ``"X"`` when it is ``span(X)``."""
        return "X" if self.kind in ("eicker", "tref") else "B"


@dataclass(frozen=True)
class StatResult:
    value: float
    singular: bool


# ---------------------------------------------------------------------------
# Batched core


def _lag_products(Z: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """``sum_t Z[:, t] Z[:, t-j]'`` for each lag ``j``; ``Z`` is (q, n, N).

    Returns shape (len(lags), N, q, q).
    """
    n = Z.shape[1]
    out = np.empty((lags.size, Z.shape[2], Z.shape[0], Z.shape[0]))
    for i, j in enumerate(lags):
        out[i] = np.einsum("atN,btN->Nab", Z[:, j:], Z[:, : n - j])
    return out


def _residual_autocov(U: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """``K_j = n^{-1} sum_{l>j} u_l u_{l-j}`` for each lag, shape (len(lags), N)."""
    n = U.shape[0]
    if lags.size > 32:
        m = 1 << int(np.ceil(np.log2(2 * n)))
        F = np.fft.rfft(U, n=m, axis=0)
        full = np.fft.irfft(F * np.conj(F), n=m, axis=0)[:n]
        return full[lags] / n
    return np.stack([np.einsum("tN,tN->N", U[j:], U[: n - j]) for j in lags]) / n


def _weighted_quadratic(Z: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, float]:
    """``sum_{t,s} w(|t-s|) z_t z_s'`` (N, q, q), plus ``||Toeplitz(w)||_2`` bound."""
    n = Z.shape[1]
    lags = np.flatnonzero(w[:n])
    bound = float(np.abs(w[:n]).sum() * 2 - abs(w[0]))
    if lags.size <= max(8, n // 4):
        G = _lag_products(Z, lags)
        coef = w[lags]
        Om = np.einsum("j,jNab->Nab", coef, G)
        nz = lags > 0
        Om += np.einsum("j,jNab->Nba", coef[nz], G[nz])
        return Om, bound
    W = toeplitz_weights(w[:n])
    WZ = np.einsum("ts,asN->atN", W, Z)
    return np.einsum("atN,btN->Nab", Z, WZ), bound


def omega_hat(prob: DesignProblem, spec: StatisticSpec, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Covariance estimates ``Omega`` (N, q, q) for the residual panel ``U`` (n, N).

    Also returns a per-column scale against which singularity is judged; the
    scale is an upper bound for ``||Omega||`` that is homogeneous of degree 2
    in ``U``, so the singular decision is invariant to rescaling ``y - mu0``.
    """
    n, q = prob.n, prob.q
    A = prob.A
    usq = np.einsum("tN,tN->N", U, U)
    if spec.kind in ("tw", "gq"):
        Z = A[:, :, None] * U[None, :, :]
        if spec.kind == "tw":
            Om, wnorm = _weighted_quadratic(Z, spec.lag_weights(n))
        else:
            W = spec.weights
            if W.shape != (n, n):
                raise InputError(f"gq weight matrix must be {n}x{n}")
            WZ = np.einsum("ts,asN->atN", W, Z)
            Om = n * np.einsum("atN,btN->Nab", Z, WZ)
            wnorm = n * float(np.abs(np.linalg.eigvalsh(W)).max())
        scale = wnorm * prob.a_rowmax * usq
    elif spec.kind == "eicker":
        w = spec.lag_weights(n)
        lags = np.flatnonzero(w)
        K = _residual_autocov(U, lags)  # (L, N)
        S = _design_lag_sums(prob, lags)  # (L, q, q)
        Om = np.einsum("jN,j,jab->Nab", K, w[lags], S)
        scale = float(np.abs(w).max()) * float(np.linalg.norm(A, 2) ** 2) * usq
    else:  # tref
        w = spec.lag_weights(n)
        lags = np.flatnonzero(w)
        K = _residual_autocov(U, lags)
        coef = np.where(lags == 0, 1.0, 2.0) * w[lags]
        omega = coef @ K
        RXR = prob.R @ prob.xtx_inv @ prob.R.T
        Om = omega[:, None, None] * RXR[None]
        scale = (2 * np.abs(w).sum()) * float(np.linalg.norm(RXR, 2)) * usq / n
    return Om, scale


def _design_lag_sums(prob: DesignProblem, lags: np.ndarray) -> np.ndarray:
    A = prob.A
    n = prob.n
    out = np.empty((lags.size, prob.q, prob.q))
    for i, j in enumerate(lags):
        G = A[:, j:] @ A[:, : n - j].T
        out[i] = G if j == 0 else G + G.T
    return out


def statistic_panel(prob: DesignProblem, spec: StatisticSpec, Y: np.ndarray,
                    return_singular: bool = False, signed_root: bool = False):
    """Evaluate the statistic on every column of ``Y`` (n, N).

    Returns the quadratic-form values, or with ``signed_root`` the signed
    t-type values (``q = 1``). Singular columns get the value 0.
    """
    Y = np.asarray(Y, dtype=float)
    vector = Y.ndim == 1
    if vector:
        Y = Y[:, None]
    U = Y - prob.Q @ (prob.Q.T @ Y)
    d = prob.A @ Y - prob.r[:, None]  # (q, N)
    Om, scale = omega_hat(prob, spec, U)
    ynorm = np.sqrt(np.einsum("tN,tN->N", Y, Y))
    tiny_resid = np.sqrt(np.einsum("tN,tN->N", U, U)) <= TAU_SING * ynorm
    if prob.q == 1:
        om = Om[:, 0, 0]
        singular = tiny_resid | (om <= TAU_SING * scale)
        safe = np.where(singular, 1.0, om)
        if signed_root:
            val = np.where(singular, 0.0, d[0] / np.sqrt(np.abs(safe)))
        else:
            val = np.where(singular, 0.0, d[0] ** 2 / safe)
    else:
        if signed_root:
            raise InputError("signed t-statistic requires q = 1")
        lam, V = np.linalg.eigh(Om)
        absmax = np.abs(lam).max(axis=1)
        singular = tiny_resid | (np.abs(lam).min(axis=1) <= TAU_SING * np.maximum(scale, absmax))
        proj = np.einsum("Nab,aN->Nb", V, d)
        lam_safe = np.where(singular[:, None], 1.0, lam)
        val = np.where(singular, 0.0, np.sum(proj**2 / lam_safe, axis=1))
    if vector:
        val, singular = float(val[0]), bool(singular[0])
    return (val, singular) if return_singular else val


def statistic(prob: DesignProblem, y: np.ndarray, spec: StatisticSpec) -> StatResult:
    """Quadratic-form statistic at a single observation ``y``."""
    val, singular = statistic_panel(prob, spec, np.asarray(y, dtype=float), return_singular=True)
    return StatResult(float(val), bool(singular))


def t_root(prob: DesignProblem, y: np.ndarray, spec: StatisticSpec) -> float:
    """Signed square root of the statistic (``q = 1``): ``(R b - r) / Omega^{1/2}``."""
    if prob.q != 1:
        raise InputError("t_root requires q = 1")
    return float(statistic_panel(prob, spec, np.asarray(y, dtype=float), signed_root=True))


def psi_hat_w(prob: DesignProblem, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Kernel long-run covariance ``sum_j w(j) Gamma_j`` of ``v_t = u_t x_t'`` (k x k)."""
    _, u = ols_fit(prob, y)
    V = u[:, None] * prob.X  # rows v_t'
    n = prob.n
    w = np.asarray(w, dtype=float)
    psi = V.T @ V / n
    for j in np.flatnonzero(w[1:n]) + 1:
        G = V[j:].T @ V[: n - j] / n
        psi += w[j] * (G + G.T)
    return psi


def b_matrix(prob: DesignProblem, y: np.ndarray) -> np.ndarray:
    """``R (X'X)^{-1} X' diag(u_1(y), ..., u_n(y))`` (q x n)."""
    _, u = ols_fit(prob, y)
    return prob.A * u[None, :]


def is_in_B(prob: DesignProblem, y: np.ndarray) -> bool:
    """True iff ``rank(B(y)) < q`` numerically (the singular set of ``tw``)."""
    y = np.asarray(y, dtype=float)
    _, u = ols_fit(prob, y)
    if np.linalg.norm(u) <= TAU_SING * np.linalg.norm(y):
        return True
    B = prob.A * u[None, :]
    sv = np.linalg.svd(B, compute_uv=False)
    ref = np.sqrt(prob.a_rowmax) * np.abs(u).max()
    return bool(sv[-1] <= TAU_SING * ref)


def canonical_basis_in_span(prob: DesignProblem) -> np.ndarray:
    """Indices ``i`` (0-based) with ``e_i(n)`` in ``span(X)``."""
    # ||(I - QQ') e_i||^2 = 1 - ||Q[i]||^2
    resid = np.sqrt(np.maximum(0.0, 1.0 - np.sum(prob.Q**2, axis=1)))
    return np.flatnonzero(resid <= TAU_SPAN)


def check_assumption2(prob: DesignProblem) -> bool:
    """Rank condition on ``R (X'X)^{-1} X'`` after deleting columns ``e_i`` in ``span(X)``."""
    drop = canonical_basis_in_span(prob)
    A = np.delete(prob.A, drop, axis=1)
    if A.shape[1] == 0:
        return False
    sv = np.linalg.svd(A, compute_uv=False)
    return bool(sv.size >= prob.q and sv[prob.q - 1] > TAU_SPAN * np.linalg.norm(prob.A, 2))
