"""Trigonometric design matrices, difference operators and subspace orders.

The objects here are the algebraic substrate of the size-control conditions:
the ``n x 2`` matrices ``E_{n,s}(omega)`` with rows
``(j^s cos(j omega), j^s sin(j omega))``, their concatenations ``V``, the
banded difference-operator matrices ``D_m(Theta)``, the degree count
``kappa`` and the order ``rho(omega, L)`` at which ``span(E_{n,s}(omega))``
first escapes a subspace ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from .exceptions import InputError, NumericalError

#: Relative residual below which a vector counts as lying in a span.
TAU_SPAN = 1e-8

#: Relative pivot size below which a basis is declared rank deficient.
TAU_RANK = 1e-10

_ENDPOINT_ATOL = 1e-12


def _check_frequency(omega: float) -> float:
    omega = float(omega)
    if not (-_ENDPOINT_ATOL <= omega <= math.pi + _ENDPOINT_ATOL):
        raise InputError(f"frequency {omega!r} outside [0, pi]")
    return min(max(omega, 0.0), math.pi)


def is_endpoint(omega: float) -> bool:
    """True if ``omega`` is 0 or pi (up to 1e-12)."""
    return abs(omega) <= _ENDPOINT_ATOL or abs(omega - math.pi) <= _ENDPOINT_ATOL


@dataclass(frozen=True)
class FreqTuple:
    """Distinct frequencies in ``[0, pi]`` with positive integer degrees.

    The empty tuple (``p = 0``) is allowed.
    """

    omegas: tuple[float, ...] = ()
    degrees: tuple[int, ...] = ()

    def __post_init__(self):
        omegas = tuple(_check_frequency(w) for w in self.omegas)
        degrees = tuple(int(d) for d in self.degrees)
        if len(omegas) != len(degrees):
            raise InputError("omegas and degrees must have the same length")
        if any(d < 1 for d in degrees):
            raise InputError("degrees must be positive integers")
        if any(b <= a for a, b in zip(omegas, omegas[1:])):
            raise InputError("frequencies must be strictly increasing")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "degrees", degrees)

    @property
    def p(self) -> int:
        return len(self.omegas)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial ``c_0 + c_1 z + ... + c_a z^a`` normalized to ``c_0 = 1``."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise InputError("coefficients must be a nonempty vector")
        if c[0] != 1.0:
            raise InputError("constant coefficient must equal 1")
        # trailing zeros would misreport the degree
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1]
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.convolve(self.coefficients, other.coefficients))

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coefficients)


class Subspace:
    """Linear subspace of ``R^n`` given by a full-column-rank basis.

    An ``n x 0`` basis represents the zero subspace. The orthonormal basis is
    computed once, by a column-pivoted QR factorization, and cached.
    """

    def __init__(self, basis: np.ndarray, n: int | None = None):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim == 1:
            basis = basis[:, None]
        if basis.size == 0:
            if n is None:
                n = basis.shape[0]
            basis = np.zeros((int(n), 0))
        self.basis = basis
        self.n, self.dim = basis.shape
        if self.dim >= self.n:
            raise InputError(f"subspace dimension {self.dim} must be smaller than n={self.n}")
        self.orthonormal  # validate rank eagerly

    @cached_property
    def orthonormal(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((self.n, 0))
        q, r, _ = scipy.linalg.qr(self.basis, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        if diag[-1] <= TAU_RANK * diag[0]:
            raise InputError("basis is numerically rank deficient")
        return q

    def residual(self, M: np.ndarray) -> np.ndarray:
        """``(I - Pi_L) M`` for a vector or matrix ``M``."""
        Q = self.orthonormal
        return M - Q @ (Q.T @ M)

    def contains(self, v_or_M: np.ndarray, tol: float = TAU_SPAN) -> bool:
        return span_contains(self, v_or_M, tol)

    def __repr__(self) -> str:
        return f"Subspace(n={self.n}, dim={self.dim})"


def _as_subspace(A) -> Subspace:
    return A if isinstance(A, Subspace) else Subspace(A)


def build_E(n: int, s: int, omega: float, l: int = 0) -> np.ndarray:
    """``n x 2`` matrix with row ``j`` equal to ``((j+l)^s cos((j+l)w), (j+l)^s sin((j+l)w))``.

    Rows are indexed ``j = 1, ..., n``; ``0^0`` is taken to be 1.
    """
    if n < 1 or s < 0:
        raise InputError("need n >= 1 and s >= 0")
    omega = _check_frequency(omega)
    j = np.arange(1, n + 1, dtype=float) + l
    scale = j**s
    E = np.column_stack([scale * np.cos(j * omega), scale * np.sin(j * omega)])
    if omega == 0.0 or omega == math.pi:
        E[:, 1] = 0.0  # sin(j*pi) evaluates to ~1e-16, not 0
    return E


def kappa(ft: FreqTuple) -> int:
    """Degree of the difference polynomial attached to ``ft``."""
    return sum(d if is_endpoint(w) else 2 * d for w, d in zip(ft.omegas, ft.degrees))


def delta_poly(ft: FreqTuple) -> Polynomial:
    """Product of ``Delta_{omega_i}^{d_i}``; the constant 1 for the empty tuple."""
    out = Polynomial(np.array([1.0]))
    for w, d in zip(ft.omegas, ft.degrees):
        if is_endpoint(w):
            base = Polynomial(np.array([1.0, -math.cos(w)]))
        else:
            base = Polynomial(np.array([1.0, -2.0 * math.cos(w), 1.0]))
        for _ in range(d):
            out = out * base
    return out


def build_D(m: int, theta: Polynomial) -> np.ndarray:
    """Banded ``(m-a) x m`` matrix with rows ``(theta_a, ..., theta_1, 1)`` shifted along."""
    a = theta.degree
    if a == 0:
        return np.eye(m)
    if m <= a:
        raise InputError(f"need m > degree ({m} <= {a})")
    band = theta.coefficients[::-1]
    D = np.zeros((m - a, m))
    for i in range(m - a):
        D[i, i : i + a + 1] = band
    return D


def build_V(n: int, l: int, ft: FreqTuple) -> np.ndarray:
    """Concatenate ``E^{(l)}_{n,s}(omega_i)`` for ``s < d_i``, frequency by frequency."""
    if ft.p < 1:
        raise InputError("build_V needs at least one frequency")
    blocks = [build_E(n, s, w, l) for w, d in zip(ft.omegas, ft.degrees) for s in range(d)]
    return np.hstack(blocks)


def numerical_rank(M: np.ndarray, tol: float = 1e-8) -> int:
    """Rank after dropping zero columns and scaling the rest to unit norm.

    Singular values are compared against ``tol`` times the largest.
    """
    M = np.asarray(M, dtype=float)
    norms = np.linalg.norm(M, axis=0)
    keep = norms > 0
    if not keep.any():
        return 0
    sv = np.linalg.svd(M[:, keep] / norms[keep], compute_uv=False)
    return int(np.sum(sv > tol * sv[0]))


def span_contains(A, v_or_M: np.ndarray, tol: float = TAU_SPAN) -> bool:
    """True iff every column ``w`` satisfies ``||(I - Pi_A) w|| <= tol ||w||``.

    Zero columns are contained by definition.
    """
    L = _as_subspace(A)
    M = np.asarray(v_or_M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    res = np.linalg.norm(L.residual(M), axis=0)
    return bool(np.all(res <= tol * np.linalg.norm(M, axis=0)))


def ortho_projector_complement(A) -> np.ndarray:
    """Orthogonal projector onto ``span(A)^perp``; identity for an empty basis."""
    L = _as_subspace(A)
    Q = L.orthonormal
    P = np.eye(L.n) - Q @ Q.T
    return (P + P.T) / 2.0


def rho_of(omega: float, L, max_order: int | None = None) -> int:
    """Smallest ``s >= 0`` with ``span(E_{n,s}(omega))`` not contained in ``L``."""
    L = _as_subspace(L)
    cap = L.n if max_order is None else max_order
    for s in range(cap + 1):
        if not span_contains(L, build_E(L.n, s, omega)):
            return s
    raise NumericalError(f"rho_of exceeded s={cap}; subspace is numerically degenerate")


def _polish_root(L: Subspace, j: np.ndarray, g: float, lo: float, hi: float, steps: int = 30) -> float:
    """Gauss-Newton on the stacked projected residual of ``(cos(j g), sin(j g))``.

    Near a containment frequency the residual vanishes linearly in ``g``, so
    the iteration converges quadratically; Brent-type minimization of its
    norm would stall at about ``sqrt(eps)`` relative accuracy.
    """
    for _ in range(steps):
        jg = j * g
        res = L.residual(np.column_stack([np.cos(jg), np.sin(jg)])).ravel(order="F")
        der = L.residual(np.column_stack([-j * np.sin(jg), j * np.cos(jg)])).ravel(order="F")
        dd = der @ der
        if dd == 0.0:
            break
        g_new = min(max(g - (res @ der) / dd, lo), hi)
        if abs(g_new - g) <= 1e-15 * max(1.0, abs(g)):
            g = g_new
            break
        g = g_new
    return g


def exceptional_frequencies(L, grid: Sequence[float] | None = None) -> list[tuple[float, int]]:
    """Frequencies where ``rho(omega, L) > 0``, with their orders.

    These are exactly the frequencies with ``span(E_{n,0}(omega))`` inside
    ``L``. Candidates are local minima of the relative residual on ``grid``
    (default: 100001 points on ``[0, pi]``), polished by Gauss-Newton steps;
    endpoints are always tested exactly.
    """
    L = _as_subspace(L)
    if L.dim == 0:
        return []
    n = L.n
    grid = np.linspace(0.0, math.pi, 100_001) if grid is None else np.unique(np.asarray(grid, float))
    j = np.arange(1, n + 1, dtype=float)

    def resid(g: np.ndarray) -> np.ndarray:
        g = np.atleast_1d(g)
        C = np.cos(np.outer(j, g))
        S = np.sin(np.outer(j, g))
        rc = np.linalg.norm(L.residual(C), axis=0) / np.linalg.norm(C, axis=0)
        ns = np.linalg.norm(S, axis=0)
        rs = np.where(ns > 1e-12 * math.sqrt(n), np.linalg.norm(L.residual(S), axis=0) / np.maximum(ns, 1e-300), 0.0)
        return np.maximum(rc, rs)

    values = np.concatenate([resid(chunk) for chunk in np.array_split(grid, max(1, grid.size // 4096))])
    found: list[float] = []
    for g in (0.0, math.pi):
        if span_contains(L, build_E(n, 0, g)):
            found.append(g)
    idx = np.flatnonzero(
        (values < 1e-2)
        & (values <= np.r_[np.inf, values[:-1]])
        & (values <= np.r_[values[1:], np.inf])
    )
    for i in idx:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        if hi <= lo:
            continue
        g = _polish_root(L, j, float(grid[i]), lo, hi)
        if g <= _ENDPOINT_ATOL * 1e3 or g >= math.pi - _ENDPOINT_ATOL * 1e3:
            continue  # endpoints handled exactly above
        if span_contains(L, build_E(n, 0, g)) and all(abs(g - f) > 1e-9 for f in found):
            found.append(g)
    found.sort()
    return [(float(g), rho_of(g, L)) for g in found]
