"""Numerical checks of the size-control conditions for a design and restriction.

For a statistic whose singular set is ``B`` (kernel and general quadratic
estimators) or ``span(X)`` (Eicker and scalar long-run variance estimators),
size control over AR-type correlation models holds when, for every frequency
``gamma`` in ``[0, pi]``, ``span(E_{n, rho(gamma)}(gamma))`` is not contained in
that set, where ``rho(gamma) = rho(gamma, M0lin)`` and ``M0lin = X ker(R)``.

:func:`scan_noninclusion` evaluates a scale-free criterion on frequency grids.
A grid scan is numerical evidence, not a proof; the report records the
smallest criterion value seen so that the margin can be judged.

Near an exceptional frequency ``g*`` of order ``d`` the cosine and sine
columns of ``E_{n,0}(g* + h)`` agree, modulo ``M0lin``, with ``h^d`` times a
Taylor remainder that tends to a multiple of ``E_{n,d}(g*)`` as ``h -> 0``.
Both the target set and the non-containment question are unchanged by that
shift and rescaling, so the remainder is used for ``n |h| <= 1``: evaluating
``cos(j gamma)`` directly would lose every significant digit there.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .design_algebra import (TAU_SPAN, Subspace, build_E, exceptional_frequencies, numerical_rank,
                             rho_of)
from .exceptions import InputError
from .teststats import DesignProblem, StatisticSpec, check_assumption2

DEFAULT_GRID_POINTS = 100_001
DEFAULT_REFINE_WIDTH = 1e-6

#: Scan values at or below this count as containment.
TAU_CRIT = TAU_SPAN

_TAYLOR_TERMS = 30
_CHUNK = 2048
# fixed combinations of the cosine and sine columns used for q > 1
_COMBOS = ((0.6, 0.8), (0.8, -0.6))


def m0lin_basis(prob: DesignProblem) -> Subspace:
    """Basis of ``{X b : R b = 0}``, of dimension ``k - q``."""
    null = scipy.linalg.null_space(prob.R)
    return Subspace(prob.X @ null, n=prob.n)


def default_grid(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, math.pi, points)


def default_refine_grids(points: int = DEFAULT_GRID_POINTS) -> list[np.ndarray]:
    return [np.linspace(0.0, DEFAULT_REFINE_WIDTH, points)]


def rho_profile(prob: DesignProblem, grid: Sequence[float] | None = None) -> list[tuple[float, int]]:
    """Frequencies with ``rho(gamma, M0lin) > 0`` and their orders.

    All other frequencies have order 0. Endpoints are tested exactly; interior
    exceptional frequencies are located from local minima on ``grid``.
    """
    L = m0lin_basis(prob)
    grid = default_grid() if grid is None else _validate_grid(grid, require_endpoints=True)
    return exceptional_frequencies(L, grid)


@dataclass
class ConditionReport:
    """Outcome of :func:`scan_noninclusion`.

    ``rho_profile`` lists the exceptional frequencies ``(gamma, order)``; every
    other frequency has order 0. ``min_criterion`` is the smallest scan value
    and ``argmin_frequency`` where it occurred.
    """

    statistic_family: str
    assumption2_ok: bool
    rho_profile: list[tuple[float, int]]
    scanned_grid: list[dict]
    min_criterion: float
    argmin_frequency: float
    n_failed: int
    failed_frequencies: list[float] = field(default_factory=list)
    passed: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rho_profile"] = [{"frequency": g, "order": d} for g, d in self.rho_profile]
        return out


def _validate_grid(grid, require_endpoints: bool) -> np.ndarray:
    g = np.asarray(grid, dtype=float).ravel()
    if g.size == 0:
        raise InputError("empty frequency grid")
    if not np.all(np.isfinite(g)) or g.min() < -1e-12 or g.max() > math.pi + 1e-12:
        raise InputError("grid frequencies must lie in [0, pi]")
    g = np.clip(g, 0.0, math.pi)
    if require_endpoints and (g.min() > 1e-12 or g.max() < math.pi - 1e-12):
        raise InputError("grid must contain both endpoints 0 and pi")
    return np.unique(g)


def _describe(g: np.ndarray) -> dict:
    return {"start": float(g[0]), "stop": float(g[-1]), "points": int(g.size)}


def trig_columns(n: int, gammas: np.ndarray, exceptional: Sequence[tuple[float, int]]) -> tuple[np.ndarray, np.ndarray]:
    """Cosine and sine columns of ``E_{n, rho(gamma)}(gamma)`` for each ``gamma``.

    Returns two ``n x G`` arrays. Within ``1/n`` of an exceptional frequency
    the columns are replaced by the rescaled Taylor remainder described in the
    module docstring, which is continuous in ``gamma`` and equals
    ``E_{n,d}(g*)`` up to column signs and swaps at ``gamma = g*``.
    """
    j = np.arange(1, n + 1, dtype=float)
    C = np.cos(np.outer(j, gammas))
    S = np.sin(np.outer(j, gammas))
    S[:, (gammas == 0.0) | (gammas == math.pi)] = 0.0
    if not exceptional:
        return C, S
    centers = np.array([g for g, _ in exceptional])
    orders = np.array([d for _, d in exceptional])
    nearest = np.argmin(np.abs(gammas[:, None] - centers[None, :]), axis=1)
    h_all = gammas - centers[nearest]
    local = np.abs(h_all) * n <= 1.0
    for e, (g0, d) in enumerate(zip(centers, orders)):
        sel = np.flatnonzero(local & (nearest == e))
        if sel.size == 0:
            continue
        h = h_all[sel]
        jh = np.outer(j, h)
        base = (j**d)[:, None]
        Cr = np.zeros((n, sel.size))
        Sr = np.zeros((n, sel.size))
        power = np.ones_like(jh)
        for s in range(d, d + _TAYLOR_TERMS):
            coef = base * power / math.factorial(s)
            Cr += coef * np.cos(j * g0 + s * math.pi / 2)[:, None]
            Sr += coef * np.sin(j * g0 + s * math.pi / 2)[:, None]
            power = power * jh
        C[:, sel] = Cr
        S[:, sel] = Sr
    return C, S


def _column_criterion(prob: DesignProblem, family: str, V: np.ndarray) -> np.ndarray:
    """Scale-free non-containment measure of each column of ``V`` (n x G)."""
    Q = prob.Q
    U = V - Q @ (Q.T @ V)
    vnorm = np.linalg.norm(V, axis=0)
    unorm = np.linalg.norm(U, axis=0)
    zero = unorm <= TAU_SPAN * vnorm
    if family == "X":
        crit = unorm / np.where(vnorm > 0, vnorm, 1.0)
    elif prob.q == 1:
        a = prob.A[0]
        umax = np.abs(U).max(axis=0)
        crit = np.abs(a[:, None] * U).max(axis=0) / (np.abs(a).max() * np.where(umax > 0, umax, 1.0))
    else:
        umax = np.abs(U).max(axis=0)
        Bm = prob.A[:, :, None] * U[None]
        G = np.einsum("atG,btG->Gab", Bm, Bm)
        lam = np.linalg.eigvalsh(G)[:, 0]
        crit = np.sqrt(np.maximum(lam, 0.0)) / (np.linalg.norm(prob.A, 2) * np.where(umax > 0, umax, 1.0))
    crit[zero | (vnorm == 0)] = 0.0
    return crit


def scan_criterion(prob: DesignProblem, family: str, gammas: np.ndarray,
                   exceptional: Sequence[tuple[float, int]]) -> np.ndarray:
    """Scan value at each frequency; positive values indicate non-containment."""
    out = np.empty(gammas.size)
    for start in range(0, gammas.size, _CHUNK):
        g = gammas[start : start + _CHUNK]
        C, S = trig_columns(prob.n, g, exceptional)
        cols = [C, S]
        if family == "B" and prob.q > 1:
            cols += [a * C + b * S for a, b in _COMBOS]
        out[start : start + _CHUNK] = np.max([_column_criterion(prob, family, V) for V in cols], axis=0)
    return out


def scan_noninclusion(prob: DesignProblem, spec: StatisticSpec | str,
                      grid: Sequence[float] | None = None,
                      refine_grids: Sequence[Sequence[float]] | None = None,
                      max_reported: int = 20) -> ConditionReport:
    """Check the non-containment condition for the statistic's singular set.

    Parameters
    ----------
    prob
        design and restriction; ``r`` is not used.
    spec
        a :class:`StatisticSpec` or a statistic name; only its family matters.
    grid
        frequencies covering ``[0, pi]`` including both endpoints (default
        100001 equally spaced points).
    refine_grids
        additional grids inside ``[0, pi]`` (default: 100001 points on
        ``[0, 1e-6]``); pass ``[]`` to disable.
    max_reported
        how many failing frequencies to list in the report.
    """
    kind = spec.kind if isinstance(spec, StatisticSpec) else str(spec)
    family = "X" if kind in ("eicker", "tref") else "B"
    main = default_grid() if grid is None else _validate_grid(grid, require_endpoints=True)
    extra = default_refine_grids() if refine_grids is None else [
        _validate_grid(g, require_endpoints=False) for g in refine_grids]

    profile = exceptional_frequencies(m0lin_basis(prob), main)
    a2 = check_assumption2(prob)
    grids = [main] + list(extra)
    all_g = np.unique(np.concatenate(grids + [np.array([g for g, _ in profile], dtype=float)]))
    crit = scan_criterion(prob, family, all_g, profile)

    failed = crit <= TAU_CRIT
    i_min = int(np.argmin(crit))
    passed = bool(not failed.any() and (a2 or family == "X"))
    return ConditionReport(
        statistic_family="kernel/gq (set B)" if family == "B" else "eicker (span X)",
        assumption2_ok=a2,
        rho_profile=[(float(g), int(d)) for g, d in profile],
        scanned_grid=[_describe(g) for g in grids],
        min_criterion=float(crit[i_min]),
        argmin_frequency=float(all_g[i_min]),
        n_failed=int(failed.sum()),
        failed_frequencies=[float(g) for g in all_g[failed][:max_reported]],
        passed=passed,
    )


def rank_condition_eicker(prob: DesignProblem, gamma: float, profile: Sequence[tuple[float, int]] = ()) -> bool:
    """Direct check of ``rank(X, E_{n, rho(gamma)}(gamma)) > k`` at one frequency."""
    order = dict(profile).get(float(gamma), 0)
    if not profile:
        order = rho_of(gamma, m0lin_basis(prob))
    M = np.hstack([prob.X, build_E(prob.n, order, gamma)])
    return numerical_rank(M) > prob.k
