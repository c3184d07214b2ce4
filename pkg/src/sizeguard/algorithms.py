"""Size-controlling critical values and worst-case sizes over AR(p) error models.

Both searches share a three-stage scheme over the partial autocorrelations
``rho`` of the error process:

stage 0
    Jones-sampled candidates are ranked by the objective on one small noise
    panel (``N0`` draws);
stage 1
    Nelder-Mead searches from the ``M1`` best candidates, each with its own
    panel of ``N1`` draws;
stage 2
    Nelder-Mead searches from the ``M2`` best stage-1 optima with ``N2`` draws;
    the largest refined objective value is returned.

The objective is the empirical ``1 - alpha`` quantile of the statistic (for
critical values) or the rejection frequency of ``{T >= C}`` (for sizes),
evaluated at ``mu0 + chol(Sigma(rho)) Z_i`` with a fixed null mean ``mu0``.
Panels are reused for every ``rho`` within a search, so each inner objective
is deterministic.

Every panel comes from a Philox generator keyed by ``(seed, stage, index)``
and results are assembled by index, so the output does not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from threadpoolctl import threadpool_limits

from .covariance import CovKind, PacfBox, cholesky_from_pacf, cov_factor, padded_candidates
from .exceptions import InputError
from .teststats import DesignProblem, StatisticSpec, statistic_panel

DEFAULT_PADDING_ORDERS = (2, 5, 10, 25, 50, 99)

# generator stream labels
_STAGE0, _STAGE1, _STAGE2, _CANDIDATES = 0, 1, 2, 3

#: Partial autocorrelations produced by the unbounded map are clipped to this.
RHO_CLIP = 1.0 - 1e-11


@dataclass(frozen=True)
class AlgoConfig:
    """Tuning of the three-stage search.

    ``M0`` is the number of stage-0 candidates drawn per padding order. Unset
    tolerances default to ``N1**-0.5`` and ``N2**-0.5``; unset iteration caps
    to ``20 n`` and ``30 n`` (resolved by :meth:`resolved`).
    """

    p: int = 1
    alpha: float = 0.05
    M0: int = 5000
    M1: int = 10
    M2: int = 2
    N0: int = 1000
    N1: int = 10_000
    N2: int = 50_000
    epsilon: float = 0.0
    max_iter_stage1: int | None = None
    max_iter_stage2: int | None = None
    tol_stage1: float | None = None
    tol_stage2: float | None = None
    seed: int = 0
    padding_orders: tuple[int, ...] | None = None

    def __post_init__(self):
        for name in ("M0", "M1", "M2", "N0", "N1", "N2"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise InputError(f"{name} must be a positive integer")
        if not self.M0 >= self.M1 >= self.M2:
            raise InputError("need M0 >= M1 >= M2")
        if not self.N0 <= self.N1 <= self.N2:
            raise InputError("need N0 <= N1 <= N2")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if int(self.p) != self.p or self.p < 0:
            raise InputError("p must be a nonnegative integer")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise InputError("seed must be an integer in [0, 2**64)")
        PacfBox(self.epsilon)
        for name in ("tol_stage1", "tol_stage2"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise InputError(f"{name} must be positive")
        for name in ("max_iter_stage1", "max_iter_stage2"):
            val = getattr(self, name)
            if val is not None and (int(val) != val or val < 1):
                raise InputError(f"{name} must be a positive integer")
        if self.padding_orders is not None:
            object.__setattr__(self, "padding_orders", tuple(int(o) for o in self.padding_orders))
            if any(o < 1 for o in self.padding_orders):
                raise InputError("padding orders must be positive")

    @property
    def box(self) -> PacfBox:
        return PacfBox(self.epsilon)

    def orders(self) -> list[int]:
        """Orders of the stage-0 candidate draws; always includes ``p``."""
        base = DEFAULT_PADDING_ORDERS if self.padding_orders is None else self.padding_orders
        if self.p == 0:
            return []
        return sorted({o for o in base if o <= self.p} | {self.p})

    def resolved(self, n: int) -> "AlgoConfig":
        """Copy with every default filled in for sample size ``n``."""
        return replace(
            self,
            max_iter_stage1=self.max_iter_stage1 or 20 * n,
            max_iter_stage2=self.max_iter_stage2 or 30 * n,
            tol_stage1=self.tol_stage1 or self.N1**-0.5,
            tol_stage2=self.tol_stage2 or self.N2**-0.5,
            padding_orders=tuple(self.orders()),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["padding_orders"] is not None:
            out["padding_orders"] = list(out["padding_orders"])
        return out


@dataclass
class RunResult:
    """Output of :func:`critical_value`, :func:`size` or :func:`fixed_cov_quantile`."""

    value: float
    argmax_pacf: list[float]
    stage_trace: list[dict]
    replications_used: list[int]
    seed: int
    converged: list[bool] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def keyed_rng(seed: int, stage: int, index: int) -> np.random.Generator:
    """Independent generator for the stream ``(seed, stage, index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stage, index])))


def noise_panel(seed: int, stage: int, index: int, N: int, n: int) -> np.ndarray:
    """``N x n`` standard normal panel; row ``i`` is the draw ``Z_i``."""
    return keyed_rng(seed, stage, index).standard_normal((N, n))


# ---------------------------------------------------------------------------
# Objectives


def empirical_quantile(samples, level: float) -> float:
    """``inf {z : F_N(z) >= level}`` for the empirical CDF ``F_N``.

    This is the ``ceil(level N)``-th order statistic.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InputError("empirical_quantile needs at least one sample")
    if not 0.0 < level < 1.0:
        raise InputError("level must lie in (0, 1)")
    # rounding guards against e.g. 0.95 * 20 = 19.000000000000004
    k = max(1, math.ceil(round(level * x.size, 9)))
    return float(np.partition(x, k - 1)[k - 1])


def panel_statistics(prob: DesignProblem, spec: StatisticSpec, chol: np.ndarray,
                     z_panel: np.ndarray) -> np.ndarray:
    """Statistic at ``mu0 + chol @ Z_i`` for every row ``Z_i`` of ``z_panel``.

    Returns ``|t|`` values when ``spec.root`` is set.
    """
    Y = chol @ z_panel.T
    Y += prob.mu0[:, None]
    if spec.root:
        return np.abs(statistic_panel(prob, spec, Y, signed_root=True))
    return statistic_panel(prob, spec, Y)


def quantile_objective(rho, prob: DesignProblem, spec: StatisticSpec, level: float,
                       z_panel: np.ndarray) -> float:
    """Empirical ``level``-quantile of the statistic under AR errors with PACF ``rho``."""
    L = cholesky_from_pacf(rho, prob.n)
    return empirical_quantile(panel_statistics(prob, spec, L, z_panel), level)


def rejection_objective(rho, prob: DesignProblem, spec: StatisticSpec, C: float,
                        z_panel: np.ndarray) -> float:
    """Fraction of panel rows with statistic ``>= C``."""
    L = cholesky_from_pacf(rho, prob.n)
    vals = panel_statistics(prob, spec, L, z_panel)
    return int(np.count_nonzero(vals >= C)) / vals.size


# ---------------------------------------------------------------------------
# Search space and optimizer


def from_unbounded(x, epsilon: float = 0.0) -> np.ndarray:
    """Map ``R^p`` onto ``(-1 + epsilon, 1 - epsilon)^p`` by ``(1 - epsilon) (2/pi) arctan``."""
    rho = (1.0 - epsilon) * (2.0 / math.pi) * np.arctan(np.asarray(x, dtype=float))
    return np.clip(rho, -RHO_CLIP, RHO_CLIP)


def to_unbounded(rho, epsilon: float = 0.0) -> np.ndarray:
    """Inverse of :func:`from_unbounded` on the open box."""
    return np.tan(np.asarray(rho, dtype=float) / (1.0 - epsilon) * (math.pi / 2.0))


def nelder_mead_max(f: Callable[[np.ndarray], float], x0, tol: float, max_iter: int):
    """Maximize ``f`` by the Nelder-Mead simplex method.

    Uses the standard coefficients (reflection 1, expansion 2, contraction
    0.5, shrink 0.5) and an initial simplex stepping ``0.1 max|x0|`` (or 0.1)
    along each axis. Iteration stops once the spread of function values over
    the simplex falls below ``tol (|f(x0)| + tol)`` or after ``max_iter``
    iterations in total. After a converged run the search restarts once from
    the best vertex, and keeps restarting while that improves ``f`` by more
    than the tolerance.

    Returns
    -------
    x_best, f_best, converged
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    f0 = float(f(x0))
    fatol = tol * (abs(f0) + tol)
    x_best, f_best = x0, f0
    budget = int(max_iter)
    converged = False
    # A simplex can collapse onto a level set (e.g. symmetric about the optimum)
    # and stop with zero spread; one restart from the best vertex detects that.
    while budget > 0:
        res = _nm_run(f, x_best, fatol, budget)
        budget -= int(res.nit)
        improved = -float(res.fun) - f_best
        if improved > 0:
            x_best, f_best = np.asarray(res.x, dtype=float), -float(res.fun)
        converged = bool(res.status == 0)
        if not converged or improved <= fatol:
            break
    return x_best, f_best, converged


def _nm_run(f, x0: np.ndarray, fatol: float, max_iter: int):
    d = x0.size
    step = 0.1 * np.max(np.abs(x0)) if np.any(x0 != 0) else 0.1
    simplex = np.vstack([x0, x0 + step * np.eye(d)])
    return minimize(
        lambda x: -float(f(x)),
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": np.inf,
            "fatol": fatol,
            "maxiter": int(max_iter),
            "adaptive": False,
        },
    )


# ---------------------------------------------------------------------------
# Three-stage driver


def _parallel_map(fn, items, threads: int | None):
    items = list(items)
    threads = threads or os.cpu_count() or 1
    if threads == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def stage0_candidates(cfg: AlgoConfig) -> np.ndarray:
    """Stage-0 PACF candidates, ``M0`` per padding order, stacked by order."""
    return padded_candidates(cfg.p, cfg.orders(), cfg.M0, cfg.box,
                             lambda order: keyed_rng(cfg.seed, _CANDIDATES, order))


def _three_stage(prob: DesignProblem, objective, cfg: AlgoConfig, threads: int | None) -> RunResult:
    n = prob.n
    cfg = cfg.resolved(n)
    if cfg.p == 0:
        Z = noise_panel(cfg.seed, _STAGE2, 0, cfg.N2, n)
        val = objective(np.empty(0), Z)
        trace = [{"stage": 2, "best_value": val, "replications": cfg.N2, "evaluations": 1}]
        return RunResult(val, [], trace, [cfg.N2], cfg.seed, [True])

    eps = cfg.epsilon
    Z0 = noise_panel(cfg.seed, _STAGE0, 0, cfg.N0, n)
    cands = stage0_candidates(cfg)
    vals0 = np.array(_parallel_map(lambda rho: objective(rho, Z0), cands, threads))
    order0 = np.argsort(-vals0, kind="stable")
    trace = [{"stage": 0, "best_value": float(vals0[order0[0]]), "replications": cfg.N0,
              "evaluations": int(cands.shape[0])}]

    def search(stage: int, N: int, tol: float, max_iter: int):
        def run(item):
            j, rho0 = item
            Z = noise_panel(cfg.seed, stage, j, N, n)
            counter = [0]

            def f(x):
                counter[0] += 1
                return objective(from_unbounded(x, eps), Z)

            x, fx, ok = nelder_mead_max(f, to_unbounded(rho0, eps), tol, max_iter)
            return from_unbounded(x, eps), fx, ok, counter[0]
        return run

    starts1 = [(j, cands[i]) for j, i in enumerate(order0[: cfg.M1])]
    out1 = _parallel_map(search(_STAGE1, cfg.N1, cfg.tol_stage1, cfg.max_iter_stage1), starts1, threads)
    vals1 = np.array([o[1] for o in out1])
    order1 = np.argsort(-vals1, kind="stable")
    trace.append({"stage": 1, "best_value": float(vals1[order1[0]]), "replications": cfg.N1,
                  "evaluations": int(sum(o[3] for o in out1))})

    starts2 = [(j, out1[i][0]) for j, i in enumerate(order1[: cfg.M2])]
    out2 = _parallel_map(search(_STAGE2, cfg.N2, cfg.tol_stage2, cfg.max_iter_stage2), starts2, threads)
    vals2 = np.array([o[1] for o in out2])
    best = int(np.argmax(vals2))
    trace.append({"stage": 2, "best_value": float(vals2[best]), "replications": cfg.N2,
                  "evaluations": int(sum(o[3] for o in out2))})
    return RunResult(
        value=float(vals2[best]),
        argmax_pacf=[float(v) for v in out2[best][0]],
        stage_trace=trace,
        replications_used=[cfg.N0, cfg.N1, cfg.N2],
        seed=cfg.seed,
        converged=[bool(o[2]) for o in out1 + out2],
    )


def critical_value(prob: DesignProblem, spec: StatisticSpec, cfg: AlgoConfig,
                   threads: int | None = None) -> RunResult:
    """Approximate ``sup_rho F_rho^{-1}(1 - alpha)`` over AR(``cfg.p``) errors.

    For ``p = 0`` the errors are i.i.d. and the result is a plain Monte-Carlo
    quantile from one panel of ``N2`` draws. ``threads`` sets the number of
    worker threads (default: all cores); the result does not depend on it.
    """
    level = 1.0 - cfg.alpha

    def objective(rho, Z):
        return quantile_objective(rho, prob, spec, level, Z)

    with threadpool_limits(limits=1):
        return _three_stage(prob, objective, cfg, threads)


def size(prob: DesignProblem, spec: StatisticSpec, C: float, cfg: AlgoConfig,
         threads: int | None = None) -> RunResult:
    """Approximate the worst-case rejection probability of ``{T >= C}`` over AR(``cfg.p``) errors.

    ``C`` is on the scale of the statistic: ``|t|`` when ``spec.root`` is set.
    ``cfg.alpha`` is not used.
    """
    C = float(C)
    if math.isnan(C):
        raise InputError("C must be a number")

    def objective(rho, Z):
        return rejection_objective(rho, prob, spec, C, Z)

    with threadpool_limits(limits=1):
        return _three_stage(prob, objective, cfg, threads)


def fixed_cov_quantile(prob: DesignProblem, spec: StatisticSpec, kind: CovKind, level: float,
                       N: int, seed: int = 0) -> float:
    """Monte-Carlo ``level``-quantile of the statistic under errors ``N(0, Sigma_kind)``.

    Uses the same stream as the ``p = 0`` branch of :func:`critical_value`, so
    ``kind = Identity()`` reproduces it for equal ``seed`` and ``N = N2``.
    """
    if int(N) != N or N < 1:
        raise InputError("N must be a positive integer")
    L = cov_factor(kind, prob.n)
    Z = noise_panel(seed, _STAGE2, 0, int(N), prob.n)
    with threadpool_limits(limits=1):
        return empirical_quantile(panel_statistics(prob, spec, L, Z), level)


def fixed_cov_rejection(prob: DesignProblem, spec: StatisticSpec, kind: CovKind, C: float,
                        N: int, seed: int = 0) -> float:
    """Monte-Carlo rejection frequency of ``{T >= C}`` under errors ``N(0, Sigma_kind)``."""
    L = cov_factor(kind, prob.n)
    Z = noise_panel(seed, _STAGE2, 0, int(N), prob.n)
    with threadpool_limits(limits=1):
        vals = panel_statistics(prob, spec, L, Z)
    return int(np.count_nonzero(vals >= C)) / vals.size


__all__ = [
    "AlgoConfig", "RunResult", "critical_value", "empirical_quantile", "fixed_cov_quantile",
    "fixed_cov_rejection", "from_unbounded", "keyed_rng", "nelder_mead_max", "noise_panel",
    "quantile_objective", "rejection_objective", "size", "stage0_candidates", "to_unbounded",
]
