"""Iterative risk parity solvers.

Three methods share one report type:

* ``CCD_ORIGINAL``: cyclical coordinate descent on the covariance matrix,
  solving ``w_i (C w)_i = V(w) b_i`` (Griveau-Billion et al.).
* ``CCD_IMPROVED``: cyclical coordinate descent on the correlation matrix,
  solving ``w_i (R w)_i = b_i`` with a rescale ``w <- w / sqrt(w'Rw)`` after
  every sweep.
* ``NEWTON``: full-step Newton on ``F(w) = R w - b / w`` started from a
  one-step batch CCD update of the flat guess.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    CorrelationMatrix,
    CovarianceMatrix,
    RiskBudget,
    RiskParityError,
    as_budget,
    as_correlation,
    cov_to_corr,
    validate_covariance,
)

QUADRATIC_FORM_FLOOR = 1e-30


class NonpositiveGrandSumError(RiskParityError):
    pass


class NonpositiveWeightError(RiskParityError):
    pass


class Method(enum.Enum):
    CCD_ORIGINAL = "ccd-orig"
    CCD_IMPROVED = "ccd-improved"
    NEWTON = "newton"


class Status(enum.Enum):
    CONVERGED = "CONVERGED"
    MAX_ITER = "MAX_ITER"
    NEGATIVE_WEIGHT = "NEGATIVE_WEIGHT"
    SINGULAR_JACOBIAN = "SINGULAR_JACOBIAN"
    ZERO_QUADRATIC_FORM = "ZERO_QUADRATIC_FORM"


DEFAULT_MAX_ITER = {Method.CCD_ORIGINAL: 1000, Method.CCD_IMPROVED: 1000, Method.NEWTON: 200}


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.CCD_IMPROVED
    tol: float = 1e-6
    max_iter: Optional[int] = None  # None: per-method default
    rescale: bool = True
    budget: Optional[RiskBudget] = None  # None: equal budget

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @property
    def iteration_cap(self) -> int:
        return DEFAULT_MAX_ITER[self.method] if self.max_iter is None else self.max_iter


@dataclass(eq=False)
class SolverReport:
    """Outcome of one solve.

    ``weights_raw`` is in correlation space for the improved CCD and Newton
    methods and in covariance space for the original CCD. ``iterations``
    counts full sweeps for CCD and linear solves for Newton.
    """

    method: Method
    weights_raw: np.ndarray
    weights: np.ndarray
    iterations: int
    status: Status
    final_residual: float
    wall_time_ns: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def wall_time(self) -> float:
        return self.wall_time_ns * 1e-9


def _to_portfolio(w: np.ndarray, vols: np.ndarray) -> np.ndarray:
    x = w / vols
    total = x.sum()
    if not np.isfinite(total) or total <= 0:
        return np.full_like(x, np.nan)
    return x / total


# ---------------------------------------------------------------------------
# initial guesses


def init_inverse_vol(vols) -> np.ndarray:
    """Portfolio weights proportional to ``1 / sigma``."""
    x = 1.0 / np.asarray(vols, dtype=float)
    return x / x.sum()


def _grand_sum(r: np.ndarray) -> float:
    total = float(r.sum())
    if total <= 0:
        raise NonpositiveGrandSumError(f"1'R1 = {total!r} is not positive")
    return total


def init_flat(r) -> np.ndarray:
    """Constant vector ``1 / sqrt(1'R1)``, which has ``w'Rw = 1``."""
    r = as_correlation(r).entries
    return np.full(r.shape[0], 1.0 / math.sqrt(_grand_sum(r)))


def _positive_root(a, c):
    """``sqrt(a^2 + c) - a`` for ``c > 0``, without cancellation when ``a > 0``."""
    root = np.sqrt(a * a + c)
    return np.where(a > 0, c / (root + np.abs(a)), root - a)


def init_one_step_batch(r, b=None) -> np.ndarray:
    """One batch CCD step from the flat guess, all coordinates at once."""
    r = as_correlation(r)
    b = as_budget(b, r.dim).values
    m = r.entries
    a = (m.sum(axis=1) - 1.0) / (2.0 * math.sqrt(_grand_sum(m)))
    return _positive_root(a, b)


# ---------------------------------------------------------------------------
# CCD building blocks


def _root(a: float, c: float) -> float:
    if a > 0:
        return c / (math.sqrt(a * a + c) + a)
    return math.sqrt(a * a + c) - a


def ccd_sweep(r: np.ndarray, w: np.ndarray, b: np.ndarray, rw: Optional[np.ndarray] = None) -> np.ndarray:
    """One cyclical sweep of ``w_i <- sqrt(a_i^2 + b_i) - a_i`` in place.

    ``a_i = ((R w)_i - w_i) / 2`` always uses the latest coordinates. ``rw``
    caches ``R w`` and is kept current with a rank-one update per coordinate;
    the updated cache is returned.
    """
    if rw is None:
        rw = r @ w
    bl = b.tolist()
    for i in range(w.size):
        wi = float(w[i])
        a = 0.5 * (float(rw[i]) - wi)
        new = _root(a, bl[i])
        delta = new - wi
        if delta != 0.0:
            w[i] = new
            rw += delta * r[i]
    return rw


def rescale(r: np.ndarray, w: np.ndarray) -> float:
    """Scale ``w`` in place so that ``w'Rw = 1``; returns the prior quadratic form."""
    q = float(w @ r @ w)
    if q > QUADRATIC_FORM_FLOOR:
        w /= math.sqrt(q)
    return q


def ccd_original_sweep(c: np.ndarray, w: np.ndarray, b: np.ndarray, cw: np.ndarray, q: float) -> float:
    """One sweep of the covariance-space update, in place.

    ``cw`` caches ``C w`` and ``q`` is ``w'Cw``; both follow every coordinate
    change so ``V(w)`` is current at each step. Returns the updated ``q``.
    """
    diag = np.diag(c).tolist()
    bl = b.tolist()
    for i in range(w.size):
        cii = diag[i]
        wi = float(w[i])
        cwi = float(cw[i])
        a = 0.5 * (cwi - cii * wi)
        vol = math.sqrt(q) if q > 0 else 0.0
        new = _root(a, cii * vol * bl[i]) / cii
        delta = new - wi
        if delta != 0.0:
            w[i] = new
            q += delta * (2.0 * cwi + delta * cii)
            cw += delta * c[i]
    return q


def _ccd_original_residual(w, cw, q, b) -> float:
    # deviation of the relative risk contributions from the budget
    return float(np.max(np.abs(w * cw / q - b))) if q > 0 else math.inf


# ---------------------------------------------------------------------------
# solvers


def ccd_original_solve(cov, cfg: Optional[SolverConfig] = None, callback: Optional[Callable] = None) -> SolverReport:
    """Original covariance-space CCD starting from inverse-volatility weights.

    ``callback(w)``, if given, is called with the iterate after each sweep.
    """
    cfg = cfg or SolverConfig(method=Method.CCD_ORIGINAL)
    start = time.perf_counter_ns()
    cov = validate_covariance(cov)
    c = cov.entries
    b = as_budget(cfg.budget, cov.dim).values
    w = init_inverse_vol(cov.vols)
    cw = c @ w
    q = float(w @ cw)
    res = _ccd_original_residual(w, cw, q, b)
    it = 0
    status = Status.CONVERGED
    while res > cfg.tol:
        if it >= cfg.iteration_cap:
            status = Status.MAX_ITER
            break
        ccd_original_sweep(c, w, b, cw, q)
        it += 1
        cw = c @ w
        q = float(w @ cw)
        res = _ccd_original_residual(w, cw, q, b)
        if callback is not None:
            callback(w)
    return SolverReport(
        method=Method.CCD_ORIGINAL,
        weights_raw=w,
        weights=_to_portfolio(w, np.ones_like(w)),
        iterations=it,
        status=status,
        final_residual=res,
        wall_time_ns=time.perf_counter_ns() - start,
    )


def _split(cov_or_corr, vols):
    if isinstance(cov_or_corr, CorrelationMatrix):
        r = cov_or_corr
    else:
        r = as_correlation(cov_or_corr)
    if vols is None:
        vols = np.ones(r.dim)
    return r, np.asarray(vols, dtype=float)


def ccd_improved_solve(
    corr,
    vols=None,
    cfg: Optional[SolverConfig] = None,
    callback: Optional[Callable] = None,
) -> SolverReport:
    """Correlation-space CCD with optional per-sweep rescaling.

    ``vols`` defaults to ones, i.e. ``corr`` is treated as the covariance.
    Loops while ``max_i |w_i (R w)_i - b_i| > tol``.
    """
    cfg = cfg or SolverConfig(method=Method.CCD_IMPROVED)
    start = time.perf_counter_ns()
    r, vols = _split(corr, vols)
    m = r.entries
    b = as_budget(cfg.budget, r.dim).values
    w = init_flat(r)
    rw = m @ w
    res = float(np.max(np.abs(w * rw - b)))
    it = 0
    status = Status.CONVERGED
    while res > cfg.tol:
        if it >= cfg.iteration_cap:
            status = Status.MAX_ITER
            break
        ccd_sweep(m, w, b, rw)
        it += 1
        if cfg.rescale:
            q = rescale(m, w)
            if q <= QUADRATIC_FORM_FLOOR:
                status = Status.ZERO_QUADRATIC_FORM
                break
        rw = m @ w
        res = float(np.max(np.abs(w * rw - b)))
        if callback is not None:
            callback(w)
    return SolverReport(
        method=Method.CCD_IMPROVED,
        weights_raw=w,
        weights=_to_portfolio(w, vols),
        iterations=it,
        status=status,
        final_residual=res,
        wall_time_ns=time.perf_counter_ns() - start,
        extra={"rescale": cfg.rescale},
    )


def _require_positive(w: np.ndarray) -> None:
    if np.any(w <= 0):
        raise NonpositiveWeightError("Newton objective needs strictly positive weights")


def newton_F(corr, b, w) -> np.ndarray:
    """``F(w) = R w - b / w``; zero exactly at the unit-scale risk parity root."""
    r = as_correlation(corr)
    b = as_budget(b, r.dim).values
    w = np.asarray(w, dtype=float)
    _require_positive(w)
    return r.entries @ w - b / w


def newton_jacobian(corr, b, w) -> np.ndarray:
    """``R + diag(b / w^2)``."""
    r = as_correlation(corr)
    b = as_budget(b, r.dim).values
    w = np.asarray(w, dtype=float)
    _require_positive(w)
    jac = np.array(r.entries)
    jac[np.diag_indices_from(jac)] += b / (w * w)
    return jac


def newton_solve(corr, vols=None, cfg: Optional[SolverConfig] = None) -> SolverReport:
    """Undamped Newton iteration from :func:`init_one_step_batch`.

    Converged when both ``max|F| <= tol`` and ``max_i |w_i (R w)_i - b_i| <= tol``.
    A step that leaves any weight nonpositive stops with NEGATIVE_WEIGHT.
    """
    cfg = cfg or SolverConfig(method=Method.NEWTON)
    start = time.perf_counter_ns()
    r, vols = _split(corr, vols)
    m = r.entries
    b = as_budget(cfg.budget, r.dim).values
    w = init_one_step_batch(r, b)
    it = 0
    status = Status.CONVERGED
    while True:
        rw = m @ w
        f = rw - b / w
        res = float(np.max(np.abs(w * rw - b)))
        if float(np.max(np.abs(f))) <= cfg.tol and res <= cfg.tol:
            break
        if it >= cfg.iteration_cap:
            status = Status.MAX_ITER
            break
        jac = np.array(m)
        jac[np.diag_indices_from(jac)] += b / (w * w)
        try:
            delta = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            status = Status.SINGULAR_JACOBIAN
            break
        it += 1
        if not np.all(np.isfinite(delta)):
            status = Status.SINGULAR_JACOBIAN
            break
        w = w + delta
        if np.any(w <= 0):
            status = Status.NEGATIVE_WEIGHT
            res = float(np.max(np.abs(w * (m @ w) - b)))
            break
    return SolverReport(
        method=Method.NEWTON,
        weights_raw=w,
        weights=_to_portfolio(w, vols),
        iterations=it,
        status=status,
        final_residual=res,
        wall_time_ns=time.perf_counter_ns() - start,
    )


def solve(cov, method: Method | str = Method.CCD_IMPROVED, **config) -> SolverReport:
    """Solve the risk parity weights of covariance ``cov`` with ``method``.

    Keyword arguments are forwarded to :class:`SolverConfig`.
    """
    method = Method(method)
    cfg = SolverConfig(method=method, **config)
    cov = validate_covariance(cov)
    if method is Method.CCD_ORIGINAL:
        return ccd_original_solve(cov, cfg)
    corr = cov_to_corr(cov)
    if method is Method.CCD_IMPROVED:
        return ccd_improved_solve(corr, cov.vols, cfg)
    return newton_solve(corr, cov.vols, cfg)
