"""Domain types and shared numerics for long-only risk parity.

Weights live in one of two spaces. Correlation-space weights ``w`` solve
``w_i (R w)_i = b_i`` and carry ``w'Rw = 1``; portfolio weights are
nonnegative and sum to one. Plain ``numpy`` arrays are used for both; the
solvers' report keeps them apart.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SYMMETRY_REPAIR_TOL = 1e-8
PSD_RELATIVE_FLOOR = -1e-8
BUDGET_FILE_TOL = 1e-9


class RiskParityError(ValueError):
    """Base class for input errors raised by this package."""


class NonSquareError(RiskParityError):
    pass


class AsymmetricBeyondToleranceError(RiskParityError):
    pass


class NonPositiveDiagonalError(RiskParityError):
    pass


class IndefiniteMatrixError(RiskParityError):
    pass


class DimensionMismatchError(RiskParityError):
    pass


class ZeroVolatilityError(RiskParityError):
    pass


class AllZeroWeightsError(RiskParityError):
    pass


class InvalidBudgetError(RiskParityError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_psd(m: np.ndarray) -> None:
    eig = np.linalg.eigvalsh(m)
    if eig[0] < PSD_RELATIVE_FLOOR * max(eig[-1], 0.0):
        raise IndefiniteMatrixError(
            f"matrix is not positive semi-definite: smallest eigenvalue {eig[0]:.3g}, "
            f"largest {eig[-1]:.3g}"
        )


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Validated return covariance ``C`` with volatilities ``sigma = sqrt(diag C)``.

    Build instances with :func:`validate_covariance`.
    """

    entries: np.ndarray
    vols: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Unit-diagonal symmetric PSD matrix ``R``."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_array(cls, raw, check_psd: bool = True) -> "CorrelationMatrix":
        """Validate ``raw`` as a correlation matrix.

        Symmetry is repaired and the diagonal must already be one to within
        ``1e-12``; it is then set to exactly one.
        """
        m = _symmetrized(raw)
        if np.any(np.abs(np.diag(m) - 1.0) > 1e-12):
            raise RiskParityError("correlation matrix must have unit diagonal")
        np.fill_diagonal(m, 1.0)
        if np.any(np.abs(m) > 1.0 + 1e-12):
            raise RiskParityError("correlation entries exceed 1 in magnitude")
        if check_psd:
            _check_psd(m)
        return cls(_frozen(m))


@dataclass(frozen=True, eq=False)
class RiskBudget:
    """Target relative risk contributions ``b`` (positive, summing to one)."""

    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or b.size == 0:
            raise InvalidBudgetError("risk budget must be a nonempty vector")
        if np.any(~np.isfinite(b)) or np.any(b <= 0):
            raise InvalidBudgetError("risk budget entries must be strictly positive")
        if abs(b.sum() - 1.0) > 1e-12:
            raise InvalidBudgetError(f"risk budget sums to {b.sum()!r}, not 1")
        object.__setattr__(self, "values", _frozen(b))

    @classmethod
    def equal(cls, n: int) -> "RiskBudget":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def from_file(cls, path) -> "RiskBudget":
        """Read one positive number per line; renormalize a sum within 1e-9 of one."""
        values = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise InvalidBudgetError(f"budget line {lineno} is not a number: {line!r}")
        b = np.array(values)
        if b.size == 0:
            raise InvalidBudgetError("budget file is empty")
        if np.any(b <= 0):
            raise InvalidBudgetError("budget entries must be strictly positive")
        total = b.sum()
        if abs(total - 1.0) > BUDGET_FILE_TOL:
            raise InvalidBudgetError(f"budget sums to {total!r}, not 1 within {BUDGET_FILE_TOL}")
        if total != 1.0:
            logger.info("renormalizing budget from sum %r", total)
        return cls(b / total)

    def __len__(self):
        return self.values.size


def as_budget(budget, n: int) -> RiskBudget:
    """Coerce ``None`` (equal budget), an array, or a RiskBudget to length ``n``."""
    if budget is None:
        return RiskBudget.equal(n)
    if not isinstance(budget, RiskBudget):
        budget = RiskBudget(budget)
    if len(budget) != n:
        raise DimensionMismatchError(f"budget has {len(budget)} entries, expected {n}")
    return budget


@dataclass(frozen=True, eq=False)
class RiskReport:
    """Euler decomposition of portfolio volatility.

    ``norm_constant`` is the weight sum used to map the given weights onto
    the unit simplex.
    """

    volatility: float
    contributions: np.ndarray
    relative: np.ndarray
    norm_constant: float


def _symmetrized(raw) -> np.ndarray:
    m = np.array(raw, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonSquareError(f"matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise RiskParityError("matrix contains non-finite entries")
    gap = np.abs(m - m.T)
    if np.any(gap > SYMMETRY_REPAIR_TOL * np.maximum(1.0, np.abs(m))):
        raise AsymmetricBeyondToleranceError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def validate_covariance(raw) -> CovarianceMatrix:
    """Validate a raw covariance matrix.

    Near-symmetric input (relative gap up to 1e-8) is averaged with its
    transpose. Semi-definite matrices pass; an eigenvalue below ``-1e-8``
    times the largest one is rejected.

    Raises
    ------
    NonSquareError, AsymmetricBeyondToleranceError, NonPositiveDiagonalError,
    IndefiniteMatrixError
    """
    if isinstance(raw, CovarianceMatrix):
        return raw
    m = _symmetrized(raw)
    diag = np.diag(m)
    if np.any(diag <= 0):
        bad = int(np.flatnonzero(diag <= 0)[0])
        raise NonPositiveDiagonalError(f"diagonal entry {bad} is {diag[bad]!r}; variances must be > 0")
    _check_psd(m)
    return CovarianceMatrix(_frozen(m), _frozen(np.sqrt(diag)))


def cov_to_corr(cov) -> CorrelationMatrix:
    cov = validate_covariance(cov)
    s = cov.vols
    r = cov.entries / np.outer(s, s)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(_frozen(r))


def as_correlation(r) -> CorrelationMatrix:
    if isinstance(r, CorrelationMatrix):
        return r
    return CorrelationMatrix.from_array(r)


def _as_vector(w, n: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DimensionMismatchError(f"weights have shape {w.shape}, expected ({n},)")
    return w


def portfolio_volatility(cov, w) -> float:
    """``sqrt(w'Cw)``, with tiny negative quadratic forms clamped to zero."""
    cov = validate_covariance(cov)
    w = _as_vector(w, cov.dim)
    q = float(w @ cov.entries @ w)
    if q < 0:
        if q < -1e-12:
            raise IndefiniteMatrixError(f"negative quadratic form {q!r}")
        q = 0.0
    return float(np.sqrt(q))


def risk_report(cov, w) -> RiskReport:
    cov = validate_covariance(cov)
    w = _as_vector(w, cov.dim)
    vol = portfolio_volatility(cov, w)
    if vol <= 0:
        raise ZeroVolatilityError("portfolio volatility is zero")
    contrib = w * (cov.entries @ w) / vol
    return RiskReport(
        volatility=vol,
        contributions=contrib,
        relative=contrib / vol,
        norm_constant=float(w.sum()),
    )


def residual_simple(r, w, b) -> float:
    """Max-norm error of the unit-scale condition ``w_i (R w)_i = b_i``."""
    r = as_correlation(r)
    w = _as_vector(w, r.dim)
    b = as_budget(b, r.dim).values
    return float(np.max(np.abs(w * (r.entries @ w) - b)))


def normalize_weights(w, vols) -> np.ndarray:
    """Map correlation-space weights to portfolio weights ``(w/sigma) / sum(w/sigma)``."""
    w = np.asarray(w, dtype=float)
    vols = _as_vector(vols, w.size)
    if np.any(w < 0):
        raise RiskParityError("correlation-space weights must be nonnegative")
    x = w / vols
    lam = x.sum()
    if lam <= 0:
        raise AllZeroWeightsError("all weights are zero")
    return x / lam


def relative_risk_deviation(cov, weights, b=None) -> float:
    """``max_i |v_i / V - b_i|`` for portfolio weights under covariance ``cov``."""
    cov = validate_covariance(cov)
    b = as_budget(b, cov.dim).values
    return float(np.max(np.abs(risk_report(cov, weights).relative - b)))
