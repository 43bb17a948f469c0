"""Long-only risk parity (equal risk contribution) solvers and benchmarks."""

from .core import (
    CorrelationMatrix,
    CovarianceMatrix,
    RiskBudget,
    RiskParityError,
    RiskReport,
    cov_to_corr,
    normalize_weights,
    portfolio_volatility,
    residual_simple,
    risk_report,
    validate_covariance,
)
from .solvers import (
    Method,
    SolverConfig,
    SolverReport,
    Status,
    ccd_improved_solve,
    ccd_original_solve,
    init_flat,
    init_inverse_vol,
    init_one_step_batch,
    newton_solve,
    solve,
)

__version__ = "0.1.0"
