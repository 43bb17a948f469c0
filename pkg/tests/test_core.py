import math

import numpy as np
import pytest

from riskparity import core
from riskparity.core import (
    AllZeroWeightsError,
    AsymmetricBeyondToleranceError,
    DimensionMismatchError,
    IndefiniteMatrixError,
    InvalidBudgetError,
    NonPositiveDiagonalError,
    NonSquareError,
    RiskBudget,
    ZeroVolatilityError,
    cov_to_corr,
    normalize_weights,
    portfolio_volatility,
    residual_simple,
    risk_report,
    validate_covariance,
)


class TestValidateCovariance:
    def test_valid(self):
        cov = validate_covariance([[4, 2], [2, 9]])
        np.testing.assert_array_equal(cov.vols, [2, 3])
        assert cov.dim == 2

    def test_zero_variance(self):
        with pytest.raises(NonPositiveDiagonalError):
            validate_covariance([[1, 0], [0, 0]])

    def test_indefinite(self):
        with pytest.raises(IndefiniteMatrixError):
            validate_covariance([[1, 2], [2, 1]])

    def test_non_square(self):
        with pytest.raises(NonSquareError):
            validate_covariance(np.ones((2, 3)))

    def test_near_symmetric_is_averaged(self):
        cov = validate_covariance([[1.0, 0.3 + 1e-10], [0.3, 1.0]])
        assert cov.entries[0, 1] == cov.entries[1, 0]
        assert cov.entries[0, 1] == pytest.approx(0.3 + 5e-11, abs=1e-15)

    def test_asymmetric_rejected(self):
        with pytest.raises(AsymmetricBeyondToleranceError):
            validate_covariance([[1.0, 0.3], [0.2, 1.0]])

    def test_semidefinite_passes(self):
        v = np.array([1.0, 2.0, -1.0])
        cov = validate_covariance(np.outer(v, v))
        np.testing.assert_allclose(cov.vols, [1, 2, 1])

    def test_immutable(self):
        cov = validate_covariance(np.eye(2))
        with pytest.raises(ValueError):
            cov.entries[0, 0] = 5.0


class TestCovToCorr:
    def test_two_asset(self):
        r = cov_to_corr([[4, 2], [2, 9]]).entries
        np.testing.assert_allclose(r, [[1, 1 / 3], [1 / 3, 1]], rtol=1e-15)

    def test_identity(self):
        np.testing.assert_array_equal(cov_to_corr(np.eye(3)).entries, np.eye(3))

    def test_already_correlation(self):
        m = [[1, -0.5], [-0.5, 1]]
        np.testing.assert_array_equal(cov_to_corr(m).entries, m)

    def test_diagonal_exactly_one(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((40, 6)) * rng.uniform(0.01, 3, 6)
        r = cov_to_corr(np.cov(x, rowvar=False)).entries
        assert np.all(np.diag(r) == 1.0)


class TestVolatility:
    def test_single_asset(self):
        assert portfolio_volatility([[4, 2], [2, 9]], [1, 0]) == 2.0

    def test_identity(self):
        assert portfolio_volatility(np.eye(2), [0.5, 0.5]) == pytest.approx(math.sqrt(0.5), rel=1e-15)

    def test_zero(self):
        assert portfolio_volatility(np.eye(2), [0, 0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            portfolio_volatility(np.eye(2), [1, 0, 0])


class TestRiskReport:
    def test_identity(self):
        rep = risk_report(np.eye(2), [0.5, 0.5])
        np.testing.assert_allclose(rep.relative, [0.5, 0.5])
        assert rep.contributions.sum() == pytest.approx(rep.volatility)

    @pytest.mark.parametrize("rho", [-0.9, -0.2, 0.0, 0.4, 0.95])
    def test_two_asset_inverse_vol(self, rho):
        s = np.array([0.1, 0.2])
        cov = np.array([[1, rho], [rho, 1]]) * np.outer(s, s)
        rep = risk_report(cov, [2 / 3, 1 / 3])
        np.testing.assert_allclose(rep.relative, [0.5, 0.5], atol=1e-14)

    def test_golden(self, golden):
        rep = risk_report(golden["cov"], golden["weights"])
        np.testing.assert_allclose(rep.relative, np.full(3, 1 / 3), atol=1e-6)
        assert rep.norm_constant == pytest.approx(1.0)

    def test_zero_volatility(self):
        with pytest.raises(ZeroVolatilityError):
            risk_report(np.eye(2), [0, 0])


class TestResidual:
    def test_exact(self):
        w = np.full(2, 1 / math.sqrt(2))
        assert residual_simple(np.eye(2), w, [0.5, 0.5]) == pytest.approx(0, abs=1e-15)

    def test_arithmetic(self):
        assert residual_simple(np.eye(2), [1, 1], [0.5, 0.5]) == 0.5

    def test_golden(self, golden):
        corr = cov_to_corr(golden["cov"])
        w = golden["weights"] * golden["sigma"]
        w = w / math.sqrt(w @ corr.entries @ w)
        assert residual_simple(corr, w, None) <= 1e-6

    def test_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            residual_simple(np.eye(2), [1, 1, 1], None)


class TestNormalize:
    def test_inverse_vol(self):
        np.testing.assert_allclose(normalize_weights([1, 1], [0.1, 0.2]), [2 / 3, 1 / 3], rtol=1e-15)

    def test_identity(self):
        np.testing.assert_allclose(normalize_weights([1, 1, 1], [1, 1, 1]), np.full(3, 1 / 3))

    def test_degenerate(self):
        np.testing.assert_array_equal(normalize_weights([1, 0], [2, 3]), [1, 0])

    def test_all_zero(self):
        with pytest.raises(AllZeroWeightsError):
            normalize_weights([0, 0], [1, 1])


class TestBudget:
    def test_equal(self):
        b = RiskBudget.equal(4)
        assert b.values.sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("values", [[0.5, 0.6], [1.0, 0.0], [-0.1, 1.1]])
    def test_invalid(self, values):
        with pytest.raises(InvalidBudgetError):
            RiskBudget(values)

    def test_file_renormalized(self, tmp_path, caplog):
        p = tmp_path / "b.txt"
        p.write_text("0.25\n0.25\n0.5000000005\n")
        with caplog.at_level("INFO"):
            b = RiskBudget.from_file(p)
        assert abs(b.values.sum() - 1) <= 1e-12
        assert "renormalizing" in caplog.text

    def test_file_bad_sum(self, tmp_path):
        p = tmp_path / "b.txt"
        p.write_text("0.3\n0.3\n")
        with pytest.raises(InvalidBudgetError):
            RiskBudget.from_file(p)

    def test_as_budget_length(self):
        with pytest.raises(DimensionMismatchError):
            core.as_budget([0.5, 0.5], 3)
