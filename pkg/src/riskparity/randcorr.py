"""Random correlation matrices with a prescribed spectrum.

The construction conjugates ``diag(lambda)`` by a Haar-random orthogonal
matrix and then applies Givens rotations until the diagonal is all ones
(Davies & Higham, 2000). Both steps are similarity transforms, so the
spectrum is preserved.

Seeds are plain 64-bit integers fed to numpy's PCG64, which yields the same
stream on every platform. :func:`trial_seed` derives independent per-trial
seeds so benchmark trials can run in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CorrelationMatrix, RiskParityError

MASK64 = (1 << 64) - 1


class SpectrumTraceMismatchError(RiskParityError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(base: int, *keys: int) -> int:
    """Fold integer keys into ``base`` with the splitmix64 finalizer."""
    h = 0
    for k in keys:
        h = splitmix64(h ^ (k & MASK64))
    return (base & MASK64) ^ h


def trial_seed(base: int, n: int, trial: int) -> int:
    """Seed of trial ``trial`` at size ``n``: ``base XOR mix(n, trial)``."""
    return derive_seed(base, n, trial)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & MASK64))


@dataclass(frozen=True, eq=False)
class EigenSpectrum:
    """Nonnegative eigenvalues sorted descending, summing to ``n``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))[::-1].copy()
        if np.any(v < 0):
            raise RiskParityError("eigenvalues must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size


def _positive_uniforms(rng, m):
    # 1 - U[0,1) lies in (0,1], so no eigenvalue is exactly zero
    return 1.0 - rng.random(m)


def _rescaled(u: np.ndarray, n: int) -> np.ndarray:
    return u * (n / u.sum())


def sample_spectrum_test1(n: int, seed: int) -> EigenSpectrum:
    """All ``n`` eigenvalues uniform on (0, 1], rescaled to sum to ``n``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return EigenSpectrum(_rescaled(_positive_uniforms(make_rng(seed), n), n))


def positive_eig_count(n: int) -> int:
    """Number of nonzero eigenvalues in a Test-2 spectrum, ``ceil(0.8 n)``."""
    return -(-4 * n // 5)


def sample_spectrum_test2(n: int, seed: int) -> EigenSpectrum:
    """``ceil(0.8 n)`` uniform eigenvalues rescaled to sum ``n``; the rest exactly zero."""
    if n < 2:
        raise ValueError("n must be at least 2")
    m = positive_eig_count(n)
    lam = np.zeros(n)
    lam[:m] = _rescaled(_positive_uniforms(make_rng(seed), m), n)
    return EigenSpectrum(lam)


def sample_spectrum(test_id: int, n: int, seed: int) -> EigenSpectrum:
    if test_id == 1:
        return sample_spectrum_test1(n, seed)
    if test_id == 2:
        return sample_spectrum_test2(n, seed)
    raise ValueError(f"unknown test id {test_id!r}")


def haar_orthogonal(n: int, seed: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR of a Gaussian matrix."""
    z = make_rng(seed).standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def _givens_to_unit_diagonal(a: np.ndarray) -> None:
    """Rotate ``a`` in place until its diagonal is all ones (trace must be n)."""
    n = a.shape[0]
    for _ in range(n - 1):
        d = np.diag(a)
        i = int(np.argmin(d))
        j = int(np.argmax(d))
        aii, ajj, aij = a[i, i], a[j, j], a[i, j]
        if aii >= 1.0 - 1e-14 or ajj <= 1.0 + 1e-14:
            break
        # tan(theta) solves (ajj-1) t^2 - 2 aij t + (aii-1) = 0; take the smaller root
        alpha, beta, gamma = ajj - 1.0, aij, aii - 1.0
        disc = math.sqrt(max(beta * beta - alpha * gamma, 0.0))
        t = gamma / (beta + math.copysign(disc, beta))
        c = 1.0 / math.sqrt(1.0 + t * t)
        s = c * t
        ri = c * a[i] - s * a[j]
        rj = s * a[i] + c * a[j]
        a[i], a[j] = ri, rj
        ci = c * a[:, i] - s * a[:, j]
        cj = s * a[:, i] + c * a[:, j]
        a[:, i], a[:, j] = ci, cj
        a[i, i] = 1.0
        a[i, j] = a[j, i] = 0.5 * (a[i, j] + a[j, i])


def random_correlation(spectrum: EigenSpectrum, seed: int) -> CorrelationMatrix:
    """Random correlation matrix whose eigenvalues are ``spectrum``.

    Raises
    ------
    SpectrumTraceMismatchError
        If the eigenvalues do not sum to ``n`` within 1e-10.
    """
    lam = spectrum.values
    n = lam.size
    if abs(lam.sum() - n) > 1e-10:
        raise SpectrumTraceMismatchError(f"eigenvalues sum to {lam.sum()!r}, expected {n}")
    q = haar_orthogonal(n, seed)
    a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    _givens_to_unit_diagonal(a)
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, 1.0)
    np.clip(a, -1.0, 1.0, out=a)
    a.setflags(write=False)
    return CorrelationMatrix(a)


def trial_matrix(test_id: int, n: int, seed: int) -> CorrelationMatrix:
    """Benchmark input for one trial: spectrum drawn from ``seed``, rotation from a derived stream."""
    spectrum = sample_spectrum(test_id, n, seed)
    return random_correlation(spectrum, derive_seed(seed, 1))
