"""Brute-force reference solvers for small portfolios.

Two oracles that share no update rule with the iterative solvers:

* :func:`oracle_grid` scans the unit simplex for the smallest
  ``max_i |v_i / V - b_i|`` and polishes the best grid point with a pattern
  search.
* :func:`oracle_descent` runs backtracking gradient descent on the convex
  potential ``0.5 w'Rw - sum(b log w)``.

Running ``python -m riskparity.oracle`` prints the golden fixture file.
"""

from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import RiskParityError, as_budget, as_correlation, validate_covariance

GRID_STEP = 5e-4
REFINE_HALVINGS = 20


class DimensionTooLargeError(RiskParityError):
    pass


class NoDescentProgressError(RiskParityError):
    pass


@dataclass(frozen=True, eq=False)
class OracleResult:
    weights: np.ndarray
    max_relative_deviation: float
    evaluations: int


def _deviation(c: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row-wise ``max_i |w_i (Cw)_i / w'Cw - b_i|`` for a stack of weight rows."""
    contrib = w * (w @ c)
    total = contrib.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = contrib / total
    dev = np.max(np.abs(rel - b), axis=-1)
    return np.where(total[..., 0] > 0, dev, np.inf)


def _sq_deviation(c: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    contrib = w * (w @ c)
    total = contrib.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.sum((contrib / total - b) ** 2, axis=-1)
    return np.where(total[..., 0] > 0, err, np.inf)


def _grid_search(c, b, units):
    n = c.shape[0]
    best_dev, best_w, evals = np.inf, None, 0
    tail = np.arange(units + 1)
    for head in itertools.product(range(units + 1), repeat=n - 2):
        rest = units - sum(head)
        if rest < 0:
            continue
        k = tail[: rest + 1]
        pts = np.empty((k.size, n))
        pts[:, : n - 2] = head
        pts[:, n - 2] = k
        pts[:, n - 1] = rest - k
        pts /= units
        dev = _deviation(c, b, pts)
        evals += k.size
        idx = int(np.argmin(dev))
        if dev[idx] < best_dev:
            best_dev, best_w = float(dev[idx]), pts[idx].copy()
    return best_w, best_dev, evals


def _pattern_refine(c, b, w, step):
    # the smooth squared error avoids stalling at kinks of the max-deviation surface
    n = w.size
    dev = float(_sq_deviation(c, b, w))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    moves = np.zeros((len(pairs), n))
    for k, (i, j) in enumerate(pairs):
        moves[k, i], moves[k, j] = 1.0, -1.0
    evals = 0
    h = step
    for _ in range(REFINE_HALVINGS):
        h *= 0.5
        for _ in range(10_000):
            cand = w + h * moves
            cand = cand[np.all(cand >= 0, axis=1)]
            if cand.size == 0:
                break
            cdev = _sq_deviation(c, b, cand)
            evals += len(cand)
            k = int(np.argmin(cdev))
            if not cdev[k] < dev:
                break
            w, dev = cand[k], float(cdev[k])
    return w, evals


def oracle_grid(cov, b=None, step: float = GRID_STEP) -> OracleResult:
    """Exhaustive simplex grid search for portfolio weights, ``N <= 4``.

    The grid spacing is ``step``. The best grid point is then refined by
    transferring weight between pairs of assets to reduce the squared
    budget error, halving the transfer size 20 times. Deterministic: ties
    resolve to the lexicographically smallest weights.
    """
    cov = validate_covariance(cov)
    n = cov.dim
    if n > 4:
        raise DimensionTooLargeError(f"grid oracle supports N <= 4, got {n}")
    b = as_budget(b, n).values
    units = int(round(1.0 / step))
    w, _, evals = _grid_search(cov.entries, b, units)
    w, more = _pattern_refine(cov.entries, b, w, 1.0 / units)
    w = w / w.sum()
    dev = float(_deviation(cov.entries, b, w))
    return OracleResult(weights=w, max_relative_deviation=dev, evaluations=evals + more)


def _potential(m, b, w):
    if np.any(w <= 0):
        return math.inf
    return 0.5 * float(w @ m @ w) - float(b @ np.log(w))


def oracle_descent(corr, b=None, vols=None, max_steps: int = 1_000_000, gtol: float = 1e-10) -> OracleResult:
    """Gradient descent with backtracking on ``0.5 w'Rw - sum(b log w)``.

    Starts at the flat vector with ``w'Rw = 1``. A trial step of size
    ``t`` (starting from 0.1, halved on failure) is accepted when the
    potential drops or, once differences fall below rounding, when the
    directional derivative at the trial point is still negative; convexity
    makes either a certificate of descent.
    """
    r = as_correlation(corr)
    m = r.entries
    n = r.dim
    b = as_budget(b, n).values
    vols = np.ones(n) if vols is None else np.asarray(vols, dtype=float)
    w = np.full(n, 1.0 / math.sqrt(float(m.sum())))
    phi = _potential(m, b, w)
    evals = 1
    for _ in range(max_steps):
        g = m @ w - b / w
        if float(np.max(np.abs(g))) <= gtol:
            break
        t = 0.1
        while True:
            cand = w - t * g
            cphi = _potential(m, b, cand)
            evals += 1
            if cphi < phi:
                break
            if math.isfinite(cphi) and float(g @ (m @ cand - b / cand)) > 0:
                break
            t *= 0.5
            if t < 1e-30:
                raise NoDescentProgressError("line search failed to find descent")
        w, phi = cand, cphi
    else:
        raise NoDescentProgressError(f"gradient norm above {gtol} after {max_steps} steps")
    x = w / vols
    weights = x / x.sum()
    rel = w * (m @ w) / float(w @ m @ w)
    return OracleResult(weights=weights, max_relative_deviation=float(np.max(np.abs(rel - b))), evaluations=evals)


# ---------------------------------------------------------------------------
# fixtures

FIXTURE_CASES = [
    ((0.1, 0.2, 0.3), (0.8, 0.2, 0.4)),
    ((0.1, 0.2), (0.3,)),
    ((0.15, 0.25, 0.05), (-0.3, 0.1, 0.6)),
    ((0.2, 0.2, 0.2), (0.0, 0.0, 0.9)),
]


def cov_from_sigma_rho(sigma, rho) -> np.ndarray:
    """Covariance from vols and the upper-triangle correlations (row order)."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    r = np.eye(n)
    iu = np.triu_indices(n, 1)
    r[iu] = rho
    r.T[iu] = rho
    return r * np.outer(sigma, sigma)


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def fixture_line(sigma, rho) -> str:
    res = oracle_grid(cov_from_sigma_rho(sigma, rho))
    return (
        f"sigma={_fmt(sigma)}; rho={_fmt(rho)}; "
        f"weights={_fmt(res.weights)}; deviation={res.max_relative_deviation!r}"
    )


def load_fixtures(path) -> list[dict]:
    cases = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entry = {}
        for part in line.split(";"):
            key, _, value = part.strip().partition("=")
            floats = [float(v) for v in value.split(",")]
            entry[key] = floats[0] if key == "deviation" else np.array(floats)
        cases.append(entry)
    return cases


def main(argv=None) -> int:
    out = sys.stdout
    out.write("# generated by: python -m riskparity.oracle > tests/fixtures/golden.txt\n")
    for sigma, rho in FIXTURE_CASES:
        out.write(fixture_line(sigma, rho) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
