"""Command line interface: solve one portfolio, generate test matrices, run benchmarks.

::

    riskparity solve --cov cov.csv --method ccd-improved --tol 1e-6
    riskparity gen --n 50 --test 2 --seed 7 --out corr.csv
    riskparity bench --test 1 --sizes 50,250 --trials 200 --seed 1 \\
        --methods ccd-orig,ccd-improved,newton --tol 1e-6 --out trials.csv
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import randcorr
from .core import CovarianceMatrix, RiskBudget, RiskParityError, risk_report, validate_covariance
from .solvers import Method, SolverConfig, SolverReport, Status, solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_SOLVER_FAILURE = 2

# method name -> (solver, rescale flag); the last entry is the rescaling ablation
METHODS = {
    "ccd-orig": (Method.CCD_ORIGINAL, True),
    "ccd-improved": (Method.CCD_IMPROVED, True),
    "newton": (Method.NEWTON, True),
    "ccd-improved-norescale": (Method.CCD_IMPROVED, False),
}
DEFAULT_METHODS = ("ccd-orig", "ccd-improved", "newton")

CSV_HEADER = "test_id,n,trial,seed,method,iterations,status,wall_time_ns,final_residual,min_weight"


class CovarianceFormatError(RiskParityError):
    pass


@dataclass(frozen=True)
class BenchPlan:
    test_id: int
    sizes: tuple
    trials_per_size: int = 200
    base_seed: int = 0
    methods: tuple = DEFAULT_METHODS
    tol: float = 1e-6

    def __post_init__(self):
        if self.test_id not in (1, 2):
            raise ValueError("test_id must be 1 or 2")
        sizes = tuple(int(n) for n in self.sizes)
        if not sizes or list(sizes) != sorted(set(sizes)) or sizes[0] < 2:
            raise ValueError("sizes must be nonempty, strictly ascending and at least 2")
        if self.trials_per_size < 1:
            raise ValueError("trials must be at least 1")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ValueError(f"unknown methods: {unknown}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass(frozen=True)
class TrialRecord:
    test_id: int
    n: int
    trial: int
    seed: int
    method: str
    iterations: int
    status: str
    wall_time_ns: int
    final_residual: float
    min_weight: float


def record_fields() -> list[str]:
    return [f.name for f in fields(TrialRecord)]


def run_method(name: str, cov: CovarianceMatrix, tol: float) -> SolverReport:
    method, rescale = METHODS[name]
    return solve(cov, method, tol=tol, rescale=rescale)


def _min_weight(report: SolverReport) -> float:
    w = report.weights
    if np.all(np.isfinite(w)):
        return float(w.min())
    return float(report.weights_raw.min())


def run_trial(test_id: int, n: int, trial: int, base_seed: int, methods: Sequence[str], tol: float) -> list[TrialRecord]:
    """Solve one generated matrix with every method; times cover the solve call only."""
    seed = randcorr.trial_seed(base_seed, n, trial)
    corr = randcorr.trial_matrix(test_id, n, seed)
    cov = CovarianceMatrix(corr.entries, np.ones(n))
    records = []
    for name in methods:
        start = time.perf_counter_ns()
        report = run_method(name, cov, tol)
        elapsed = time.perf_counter_ns() - start
        records.append(
            TrialRecord(
                test_id=test_id,
                n=n,
                trial=trial,
                seed=seed,
                method=name,
                iterations=report.iterations,
                status=report.status.value,
                wall_time_ns=elapsed,
                final_residual=report.final_residual,
                min_weight=_min_weight(report),
            )
        )
    return records


def _run_item(args):
    return run_trial(*args)


def run_plan(plan: BenchPlan, jobs: int = 1) -> list[TrialRecord]:
    """Run every (n, trial) of ``plan``; output order does not depend on ``jobs``."""
    items = [
        (plan.test_id, n, t, plan.base_seed, plan.methods, plan.tol)
        for n in plan.sizes
        for t in range(plan.trials_per_size)
    ]
    if jobs <= 1:
        chunks = [_run_item(item) for item in items]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_item, items, chunksize=4))
    order = {m: k for k, m in enumerate(plan.methods)}
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (r.n, r.trial, order[r.method]))
    return records


def format_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in records:
        buf.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in astuple(r)) + "\n")
    return buf.getvalue()


def read_records(path) -> list[TrialRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    types = {f.name: f.type for f in fields(TrialRecord)}
    casts = {"int": int, "float": float, "str": str}
    return [TrialRecord(**{k: casts[types[k]](v) for k, v in row.items()}) for row in rows]


def summarize(records: Sequence[TrialRecord]) -> list[dict]:
    """Per (n, method): trial count, converged count, mean/median iterations and wall time."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.n, r.method), []).append(r)
    rows = []
    for (n, method), recs in groups.items():
        its = [r.iterations for r in recs]
        ms = [r.wall_time_ns * 1e-6 for r in recs]
        rows.append(
            {
                "n": n,
                "method": method,
                "trials": len(recs),
                "converged": sum(r.status == Status.CONVERGED.value for r in recs),
                "mean_iter": statistics.fmean(its),
                "median_iter": statistics.median(its),
                "mean_ms": statistics.fmean(ms),
                "median_ms": statistics.median(ms),
            }
        )
    return rows


def format_summary(rows: Sequence[dict]) -> str:
    lines = [
        f"{'n':>6} {'method':<24} {'conv':>9} {'mean it':>8} {'med it':>7} {'mean ms':>10} {'med ms':>10}"
    ]
    for row in rows:
        lines.append(
            f"{row['n']:>6} {row['method']:<24} {row['converged']:>4}/{row['trials']:<4} "
            f"{row['mean_iter']:>8.2f} {row['median_iter']:>7.1f} {row['mean_ms']:>10.3f} {row['median_ms']:>10.3f}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# covariance files


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_covariance_csv(path) -> tuple[Optional[list[str]], np.ndarray]:
    """Parse an N x N covariance CSV, with an optional header row of asset names."""
    with open(path, newline="") as fh:
        rows = [[tok.strip() for tok in row] for row in csv.reader(fh) if any(tok.strip() for tok in row)]
    if not rows:
        raise CovarianceFormatError(f"{path}: file is empty")
    names = None
    if not _is_number(rows[0][0]):
        names, rows = rows[0], rows[1:]
    if not rows:
        raise CovarianceFormatError(f"{path}: no numeric rows")
    width = len(rows[0])
    for k, row in enumerate(rows, start=1):
        if len(row) != width:
            raise CovarianceFormatError(f"{path}: row {k} has {len(row)} fields, expected {width}")
        for tok in row:
            if not _is_number(tok):
                raise CovarianceFormatError(f"{path}: row {k} has non-numeric field {tok!r}")
    if len(rows) != width:
        raise CovarianceFormatError(f"{path}: matrix is not square ({len(rows)} rows x {width} columns)")
    if names is not None and len(names) != width:
        raise CovarianceFormatError(f"{path}: header has {len(names)} names for {width} columns")
    return names, np.array([[float(t) for t in row] for row in rows])


def format_matrix_csv(m: np.ndarray) -> str:
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in m)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(cov_path, method: str = "ccd-improved", tol: float = 1e-6, budget_path=None, out=None) -> int:
    try:
        names, raw = read_covariance_csv(cov_path)
        cov = validate_covariance(raw)
        budget = RiskBudget.from_file(budget_path) if budget_path else None
        if budget is not None and len(budget) != cov.dim:
            raise RiskParityError(f"budget has {len(budget)} entries for {cov.dim} assets")
        if method not in METHODS:
            raise RiskParityError(f"unknown method {method!r}")
        solver, rescale = METHODS[method]
        report = solve(cov, solver, tol=tol, rescale=rescale, budget=budget)
    except (OSError, RiskParityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    names = names or [f"asset{k + 1}" for k in range(cov.dim)]
    with np.errstate(invalid="ignore"):
        relative = risk_report(cov, report.weights).relative if report.converged else np.full(cov.dim, np.nan)
    table = "asset,weight,risk_contribution\n" + "".join(
        f"{name},{w!r},{v!r}\n" for name, w, v in zip(names, report.weights.tolist(), relative.tolist())
    )
    print(f"method: {method}")
    print(f"status: {report.status.value}")
    print(f"iterations: {report.iterations}")
    print(f"final_residual: {report.final_residual:.3e}")
    sys.stdout.write(table)
    if out:
        Path(out).write_text(table)
    return EXIT_OK if report.converged else EXIT_SOLVER_FAILURE


def cmd_bench(plan: BenchPlan, out_csv, jobs: int = 1) -> int:
    records = run_plan(plan, jobs=jobs)
    Path(out_csv).write_text(format_csv(records))
    print(format_summary(summarize(records)))
    return EXIT_OK


def cmd_gen(n: int, test_id: int, seed: int, out) -> int:
    """Write trial 0 of ``(n, test_id, seed)`` as a covariance CSV (sigma = 1)."""
    corr = randcorr.trial_matrix(test_id, n, randcorr.trial_seed(seed, n, 0))
    Path(out).write_text(format_matrix_csv(corr.entries))
    return EXIT_OK


def _comma_ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _comma_list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskparity", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve risk parity weights for a covariance CSV")
    p.add_argument("--cov", required=True)
    p.add_argument("--method", choices=list(METHODS), default="ccd-improved")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--budget")
    p.add_argument("--out")

    p = sub.add_parser("bench", help="run a Test 1 / Test 2 benchmark campaign")
    p.add_argument("--test", type=int, choices=(1, 2), required=True)
    p.add_argument("--sizes", type=_comma_ints, required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", type=_comma_list, default=list(DEFAULT_METHODS))
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.add_argument("--serial", action="store_true", help="run trials one at a time (timing runs)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")

    p = sub.add_parser("gen", help="write one random correlation matrix as covariance CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--test", type=int, choices=(1, 2), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "solve":
        return cmd_solve(args.cov, args.method, args.tol, args.budget, args.out)
    if args.command == "gen":
        if args.n < 2:
            print("error: --n must be at least 2", file=sys.stderr)
            return EXIT_INPUT_ERROR
        try:
            return cmd_gen(args.n, args.test, args.seed, args.out)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT_ERROR
    try:
        plan = BenchPlan(
            test_id=args.test,
            sizes=tuple(args.sizes),
            trials_per_size=args.trials,
            base_seed=args.seed,
            methods=tuple(args.methods),
            tol=args.tol,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    jobs = 1 if args.serial else (args.jobs or os.cpu_count() or 1)
    try:
        return cmd_bench(plan, args.out, jobs=jobs)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
