"""GP-sample-path testbed, benchmark runner, aggregation and the 1-D demo objective."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from .acquisition import CandidateSet
from .gp import MaternKernel, SingularModelError, sample_paths
from .strategy import Policy, extract_estimators, run_on_candidates, snap_to_candidates

log = logging.getLogger(__name__)

__all__ = [
    "beta_from_dimension",
    "TestbedConfig",
    "Testbed",
    "BenchmarkRecord",
    "AggregateRow",
    "BenchmarkError",
    "generate_testbed",
    "run_benchmark",
    "aggregate",
    "fig2_function",
    "paired_sign_test",
    "write_records",
    "read_records",
    "write_aggregate",
    "read_aggregate",
]

RECORD_FIELDS = ("path_id", "strategy", "n", "value_error", "location_error")
AGGREGATE_FIELDS = (
    "strategy",
    "n",
    "mean_value_error",
    "se_value_error",
    "mean_location_error",
    "se_location_error",
)
MAX_FAILURE_RATE = 0.01


class BenchmarkError(RuntimeError):
    pass


def beta_from_dimension(d: int) -> float:
    """Length scale (0.04 Gamma(d/2 + 1) / pi^(d/2))^(1/d): a ball of radius beta has volume 0.04."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return math.exp((math.log(0.04) + math.lgamma(d / 2 + 1) - (d / 2) * math.log(math.pi)) / d)


@dataclass(frozen=True)
class TestbedConfig:
    __test__ = False

    d: int = 3
    m: int = 200
    n_paths: int = 100
    budget: int = 40
    seed: int = 0
    grid_scheme: str = "uniform_random"
    kernel: Optional[MaternKernel] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 1 <= self.budget <= self.m:
            raise ValueError("budget must lie in [1, m]")
        if self.grid_scheme not in ("uniform_random", "regular"):
            raise ValueError(f"unknown grid scheme {self.grid_scheme!r}")
        if self.kernel is None:
            object.__setattr__(self, "kernel", MaternKernel(1.0, beta_from_dimension(self.d), 6.5))


@dataclass
class Testbed:
    __test__ = False

    config: TestbedConfig
    grid: CandidateSet
    paths: np.ndarray
    argmax: np.ndarray = field(init=False)
    maxima: np.ndarray = field(init=False)

    def __post_init__(self):
        self.argmax = np.argmax(self.paths, axis=1)
        self.maxima = self.paths[np.arange(len(self.paths)), self.argmax]


class BenchmarkRecord(NamedTuple):
    path_id: int
    strategy: str
    n: int
    value_error: float
    location_error: float


class AggregateRow(NamedTuple):
    strategy: str
    n: int
    mean_value_error: float
    se_value_error: float
    mean_location_error: float
    se_location_error: float


def generate_testbed(config: TestbedConfig) -> Testbed:
    grid_seq, path_seq = np.random.SeedSequence(config.seed).spawn(2)
    lower, upper = np.zeros(config.d), np.ones(config.d)
    if config.grid_scheme == "regular":
        grid = CandidateSet.regular(lower, upper, config.m)
    else:
        grid = CandidateSet.uniform_random(lower, upper, config.m, grid_seq)
    paths = sample_paths(config.kernel, grid.points, config.n_paths, path_seq)
    return Testbed(config, grid, paths)


def _run_path(testbed: Testbed, path_id: int, strategies: Sequence[Policy], budget: int):
    path = testbed.paths[path_id]
    grid = testbed.grid
    start = snap_to_candidates(np.full(grid.points.shape[1], 0.5), grid)
    out = []
    for pol in strategies:
        trace = run_on_candidates(path.__getitem__, testbed.config.kernel, grid, budget, pol, start)
        verr, lerr = extract_estimators(trace, grid.points, path)
        out.extend(
            BenchmarkRecord(path_id, pol.name, n + 1, float(verr[n]), float(lerr[n])) for n in range(budget)
        )
    return out


_WORKER_TESTBED: Optional[Testbed] = None


def _init_worker(testbed):
    global _WORKER_TESTBED
    _WORKER_TESTBED = testbed


def _worker(args):
    path_id, strategies, budget = args
    try:
        return path_id, _run_path(_WORKER_TESTBED, path_id, strategies, budget), None
    except (SingularModelError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return path_id, [], repr(exc)


def run_benchmark(
    testbed: Testbed, strategies: Sequence[Policy], budget: Optional[int] = None, threads: int = 1
) -> List[BenchmarkRecord]:
    """One record per (path, strategy, n); output order is independent of ``threads``."""
    budget = testbed.config.budget if budget is None else budget
    if not 1 <= budget <= len(testbed.grid):
        raise ValueError("budget must lie in [1, m]")
    jobs = [(p, tuple(strategies), budget) for p in range(len(testbed.paths))]
    if threads <= 1:
        _init_worker(testbed)
        results = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(threads, initializer=_init_worker, initargs=(testbed,)) as ex:
            results = list(ex.map(_worker, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    records, failures = [], []
    for path_id, recs, err in sorted(results, key=lambda r: r[0]):
        if err is not None:
            log.warning("path %d failed: %s", path_id, err)
            failures.append(path_id)
        records.extend(recs)
    if len(failures) > MAX_FAILURE_RATE * len(jobs):
        raise BenchmarkError(f"{len(failures)} of {len(jobs)} paths failed")
    return records


def aggregate(records: Iterable[BenchmarkRecord]) -> List[AggregateRow]:
    """Mean value/location error curves per strategy with standard errors over paths."""
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    cells = {}
    for r in records:
        cells.setdefault((r.strategy, r.n), {})
        if r.path_id in cells[(r.strategy, r.n)]:
            raise ValueError(f"duplicate record for path {r.path_id}, {r.strategy}, n={r.n}")
        cells[(r.strategy, r.n)][r.path_id] = (r.value_error, r.location_error)
    path_sets = {frozenset(v) for v in cells.values()}
    steps = {}
    for s, n in cells:
        steps.setdefault(s, set()).add(n)
    if len(path_sets) != 1 or len({frozenset(v) for v in steps.values()}) != 1:
        raise ValueError("unbalanced record set")
    rows = []
    for s, n in sorted(cells, key=lambda k: (k[0], k[1])):
        cell = cells[(s, n)]
        arr = np.array([cell[p] for p in sorted(cell)])
        k = len(arr)
        mean = arr.mean(axis=0)
        se = arr.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.zeros(2)
        rows.append(AggregateRow(s, n, float(mean[0]), float(se[0]), float(mean[1]), float(se[1])))
    return rows


def paired_sign_test(records: Iterable[BenchmarkRecord], n: int, better: str, worse: str, field="location_error"):
    """One-sided sign test that ``better`` has smaller error than ``worse`` at step n; ties dropped.

    Returns ``(wins, losses, p_value)``.
    """
    by = {}
    for r in records:
        if r.n == n and r.strategy in (better, worse):
            by.setdefault(r.path_id, {})[r.strategy] = getattr(r, field)
    wins = sum(1 for v in by.values() if len(v) == 2 and v[better] < v[worse])
    losses = sum(1 for v in by.values() if len(v) == 2 and v[better] > v[worse])
    if wins + losses == 0:
        return 0, 0, 1.0
    p = stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
    return wins, losses, float(p)


def fig2_function(x):
    """(0.8x - 0.2)^2 + exp(-|x + 0.1|^1.95 / (2 * 0.1^1.95)) + exp(-(2x - 0.6)^2 / 0.2) - 0.02 on [-1, 1]."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa < -1.0) or np.any(xa > 1.0):
        raise ValueError("fig2_function is defined on [-1, 1]")
    val = (
        (0.8 * xa - 0.2) ** 2
        + np.exp(-0.5 * np.abs(xa + 0.1) ** 1.95 / 0.1**1.95)
        + np.exp(-0.5 * (2.0 * xa - 0.6) ** 2 / 0.1)
        - 0.02
    )
    return val.item() if val.ndim == 0 else val


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_records(path, records: Iterable[BenchmarkRecord]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([r.path_id, r.strategy, r.n, _fmt(r.value_error), _fmt(r.location_error)])


def read_records(path) -> List[BenchmarkRecord]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != RECORD_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(RECORD_FIELDS)}")
        return [
            BenchmarkRecord(int(r["path_id"]), r["strategy"], int(r["n"]), float(r["value_error"]), float(r["location_error"]))
            for r in rd
        ]


def write_aggregate(path, rows: Iterable[AggregateRow]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_FIELDS)
        for r in rows:
            w.writerow([r.strategy, r.n, *(_fmt(v) for v in r[2:])])


def read_aggregate(path) -> List[AggregateRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != AGGREGATE_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(AGGREGATE_FIELDS)}")
        return [AggregateRow(r["strategy"], int(r["n"]), *(float(r[k]) for k in AGGREGATE_FIELDS[2:])) for r in rd]


def default_threads() -> int:
    return os.cpu_count() or 1
