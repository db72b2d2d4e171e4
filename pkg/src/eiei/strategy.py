"""Sequential design loop with EI-maximization and EIEI-minimization policies."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .acquisition import CandidateSet, _ei, eiei_all, sd_floor
from .gp import GPPosterior, MaternKernel, condition, posterior_mean_cov, update

__all__ = [
    "PolicyKind",
    "Policy",
    "OptimizationTrace",
    "OptimizationAborted",
    "select_next_ei",
    "select_next_eiei",
    "run_on_candidates",
    "run_optimization",
    "extract_estimators",
    "snap_to_candidates",
]


class PolicyKind(str, enum.Enum):
    EI_MAX = "ei"
    EIEI_MIN = "eiei"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind

    @classmethod
    def parse(cls, name) -> "Policy":
        return cls(PolicyKind(str(name).lower()))

    @property
    def name(self) -> str:
        return self.kind.value


class OptimizationAborted(RuntimeError):
    """The objective failed mid-run; ``trace`` holds the evaluations made so far."""

    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass
class OptimizationTrace:
    """Evaluation history of one run.

    ``criterion[i]`` is the criterion value at which evaluation i was selected
    (NaN for the initial point); ``h_prime[i]`` is the integrated EI over the
    candidate set after i + 1 evaluations.
    """

    points: list = field(default_factory=list)
    values: list = field(default_factory=list)
    indices: list = field(default_factory=list)
    criterion: list = field(default_factory=list)
    h_prime: list = field(default_factory=list)

    def __len__(self):
        return len(self.values)

    @property
    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(np.asarray(self.values, dtype=float))

    def append(self, point, value, index, crit):
        self.points.append(np.asarray(point, dtype=float))
        self.values.append(float(value))
        self.indices.append(index)
        self.criterion.append(float(crit))


def _observed_mask(post: GPPosterior, cand: CandidateSet) -> np.ndarray:
    mask = np.zeros(len(cand), dtype=bool)
    for p in post.points:
        mask |= np.all(cand.points == p, axis=1)
    return mask


def _ei_scores(post, t, cand, mean=None, var=None):
    if mean is None:
        mean, var = post.mean_var(cand.points)
    return _ei(mean, np.sqrt(var), t, sd_floor(post))


def select_next_ei(post: GPPosterior, t: float, cand: CandidateSet, exclude=None):
    """Index of the unobserved candidate with maximal EI (lowest index on ties), and that EI."""
    scores = _ei_scores(post, t, cand)
    blocked = _observed_mask(post, cand) if exclude is None else np.asarray(exclude, bool)
    if blocked.all():
        raise ValueError("no selectable candidate left")
    scores = np.where(blocked, -np.inf, scores)
    i = int(np.argmax(scores))
    return i, float(scores[i])


def select_next_eiei(post: GPPosterior, t: float, cand: CandidateSet, exclude=None, mean=None, cov=None):
    """Index of the unobserved candidate with minimal EIEI (lowest index on ties), and that value."""
    blocked = _observed_mask(post, cand) if exclude is None else np.asarray(exclude, bool)
    rows = np.flatnonzero(~blocked)
    if len(rows) == 0:
        raise ValueError("no selectable candidate left")
    vals = eiei_all(post, t, cand, rows, mean, cov)
    j = int(np.argmin(vals))
    return int(rows[j]), float(vals[j])


def snap_to_candidates(point, cand: CandidateSet) -> int:
    """Nearest candidate to ``point``; lowest index on distance ties."""
    d2 = np.sum((cand.points - np.asarray(point, float)) ** 2, axis=1)
    return int(np.argmin(d2))


def run_on_candidates(
    objective: Callable[[int], float],
    kernel: MaternKernel,
    cand: CandidateSet,
    budget: int,
    policy: Policy,
    start: int,
) -> OptimizationTrace:
    """Run the loop with ``objective`` addressed by candidate index, starting at index ``start``."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if budget > len(cand):
        raise ValueError("budget exceeds the number of candidates")
    trace = OptimizationTrace()
    observed = np.zeros(len(cand), dtype=bool)
    post = condition(kernel, np.zeros((0, cand.points.shape[1])), [])
    nxt, crit = start, math.nan
    for n in range(budget):
        if observed[nxt]:
            raise RuntimeError(f"policy selected candidate {nxt} twice")
        try:
            value = float(objective(nxt))
        except Exception as exc:  # objective failure aborts with what we have
            raise OptimizationAborted(f"objective failed at step {n + 1}: {exc}", trace) from exc
        trace.append(cand.points[nxt], value, nxt, crit)
        observed[nxt] = True
        post = update(post, cand.points[nxt], value)
        t = max(trace.values)
        if policy.kind is PolicyKind.EIEI_MIN:
            mean, cov = posterior_mean_cov(post, cand.points)
            var = np.diag(cov)
        else:
            mean, var = post.mean_var(cand.points)
        trace.h_prime.append(float(cand.weight * _ei_scores(post, t, cand, mean, var).sum()))
        if n + 1 == budget:
            break
        if policy.kind is PolicyKind.EIEI_MIN:
            nxt, crit = select_next_eiei(post, t, cand, observed, mean, cov)
        else:
            scores = np.where(observed, -np.inf, _ei_scores(post, t, cand, mean, var))
            nxt = int(np.argmax(scores))
            crit = float(scores[nxt])
    return trace


def run_optimization(
    objective: Callable[[np.ndarray], float],
    kernel: MaternKernel,
    domain,
    budget: int,
    cand: Optional[CandidateSet],
    policy: Policy,
    seed: int = 0,
    m: int = 200,
) -> OptimizationTrace:
    """Optimize ``objective`` over a box ``domain = (lower, upper)``.

    The first evaluation is the box center snapped to the candidate set. When
    ``cand`` is None, ``m`` uniform random candidates are drawn with ``seed``.
    """
    lower, upper = (np.asarray(b, dtype=float) for b in domain)
    if cand is None:
        cand = CandidateSet.uniform_random(lower, upper, m, seed)
    start = snap_to_candidates(0.5 * (lower + upper), cand)
    return run_on_candidates(lambda i: objective(cand.points[i]), kernel, cand, budget, policy, start)


def extract_estimators(trace: OptimizationTrace, grid_points, grid_values):
    """Per-step value error M - M_n and location error ||x* - x*_n|| against a tabulated truth.

    x* is the first grid argmax; x*_n is the first evaluated point attaining M_n.
    """
    grid_points = np.asarray(grid_points, dtype=float)
    grid_values = np.asarray(grid_values, dtype=float)
    idx = np.asarray(trace.indices)
    if len(grid_points) != len(grid_values):
        raise ValueError("grid points and values differ in length")
    if np.any(idx < 0) or np.any(idx >= len(grid_values)):
        raise ValueError("trace refers to points outside the grid")
    if not np.array_equal(grid_values[idx], np.asarray(trace.values)):
        raise ValueError("trace values do not match the grid values")
    star = int(np.argmax(grid_values))
    top = grid_values[star]
    value_err = np.empty(len(idx))
    loc_err = np.empty(len(idx))
    best = 0
    for n in range(len(idx)):
        if trace.values[n] > trace.values[best]:
            best = n
        value_err[n] = top - trace.values[best]
        loc_err[n] = float(np.linalg.norm(grid_points[star] - grid_points[idx[best]]))
    return value_err, loc_err
