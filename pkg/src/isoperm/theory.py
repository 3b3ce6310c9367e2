"""Executable oracles for the deterministic lemmas and concentration checks.

These run as standalone predicates so the test suite (and the CLI verify
command) can fuzz them; a failure signals an implementation bug in the norms,
permutation handling, or sampling rather than new mathematics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GroundTruth, is_permutation, variation
from .sampling import NoiseSpec, aggregate_y, sample_poissonized

__all__ = [
    "ConcentrationReport",
    "check_l2_tv_l1",
    "check_threshold_sort",
    "empirical_parsum_check",
]

_REL_EPS = 1e-12


@dataclass(frozen=True)
class ConcentrationReport:
    trials: int
    violations: int
    bound_used: float
    max_observed_deviation: float

    def __post_init__(self):
        if self.violations > self.trials:
            raise ValueError("violations cannot exceed trials")

    @property
    def violation_rate(self) -> float:
        return self.violations / self.trials


def check_l2_tv_l1(v) -> bool:
    """Verify ||v||_2^2 <= var(v) * ||v||_1 + ||v||_1^2 / n.

    Holds for every real vector; a tiny relative slack absorbs float
    rounding so that a False return indicates a genuine bug.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a nonempty 1-D vector")
    lhs = float(v @ v)
    l1 = float(np.abs(v).sum())
    rhs = variation(v) * l1 + l1 * l1 / v.size
    return lhs <= rhs * (1.0 + _REL_EPS) + _REL_EPS


def check_threshold_sort(a, perm, tau: float) -> bool:
    """Premise-implies-conclusion witness for threshold-respecting permutations.

    Premise: perm(i) < perm(j) whenever a_j - a_i > tau.  Conclusion:
    |a_{perm(i)} - a_i| <= tau for every i.  Returns False only when the
    premise holds and the conclusion fails.
    """
    a = np.asarray(a, dtype=float)
    perm = np.asarray(perm, dtype=np.int64)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("expected a nonempty 1-D sequence")
    if (np.diff(a) < 0).any():
        raise ValueError("sequence must be nondecreasing")
    if not is_permutation(perm) or perm.size != a.size:
        raise ValueError("perm must be a permutation of the sequence indices")
    if not tau > 0:
        raise ValueError("tau must be positive")
    gap_exceeds = (a[None, :] - a[:, None]) > tau
    order_respected = perm[:, None] < perm[None, :]
    premise = bool(np.all(order_respected[gap_exceeds]))
    if not premise:
        return True
    return bool(np.all(np.abs(a[perm] - a) <= tau))


def empirical_parsum_check(
    truth: GroundTruth,
    num_obs: int,
    noise: NoiseSpec,
    index_set,
    trials: int,
    seed: int,
) -> ConcentrationReport:
    """Count how often a partial sum of Y - M* exceeds its concentration bound.

    ``index_set`` is a nonempty collection of (row, col) pairs.  The bound is
    8(zeta+1)(sqrt(|S| n1 n2 / N * log(n1 n2)) + 2 (n1 n2 / N) log(n1 n2)),
    which each trial's deviation should exceed with probability at most
    2 (n1 n2)^-4.
    """
    pairs = np.asarray(index_set, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[0] == 0 or pairs.shape[1] != 2:
        raise ValueError("index_set must be a nonempty collection of (row, col) pairs")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    mstar = truth.observable()
    n1, n2 = mstar.shape
    rows, cols = pairs[:, 0], pairs[:, 1]
    target = float(mstar[rows, cols].sum())

    size = pairs.shape[0]
    log_term = math.log(n1 * n2)
    ratio = n1 * n2 / num_obs
    bound = 8.0 * (noise.zeta + 1.0) * (
        math.sqrt(size * ratio * log_term) + 2.0 * ratio * log_term
    )

    rng = np.random.default_rng(seed)
    trial_seeds = rng.integers(0, 2**63 - 1, size=trials)
    violations = 0
    max_dev = 0.0
    for s in trial_seeds:
        obs = sample_poissonized(truth, num_obs, noise, int(s))
        y = aggregate_y(obs)
        dev = abs(float(y[rows, cols].sum()) - target)
        max_dev = max(max_dev, dev)
        if dev > bound:
            violations += 1
    return ConcentrationReport(
        trials=trials,
        violations=violations,
        bound_used=bound,
        max_observed_deviation=max_dev,
    )
