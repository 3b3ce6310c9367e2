"""Poissonized uniform-sampling observation model and sample splitting.

Observations are drawn with replacement from the entries of the observable
matrix; the realized sample count is Poisson with mean equal to the nominal
budget N.  The aggregated observation matrix Y rescales per-cell averages by
the observation probability so that E[Y] equals the underlying matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .core import GroundTruth, as_matrix

__all__ = [
    "NoiseSpec",
    "Observation",
    "ObservationSet",
    "p_obs",
    "sample_poissonized",
    "observe_each_entry",
    "aggregate_y",
    "split_observations",
    "read_observations_csv",
    "write_observations_csv",
]

# Nominal-budget multiple at which 1 - exp(-N / (n1 n2)) rounds to exactly 1.0
# in float64; used by observe_each_entry so full scans aggregate unscaled.
_SATURATION_FACTOR = 64


@dataclass(frozen=True)
class NoiseSpec:
    """Noise channel applied to sampled entries.

    ``kind`` is one of "bernoulli", "gaussian", "noiseless".  ``sigma`` is the
    gaussian standard deviation and must be 0 for the other kinds.
    """

    kind: str
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("bernoulli", "gaussian", "noiseless"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError("sigma must be finite and >= 0")
        if self.kind != "gaussian" and self.sigma != 0.0:
            raise ValueError(f"sigma is only meaningful for gaussian noise")

    @classmethod
    def bernoulli(cls) -> "NoiseSpec":
        return cls("bernoulli")

    @classmethod
    def gaussian(cls, sigma: float) -> "NoiseSpec":
        return cls("gaussian", sigma)

    @classmethod
    def noiseless(cls) -> "NoiseSpec":
        return cls("noiseless")

    @property
    def zeta(self) -> float:
        """Sub-Gaussian scale of the channel (1/2 for Bernoulli, sigma for gaussian)."""
        if self.kind == "bernoulli":
            return 0.5
        if self.kind == "gaussian":
            return self.sigma
        return 0.0

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        """Parse "bernoulli", "noiseless", or "gaussian:<sigma>"."""
        if text == "bernoulli":
            return cls.bernoulli()
        if text == "noiseless":
            return cls.noiseless()
        if text.startswith("gaussian:"):
            return cls.gaussian(float(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse noise spec {text!r}")

    def __str__(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian:{self.sigma}"
        return self.kind


class Observation(NamedTuple):
    row: int
    col: int
    value: float


@dataclass(frozen=True)
class ObservationSet:
    """Samples of matrix entries with their nominal budget.

    ``rows``/``cols`` are 0-based index arrays, ``values`` the observed
    values; all three have equal length (the realized sample count).
    ``nominal_n`` is the budget N driving the estimator thresholds; it is
    kept at the full-sample budget even after splitting.  ``rate_n`` is the
    effective Poisson rate of this particular set (``nominal_n`` for a fresh
    sample, divided by the number of parts after thinning) and drives the
    observation-probability rescaling so aggregation stays unbiased.
    """

    n1: int
    n2: int
    nominal_n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    rate_n: float | None = None

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("dimensions must be >= 1")
        if self.nominal_n < 1:
            raise ValueError("nominal_n must be a positive integer")
        if self.rate_n is None:
            object.__setattr__(self, "rate_n", float(self.nominal_n))
        elif not self.rate_n >= 1:
            raise ValueError("rate_n must be >= 1")
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ValueError("rows, cols, values must be 1-D arrays of equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n1):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n2):
            raise ValueError("column index out of range")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.rows.size

    def __iter__(self) -> Iterator[Observation]:
        for r, c, v in zip(self.rows, self.cols, self.values):
            yield Observation(int(r), int(c), float(v))


def p_obs(num_obs: float, n1: int, n2: int) -> float:
    """Probability that a given entry is observed at least once: 1 - exp(-N/(n1 n2))."""
    if num_obs < 1 or n1 < 1 or n2 < 1:
        raise ValueError("num_obs and dimensions must be >= 1")
    return 1.0 - math.exp(-num_obs / (n1 * n2))


def sample_poissonized(
    truth: GroundTruth, num_obs: int, noise: NoiseSpec, seed: int
) -> ObservationSet:
    """Draw Poisson(num_obs) uniform samples of the observable matrix's entries.

    Positions are sampled with replacement; values pass through the noise
    channel.  Bernoulli noise requires all entries of the observable matrix
    to lie in [0, 1].  Deterministic for a fixed seed.
    """
    mstar = truth.observable()
    n1, n2 = mstar.shape
    if noise.kind == "bernoulli" and (mstar.min() < 0.0 or mstar.max() > 1.0):
        raise ValueError("bernoulli noise requires entries in [0, 1]")
    rng = np.random.default_rng(seed)
    count = int(rng.poisson(num_obs))
    flat = rng.integers(0, n1 * n2, size=count)
    rows = flat // n2
    cols = flat % n2
    means = mstar[rows, cols]
    if noise.kind == "bernoulli":
        values = (rng.random(count) < means).astype(float)
    elif noise.kind == "gaussian":
        values = means + rng.normal(0.0, noise.sigma, size=count)
    else:
        values = means.copy()
    return ObservationSet(n1=n1, n2=n2, nominal_n=num_obs, rows=rows, cols=cols, values=values)


def observe_each_entry(
    truth: GroundTruth, repeats: int = 1, nominal_n: int | None = None
) -> ObservationSet:
    """Noiseless deterministic scan observing every entry ``repeats`` times.

    By default the nominal budget is set high enough that the observation
    probability saturates to exactly 1.0 in float64, so aggregation
    reproduces the observable matrix exactly.  Intended for exact-recovery
    fixtures and calibration runs rather than the statistical model.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    mstar = truth.observable()
    n1, n2 = mstar.shape
    if nominal_n is None:
        nominal_n = _SATURATION_FACTOR * n1 * n2
    rows, cols = np.divmod(np.arange(n1 * n2, dtype=np.int64), n2)
    rows = np.tile(rows, repeats)
    cols = np.tile(cols, repeats)
    values = mstar[rows, cols]
    return ObservationSet(
        n1=n1, n2=n2, nominal_n=nominal_n, rows=rows, cols=cols, values=values
    )


def aggregate_y(obs: ObservationSet) -> np.ndarray:
    """Observation matrix Y: per-cell average divided by p_obs, 0 where unobserved."""
    p = p_obs(obs.rate_n, obs.n1, obs.n2)
    flat = obs.rows * obs.n2 + obs.cols
    counts = np.bincount(flat, minlength=obs.n1 * obs.n2).astype(float)
    sums = np.bincount(flat, weights=obs.values, minlength=obs.n1 * obs.n2)
    hit = counts > 0
    y = np.zeros(obs.n1 * obs.n2)
    y[hit] = sums[hit] / counts[hit] / p
    return y.reshape(obs.n1, obs.n2)


def split_observations(obs: ObservationSet, parts: int, seed: int) -> list[ObservationSet]:
    """Assign each observation independently and uniformly to one of ``parts`` sets.

    Poisson thinning keeps the parts mutually independent; each part keeps
    the full nominal budget, matching the convention that every subsample is
    treated as Poisson(N) when thresholds are computed.
    """
    if parts < 2:
        raise ValueError("parts must be >= 2")
    rng = np.random.default_rng(seed)
    assignment = rng.integers(0, parts, size=len(obs))
    thinned_rate = max(1.0, obs.rate_n / parts)
    out = []
    for k in range(parts):
        mask = assignment == k
        out.append(
            ObservationSet(
                n1=obs.n1,
                n2=obs.n2,
                nominal_n=obs.nominal_n,
                rows=obs.rows[mask],
                cols=obs.cols[mask],
                values=obs.values[mask],
                rate_n=thinned_rate,
            )
        )
    return out


def write_observations_csv(obs: ObservationSet, path) -> None:
    """Write observations with a dims/budget preamble and 1-based indices."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# n1={obs.n1} n2={obs.n2} N={obs.nominal_n}\n")
        fh.write("row,col,value\n")
        for r, c, v in zip(obs.rows, obs.cols, obs.values):
            fh.write(f"{r + 1},{c + 1},{v!r}\n")


def read_observations_csv(path) -> ObservationSet:
    """Read a file written by :func:`write_observations_csv`."""
    with open(path) as fh:
        preamble = fh.readline().strip()
        if not preamble.startswith("#"):
            raise ValueError(f"{path}: missing preamble line")
        try:
            fields = dict(tok.split("=") for tok in preamble[1:].split())
            n1, n2, nominal = int(fields["n1"]), int(fields["n2"]), int(fields["N"])
        except (KeyError, ValueError):
            raise ValueError(f"{path}: malformed preamble {preamble!r}") from None
        header = fh.readline().strip()
        if header != "row,col,value":
            raise ValueError(f"{path}: expected header 'row,col,value', got {header!r}")
        rows, cols, values = [], [], []
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            toks = line.split(",")
            if len(toks) != 3:
                raise ValueError(f"{path}: malformed line {lineno}")
            try:
                rows.append(int(toks[0]) - 1)
                cols.append(int(toks[1]) - 1)
                values.append(float(toks[2]))
            except ValueError:
                raise ValueError(f"{path}: cannot parse line {lineno}") from None
    return ObservationSet(
        n1=n1,
        n2=n2,
        nominal_n=nominal,
        rows=np.asarray(rows, dtype=np.int64),
        cols=np.asarray(cols, dtype=np.int64),
        values=np.asarray(values, dtype=float),
    )
