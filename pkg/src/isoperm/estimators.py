"""Permutation estimation by two-dimensional sorting, baselines, and pipelines.

The two-dimensional sorting estimator blocks columns by similar column sums,
compares rows through full and per-block partial row sums against
concentration thresholds, topologically sorts the resulting comparison
graph, and projects an independent subsample onto the matrix class that is
isotonic along the estimated permutations.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .core import identity_permutation, invert_permutation, as_matrix
from .isotonic import ProjectionConfig, pava, project_biso_permuted
from .sampling import ObservationSet, aggregate_y, split_observations

__all__ = [
    "DEFAULT_ZETA",
    "DEFAULT_THRESHOLD_SCALE",
    "PAPER_THRESHOLD_CONSTANT",
    "ThresholdParams",
    "Blocking",
    "ComparisonGraph",
    "EstimatorConfig",
    "column_presort",
    "block_columns",
    "build_row_graph",
    "topological_sort",
    "tds_permutations",
    "estimate_tds",
    "estimate_borda",
    "estimate_oracle",
    "estimate_exact_n",
]

DEFAULT_ZETA = 0.5

# Multiplier on the sqrt/log concentration terms in the published analysis.
PAPER_THRESHOLD_CONSTANT = 16.0

# The analysis constant is a worst-case device: at bench scales (n <= 512,
# N = n^2) it pushes every threshold above the largest row-sum gap a [0,1]
# matrix can have, leaving the comparison graph empty.  The default scale
# calibrates the constant for working sizes; pass scale=1.0 to recover the
# published thresholds.
DEFAULT_THRESHOLD_SCALE = 1.0 / 16.0


@dataclass(frozen=True)
class ThresholdParams:
    """Noise scale and problem sizes with the derived sorting thresholds.

    ``tau`` bins column sums, ``beta`` is the minimum large-block size,
    ``eta`` thresholds full row-sum gaps and ``eta_block(s)`` thresholds
    partial row-sum gaps over a block of ``s`` columns.
    """

    zeta: float
    n1: int
    n2: int
    num_obs: float
    scale: float = DEFAULT_THRESHOLD_SCALE

    def __post_init__(self):
        if self.zeta < 0:
            raise ValueError("zeta must be nonnegative")
        if self.n1 < 1 or self.n2 < 1 or self.num_obs < 1:
            raise ValueError("dimensions and budget must be >= 1")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def log_term(self) -> float:
        return math.log(self.n1 * self.n2)

    def _gap_threshold(self, variance_factor: float) -> float:
        lead = self.scale * PAPER_THRESHOLD_CONSTANT * (self.zeta + 1.0)
        ratio = self.n1 * self.n2 / self.num_obs
        return lead * (
            math.sqrt(variance_factor / self.num_obs * self.log_term)
            + ratio * self.log_term
        )

    @property
    def tau(self) -> float:
        """Column-sum binning threshold."""
        return self._gap_threshold(self.n1 * self.n1 * self.n2)

    @property
    def beta(self) -> float:
        """Minimum size of a block exempt from aggregation."""
        return self.n2 * math.sqrt(self.n1 / self.num_obs * self.log_term)

    @property
    def eta(self) -> float:
        """Full row-sum comparison threshold."""
        return self._gap_threshold(self.n1 * self.n2 * self.n2)

    def eta_block(self, size: int) -> float:
        """Partial row-sum comparison threshold for a block of ``size`` columns."""
        return self._gap_threshold(self.n1 * self.n2 * size)

    def transposed(self) -> "ThresholdParams":
        return ThresholdParams(
            zeta=self.zeta, n1=self.n2, n2=self.n1, num_obs=self.num_obs, scale=self.scale
        )


@dataclass(frozen=True)
class Blocking:
    """Ordered partition of column indices with its pre-sort permutation.

    ``blocks[k]`` holds original column indices ordered by the pre-sort;
    ``aggregated[k]`` marks blocks formed by the small-block union step.
    """

    presort: np.ndarray
    blocks: tuple
    aggregated: tuple

    def __post_init__(self):
        n2 = self.presort.size
        seen = np.concatenate([np.asarray(b) for b in self.blocks]) if self.blocks else np.array([])
        if len(self.blocks) != len(self.aggregated):
            raise ValueError("one aggregation flag per block required")
        if sorted(seen.tolist()) != list(range(n2)):
            raise ValueError("blocks must partition the column index set")

    def __len__(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class ComparisonGraph:
    """Directed graph over row indices stored as a boolean adjacency matrix."""

    adj: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if adj.trace() > 0:
            raise ValueError("self-edges are not allowed")
        object.__setattr__(self, "adj", adj)

    @property
    def num_vertices(self) -> int:
        return self.adj.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        us, vs = np.nonzero(self.adj)
        return list(zip(us.tolist(), vs.tolist()))


def column_presort(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column sums and the stable permutation ordering them nondecreasing.

    Position j of the returned permutation holds the column whose sum ranks
    j-th smallest; ties keep the smaller original index first.
    """
    y = as_matrix(y)
    sums = y.sum(axis=0)
    presort = np.argsort(sums, kind="stable").astype(np.int64)
    return sums, presort


def block_columns(y: np.ndarray, params: ThresholdParams) -> Blocking:
    """Partition columns into sum-level bins, then aggregate undersized bins.

    Bins have width ``tau`` in column-sum value (first and last bins open).
    Bins of size below ``beta`` are merged left-to-right along the pre-sort
    order, skipping intervening large bins, closing each union once it
    reaches ``beta/2``; a trailing union below ``beta/2`` joins the
    previously closed one, and if all small bins together fall below
    ``beta/2`` they form a single block.
    """
    y = as_matrix(y)
    n2 = y.shape[1]
    sums, presort = column_presort(y)
    tau = params.tau
    beta = params.beta

    if tau > 0:
        num_bins = max(1, math.ceil(n2 / tau))
        bin_of = np.clip(np.floor(sums / tau).astype(np.int64), 0, num_bins - 1)
    else:
        bin_of = np.zeros(n2, dtype=np.int64)

    # Nonempty bins in ascending sum order; columns within a bin follow presort.
    bins: list[np.ndarray] = []
    ordered_bins = bin_of[presort]
    for b in np.unique(ordered_bins):
        bins.append(presort[ordered_bins == b])

    final: list[tuple[np.ndarray, bool]] = []
    pending: list[np.ndarray] = []
    pending_size = 0
    last_union_index: int | None = None
    for cols in bins:
        if cols.size >= beta:
            final.append((cols, False))
            continue
        pending.append(cols)
        pending_size += cols.size
        if pending_size >= beta / 2:
            final.append((np.concatenate(pending), True))
            last_union_index = len(final) - 1
            pending = []
            pending_size = 0
    if pending:
        trailing = np.concatenate(pending)
        if last_union_index is not None:
            merged = np.concatenate([final[last_union_index][0], trailing])
            final[last_union_index] = (merged, True)
        else:
            final.append((trailing, True))

    pos = invert_permutation(presort)
    final.sort(key=lambda item: pos[item[0]].min())
    return Blocking(
        presort=presort,
        blocks=tuple(cols for cols, _ in final),
        aggregated=tuple(flag for _, flag in final),
    )


def build_row_graph(
    y2: np.ndarray, blocking: Blocking, params: ThresholdParams
) -> ComparisonGraph:
    """Comparison graph with an edge u -> v when v's sums exceed u's by a threshold.

    An edge is placed when the full row-sum gap strictly exceeds ``eta`` or
    the partial row-sum gap over some block strictly exceeds the block's
    threshold.
    """
    y2 = as_matrix(y2)
    covered = np.sort(np.concatenate([np.asarray(b) for b in blocking.blocks]))
    if not np.array_equal(covered, np.arange(y2.shape[1])):
        raise ValueError("blocking does not cover the matrix columns")

    full = y2.sum(axis=1)
    adj = (full[None, :] - full[:, None]) > params.eta
    for cols in blocking.blocks:
        part = y2[:, cols].sum(axis=1)
        adj |= (part[None, :] - part[:, None]) > params.eta_block(cols.size)
    np.fill_diagonal(adj, False)
    return ComparisonGraph(adj=adj)


def topological_sort(graph: ComparisonGraph, priority=None) -> np.ndarray:
    """Rank vertices so every edge points from a lower to a higher rank.

    Kahn's algorithm popping the smallest available vertex; returns the
    identity permutation when the graph has a cycle.  ``priority`` reorders
    the tie-breaking: among available vertices the one with the smallest
    (priority, index) pair is popped first.  The default ranks purely by
    index.
    """
    n = graph.num_vertices
    if priority is None:
        priority = np.zeros(n)
    else:
        priority = np.asarray(priority, dtype=float)
        if priority.shape != (n,):
            raise ValueError("priority must assign one value per vertex")
    indeg = graph.adj.sum(axis=0).astype(np.int64)
    heap = [(priority[v], int(v)) for v in np.nonzero(indeg == 0)[0]]
    heapq.heapify(heap)
    order = np.empty(n, dtype=np.int64)
    filled = 0
    while heap:
        _, u = heapq.heappop(heap)
        order[filled] = u
        filled += 1
        for v in np.nonzero(graph.adj[u])[0]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, (priority[v], int(v)))
    if filled < n:
        return identity_permutation(n)
    return invert_permutation(order)


def tds_permutations(
    obs_block: ObservationSet, obs_sum: ObservationSet, params: ThresholdParams
) -> tuple[np.ndarray, np.ndarray]:
    """Row and column permutation estimates from two independent subsamples.

    The first subsample drives the column blocking, the second the row-sum
    comparison graph; the column estimate repeats the procedure on the
    transposed matrices with the dimension roles switched.  Among the
    topological sorts consistent with the graph, ties are broken toward
    nondecreasing mean observed row level pooled over both subsamples
    (a lower-variance ranking statistic than the rescaled sums, since it
    carries no missingness-indicator noise), so pairs the thresholds leave
    unconstrained still follow the best available full-sum ordering.
    """
    y1 = aggregate_y(obs_block)
    y2 = aggregate_y(obs_sum)

    blocking = block_columns(y1, params)
    graph = build_row_graph(y2, blocking, params)
    row_rank = topological_sort(
        graph, priority=_profile_rank_score(obs_block, obs_sum, axis=0)
    )

    params_t = params.transposed()
    blocking_t = block_columns(y1.T, params_t)
    graph_t = build_row_graph(y2.T, blocking_t, params_t)
    col_rank = topological_sort(
        graph_t, priority=_profile_rank_score(obs_block, obs_sum, axis=1)
    )
    return row_rank, col_rank


def _profile_rank_score(first: ObservationSet, second: ObservationSet, axis: int) -> np.ndarray:
    """Ranking score per row (axis 0) or column (axis 1) from two subsamples.

    Each line's observations are isotonic-smoothed along the crossed
    dimension ordered by observed mean level, and the smoothed values are
    averaged after mapping through the empirical distribution of the crossed
    levels.  Monotone matrices keep the population score nondecreasing in a
    line's true rank (the map is monotone, so entrywise dominance is
    preserved), while the smoothing localizes level crossings, which makes
    the score far less noisy than a rescaled sum when adjacent lines differ
    in only a few entries.
    """
    rows = np.concatenate([first.rows, second.rows])
    cols = np.concatenate([first.cols, second.cols])
    values = np.concatenate([first.values, second.values])
    if axis == 1:
        rows, cols = cols, rows
        num_lines, num_cross = first.n2, first.n1
    else:
        num_lines, num_cross = first.n1, first.n2
    scores = np.zeros(num_lines)
    if rows.size == 0:
        return scores

    cross_counts = np.bincount(cols, minlength=num_cross)
    cross_sums = np.bincount(cols, weights=values, minlength=num_cross)
    profile = np.where(
        cross_counts > 0, cross_sums / np.maximum(cross_counts, 1), values.mean()
    )
    position = invert_permutation(np.argsort(profile, kind="stable"))
    profile_sorted = np.sort(profile)

    order = np.lexsort((position[cols], rows))
    row_sorted = rows[order]
    value_sorted = values[order]
    bounds = np.searchsorted(row_sorted, np.arange(num_lines + 1))
    for i in range(num_lines):
        lo, hi = bounds[i], bounds[i + 1]
        if lo == hi:
            continue
        smoothed = pava(value_sorted[lo:hi])
        ranks = np.searchsorted(profile_sorted, smoothed, side="right")
        scores[i] = ranks.mean() / num_cross
    return scores


@dataclass(frozen=True)
class EstimatorConfig:
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    threshold_scale: float = DEFAULT_THRESHOLD_SCALE


def estimate_tds(
    obs: ObservationSet,
    zeta: float = DEFAULT_ZETA,
    seed: int = 0,
    cfg: EstimatorConfig | None = None,
) -> np.ndarray:
    """Two-dimensional sorting pipeline: split, sort, project.

    Observations are thinned into three independent parts (blocking, row
    comparisons, projection); the projection part is projected onto the
    matrix class isotonic along the estimated permutations.
    """
    cfg = cfg or EstimatorConfig()
    parts = split_observations(obs, 3, seed)
    params = ThresholdParams(
        zeta=zeta, n1=obs.n1, n2=obs.n2, num_obs=obs.nominal_n, scale=cfg.threshold_scale
    )
    row_perm, col_perm = tds_permutations(parts[0], parts[1], params)
    return project_biso_permuted(aggregate_y(parts[2]), row_perm, col_perm, cfg.projection)


def _rank_by_sums(sums: np.ndarray) -> np.ndarray:
    return invert_permutation(np.argsort(sums, kind="stable").astype(np.int64))


def estimate_borda(
    obs: ObservationSet, seed: int = 0, cfg: EstimatorConfig | None = None
) -> np.ndarray:
    """Full-sum sorting baseline: rank rows and columns by the sums of one
    half-sample, project the other half along those rankings."""
    cfg = cfg or EstimatorConfig()
    first, second = split_observations(obs, 2, seed)
    y1 = aggregate_y(first)
    row_perm = _rank_by_sums(y1.sum(axis=1))
    col_perm = _rank_by_sums(y1.sum(axis=0))
    return project_biso_permuted(aggregate_y(second), row_perm, col_perm, cfg.projection)


def estimate_oracle(
    obs: ObservationSet,
    row_perm: np.ndarray,
    col_perm: np.ndarray,
    cfg: EstimatorConfig | None = None,
) -> np.ndarray:
    """Projection along the true permutations; no sample splitting needed."""
    cfg = cfg or EstimatorConfig()
    return project_biso_permuted(aggregate_y(obs), row_perm, col_perm, cfg.projection)


def estimate_exact_n(
    obs_exact: ObservationSet,
    zeta: float = DEFAULT_ZETA,
    seed: int = 0,
    cfg: EstimatorConfig | None = None,
) -> np.ndarray:
    """Exact-sample-count wrapper around the Poissonized pipeline.

    Draws a Poisson(N/2) count; when it does not exceed the N available
    samples, runs the sorting pipeline on a uniformly chosen subset of that
    size with budget N/2, otherwise returns the zero matrix.
    """
    n_exact = len(obs_exact)
    if n_exact != obs_exact.nominal_n:
        raise ValueError(
            f"expected exactly nominal_n={obs_exact.nominal_n} samples, got {n_exact}"
        )
    rng = np.random.default_rng(seed)
    target = int(rng.poisson(n_exact / 2))
    if target > n_exact:
        return np.zeros((obs_exact.n1, obs_exact.n2))
    keep = rng.choice(n_exact, size=target, replace=False)
    sub = ObservationSet(
        n1=obs_exact.n1,
        n2=obs_exact.n2,
        nominal_n=max(1, n_exact // 2),
        rows=obs_exact.rows[keep],
        cols=obs_exact.cols[keep],
        values=obs_exact.values[keep],
    )
    split_seed = int(rng.integers(0, 2**63 - 1))
    return estimate_tds(sub, zeta=zeta, seed=split_seed, cfg=cfg)
