"""Isotonic regression and least-squares projection onto the monotone matrix class.

The bivariate projection runs Dykstra's alternating projections over three
convex sets: the row-nondecreasing cone, the column-nondecreasing cone, and
the [0, 1] box.  Plain alternating projections would converge to a feasible
point but not to the projection; Dykstra's correction increments fix that.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .core import apply_permutations, as_matrix, invert_permutation

__all__ = [
    "ProjectionConfig",
    "ProjectionResult",
    "pava",
    "project_biso",
    "project_biso_full",
    "project_biso_permuted",
]

# Sweeps stop once the per-sweep change falls this far below tol, so the
# returned point is accurate to well within tol (re-projection then moves by
# less than tol, not merely by less than the convergence tail).
_STOP_SAFETY = 1.0 / 16.0


@dataclass(frozen=True)
class ProjectionConfig:
    """Dykstra stopping rule.

    Sweeps stop when the max-abs change of the iterate over a full sweep
    drops below ``tol`` (with a built-in safety factor), or after
    ``max_iters`` sweeps.
    """

    tol: float = 1e-8
    max_iters: int = 2000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


class ProjectionResult(NamedTuple):
    matrix: np.ndarray
    converged: bool
    sweeps: int
    last_change: float


@njit(cache=True, nogil=True)
def _pava_buffer(buf, out, means, counts, n):
    """Pool-adjacent-violators on ``buf[:n]`` into ``out[:n]``."""
    nb = 0
    for j in range(n):
        val = buf[j]
        cnt = 1
        while nb > 0 and means[nb - 1] > val:
            val = (means[nb - 1] * counts[nb - 1] + val * cnt) / (counts[nb - 1] + cnt)
            cnt += counts[nb - 1]
            nb -= 1
        means[nb] = val
        counts[nb] = cnt
        nb += 1
    j = 0
    for b in range(nb):
        for _ in range(counts[b]):
            out[j] = means[b]
            j += 1


@njit(cache=True, nogil=True)
def _pava_rows_inplace(m):
    """In-place pool-adjacent-violators along each row of ``m``."""
    n1, n2 = m.shape
    means = np.empty(n2)
    counts = np.empty(n2, dtype=np.int64)
    buf = np.empty(n2)
    out = np.empty(n2)
    for i in range(n1):
        for j in range(n2):
            buf[j] = m[i, j]
        _pava_buffer(buf, out, means, counts, n2)
        for j in range(n2):
            m[i, j] = out[j]


_COL_TILE = 16


@njit(cache=True, nogil=True)
def _dykstra_sweep(x, start, inc_rows, inc_cols, inc_box, means, counts, buf, out, tile_z, tile_out):
    """One Dykstra cycle over row cone, column cone, and [0,1] box, in place.

    Snapshots ``x`` into ``start`` first and returns the max-abs change of
    the sweep.  The column stage runs on tiles of columns staged into
    contiguous buffers to keep memory access cache-line friendly.
    """
    n1, n2 = x.shape
    for i in range(n1):
        for j in range(n2):
            start[i, j] = x[i, j]
            buf[j] = x[i, j] + inc_rows[i, j]
        _pava_buffer(buf, out, means, counts, n2)
        for j in range(n2):
            inc_rows[i, j] = buf[j] - out[j]
            x[i, j] = out[j]
    for j0 in range(0, n2, _COL_TILE):
        width = min(_COL_TILE, n2 - j0)
        for i in range(n1):
            for t in range(width):
                tile_z[t, i] = x[i, j0 + t] + inc_cols[i, j0 + t]
        for t in range(width):
            _pava_buffer(tile_z[t], tile_out[t], means, counts, n1)
        for i in range(n1):
            for t in range(width):
                inc_cols[i, j0 + t] = tile_z[t, i] - tile_out[t, i]
                x[i, j0 + t] = tile_out[t, i]
    max_change = 0.0
    for i in range(n1):
        for j in range(n2):
            z = x[i, j] + inc_box[i, j]
            v = z
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            inc_box[i, j] = z - v
            x[i, j] = v
            delta = v - start[i, j]
            if delta < 0.0:
                delta = -delta
            if delta > max_change:
                max_change = delta
    return max_change


def pava(v) -> np.ndarray:
    """The nondecreasing vector minimizing the squared distance to ``v``.

    Linear-time pooling of adjacent violators; pooled blocks take the mean of
    their members.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("pava requires a nonempty 1-D vector")
    if not np.isfinite(v).all():
        raise ValueError("pava requires finite entries")
    out = v.reshape(1, -1).copy()
    _pava_rows_inplace(out)
    return out[0]


def _dykstra(y: np.ndarray, cfg: ProjectionConfig) -> ProjectionResult:
    x = y.copy()
    n1, n2 = x.shape
    inc_rows = np.zeros_like(x)
    inc_cols = np.zeros_like(x)
    inc_box = np.zeros_like(x)
    size = max(n1, n2)
    start = np.empty_like(x)
    means = np.empty(size)
    counts = np.empty(size, dtype=np.int64)
    buf = np.empty(size)
    out = np.empty(size)
    tile_z = np.empty((_COL_TILE, n1))
    tile_out = np.empty((_COL_TILE, n1))
    stop = cfg.tol * _STOP_SAFETY
    change = np.inf
    sweeps = 0
    while sweeps < cfg.max_iters:
        sweeps += 1
        change = float(
            _dykstra_sweep(
                x, start, inc_rows, inc_cols, inc_box, means, counts, buf, out, tile_z, tile_out
            )
        )
        if change < stop:
            return ProjectionResult(x, True, sweeps, change)
    return ProjectionResult(x, change < cfg.tol, sweeps, change)


def project_biso_full(y: np.ndarray, cfg: ProjectionConfig | None = None) -> ProjectionResult:
    """Project onto the bivariate isotonic class, reporting convergence."""
    y = as_matrix(y)
    cfg = cfg or ProjectionConfig()
    return _dykstra(y, cfg)


def project_biso(y: np.ndarray, cfg: ProjectionConfig | None = None) -> np.ndarray:
    """Least-squares projection of ``y`` onto matrices in [0,1] with
    nondecreasing rows and columns.

    Warns (and still returns the last iterate) if the sweep cap is hit before
    the per-sweep change drops below ``cfg.tol``.
    """
    result = project_biso_full(y, cfg)
    if not result.converged:
        warnings.warn(
            f"Dykstra projection did not converge in {result.sweeps} sweeps "
            f"(last change {result.last_change:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return result.matrix


def project_biso_permuted(
    y: np.ndarray,
    row_perm: np.ndarray,
    col_perm: np.ndarray,
    cfg: ProjectionConfig | None = None,
) -> np.ndarray:
    """Projection onto the class of matrices isotonic along the given permutations.

    Un-permutes, projects onto the bivariate isotonic class, and re-permutes.
    """
    y = as_matrix(y)
    row_perm = np.asarray(row_perm, dtype=np.int64)
    col_perm = np.asarray(col_perm, dtype=np.int64)
    if row_perm.size != y.shape[0] or col_perm.size != y.shape[1]:
        raise ValueError("permutation lengths must match the matrix dimensions")
    unpermuted = apply_permutations(
        y, invert_permutation(row_perm), invert_permutation(col_perm)
    )
    projected = project_biso(unpermuted, cfg)
    return apply_permutations(projected, row_perm, col_perm)
