"""Independent reference solvers used to validate the estimation code.

These deliberately take different algorithmic routes from the library:
isotonic regression via exhaustive pool-partition enumeration, and the
matrix projection via projected gradient ascent on the dual of the
constrained least-squares problem.
"""

from __future__ import annotations

import itertools

import numpy as np


def pava_by_partition_enumeration(v: np.ndarray) -> np.ndarray:
    """Exact isotonic fit by brute force over contiguous pool partitions.

    The optimum is piecewise constant on contiguous blocks, with each block
    at its mean and block means nondecreasing; enumerate all 2^(n-1)
    partitions, keep feasible candidates, return the best.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    best = None
    best_obj = np.inf
    for cuts in itertools.product([False, True], repeat=n - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        means = [v[a:b].mean() for a, b in zip(bounds, bounds[1:])]
        if any(m2 < m1 for m1, m2 in zip(means, means[1:])):
            continue
        x = np.concatenate(
            [np.full(b - a, m) for (a, b), m in zip(zip(bounds, bounds[1:]), means)]
        )
        obj = float(np.sum((x - v) ** 2))
        if obj < best_obj:
            best_obj = obj
            best = x
    return best


def _monotone_box_constraints(n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows of (A, b) such that feasibility is A x <= b for vectorized X."""
    rows = []
    rhs = []
    dim = n1 * n2

    def unit(i, j):
        e = np.zeros(dim)
        e[i * n2 + j] = 1.0
        return e

    for i in range(n1):
        for j in range(n2 - 1):
            rows.append(unit(i, j) - unit(i, j + 1))
            rhs.append(0.0)
    for i in range(n1 - 1):
        for j in range(n2):
            rows.append(unit(i, j) - unit(i + 1, j))
            rhs.append(0.0)
    for i in range(n1):
        for j in range(n2):
            rows.append(unit(i, j))
            rhs.append(1.0)
            rows.append(-unit(i, j))
            rhs.append(0.0)
    return np.asarray(rows), np.asarray(rhs)


def project_biso_by_dual_ascent(y: np.ndarray, iters: int = 20000) -> np.ndarray:
    """Projection onto the monotone [0,1] matrix class via the dual QP.

    Maximizes the dual of min 0.5 ||x - y||^2 s.t. A x <= b with accelerated
    projected gradient (projection onto the nonnegative orthant is a clip).
    """
    y = np.asarray(y, dtype=float)
    n1, n2 = y.shape
    a_mat, b_vec = _monotone_box_constraints(n1, n2)
    yv = y.ravel()
    gram = a_mat @ a_mat.T
    lipschitz = float(np.linalg.eigvalsh(gram).max())
    step = 1.0 / lipschitz
    lam = np.zeros(b_vec.size)
    momentum = lam.copy()
    t_prev = 1.0
    grad_lin = a_mat @ yv - b_vec
    for _ in range(iters):
        grad = grad_lin - gram @ momentum
        lam_next = np.maximum(0.0, momentum + step * grad)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev)) / 2.0
        momentum = lam_next + ((t_prev - 1.0) / t_next) * (lam_next - lam)
        lam = lam_next
        t_prev = t_next
    x = yv - a_mat.T @ lam
    return x.reshape(n1, n2)
