"""Matrix and permutation primitives, ground-truth generators, metrics, CSV I/O.

Matrices are plain 2-D float64 numpy arrays in row-major order.  A
permutation on [n] is a 1-D integer array ``p`` of length n where ``p[i]``
is the (0-based) image of position ``i``; every index appears exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GroundTruth",
    "as_matrix",
    "identity_permutation",
    "random_permutation",
    "is_permutation",
    "invert_permutation",
    "compose_permutations",
    "apply_permutations",
    "is_biso",
    "gen_random_biso",
    "gen_noisy_sorting",
    "gen_sst",
    "frob_error",
    "variation",
    "read_matrix_csv",
    "write_matrix_csv",
]


def as_matrix(m) -> np.ndarray:
    """Validate and return ``m`` as a 2-D float64 array with finite entries."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    return a


def identity_permutation(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def random_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(n).astype(np.int64)


def is_permutation(p: np.ndarray) -> bool:
    """True iff ``p`` is a bijection on [len(p)]."""
    p = np.asarray(p)
    if p.ndim != 1 or p.size == 0:
        return False
    return bool(np.array_equal(np.sort(p), np.arange(p.size)))


def invert_permutation(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.size, dtype=np.int64)
    return inv


def compose_permutations(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Composition p∘q, i.e. (p∘q)(i) = p(q(i))."""
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    if p.size != q.size:
        raise ValueError("permutations must act on the same index set")
    return p[q]


def apply_permutations(m: np.ndarray, row_perm: np.ndarray, col_perm: np.ndarray) -> np.ndarray:
    """Return the matrix with entry (i, j) equal to ``m[row_perm[i], col_perm[j]]``.

    The input is unchanged; a new array is returned.
    """
    m = as_matrix(m)
    row_perm = np.asarray(row_perm, dtype=np.int64)
    col_perm = np.asarray(col_perm, dtype=np.int64)
    if row_perm.size != m.shape[0]:
        raise ValueError(
            f"row permutation has length {row_perm.size}, matrix has {m.shape[0]} rows"
        )
    if col_perm.size != m.shape[1]:
        raise ValueError(
            f"column permutation has length {col_perm.size}, matrix has {m.shape[1]} columns"
        )
    return m[np.ix_(row_perm, col_perm)]


def is_biso(m: np.ndarray, tol: float = 0.0) -> bool:
    """Check membership in the bivariate isotonic class up to ``tol``.

    True iff every entry is within [-tol, 1+tol] and every row and column is
    nondecreasing up to ``tol`` (adjacent decreases larger than ``tol`` fail).
    """
    m = as_matrix(m)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if m.min() < -tol or m.max() > 1.0 + tol:
        return False
    if m.shape[1] > 1 and (np.diff(m, axis=1) < -tol).any():
        return False
    if m.shape[0] > 1 and (np.diff(m, axis=0) < -tol).any():
        return False
    return True


@dataclass(frozen=True)
class GroundTruth:
    """A monotone base matrix together with its witness permutations.

    ``base`` has nondecreasing rows; its columns are nondecreasing unless
    ``sst`` is set, in which case they are nonincreasing and the matrix is
    skew-symmetric (base + base.T == 1 entrywise) with ``row_perm`` equal to
    ``col_perm``.  The observable matrix applies the permutations to the base.
    """

    base: np.ndarray
    row_perm: np.ndarray
    col_perm: np.ndarray
    sst: bool = field(default=False)

    def __post_init__(self):
        base = as_matrix(self.base)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "row_perm", np.asarray(self.row_perm, dtype=np.int64))
        object.__setattr__(self, "col_perm", np.asarray(self.col_perm, dtype=np.int64))
        if not is_permutation(self.row_perm) or self.row_perm.size != base.shape[0]:
            raise ValueError("row_perm is not a permutation of the row indices")
        if not is_permutation(self.col_perm) or self.col_perm.size != base.shape[1]:
            raise ValueError("col_perm is not a permutation of the column indices")

    @property
    def n1(self) -> int:
        return self.base.shape[0]

    @property
    def n2(self) -> int:
        return self.base.shape[1]

    def observable(self) -> np.ndarray:
        """The permuted matrix M* = base(row_perm, col_perm)."""
        return apply_permutations(self.base, self.row_perm, self.col_perm)


def gen_random_biso(n1: int, n2: int, seed: int) -> GroundTruth:
    """Draw a random bivariate isotonic ground truth.

    The base is a two-dimensional cumulative sum of i.i.d. uniform increments
    rescaled so its minimum is 0 and its maximum is 1, which makes rows and
    columns strictly increasing almost surely.  Row and column permutations
    are drawn uniformly from the same seeded generator.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError("dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    inc = rng.uniform(size=(n1, n2))
    base = np.cumsum(np.cumsum(inc, axis=0), axis=1)
    lo, hi = base.min(), base.max()
    if hi > lo:
        base = (base - lo) / (hi - lo)
    else:
        base = np.clip(base, 0.0, 1.0)
    return GroundTruth(
        base=base,
        row_perm=random_permutation(n1, rng),
        col_perm=random_permutation(n2, rng),
    )


def gen_noisy_sorting(n: int, lam: float, seed: int) -> GroundTruth:
    """Two-level comparison matrix oriented to have nondecreasing rows/columns.

    Entry (i, j) equals 1/2 - lam below the anti-diagonal (i + j < n + 1 in
    1-based terms), 1/2 on it, and 1/2 + lam above it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= lam <= 0.5:
        raise ValueError(f"lam must lie in [0, 1/2], got {lam}")
    idx = np.arange(1, n + 1)
    level = idx[:, None] + idx[None, :]
    base = np.full((n, n), 0.5)
    base[level < n + 1] = 0.5 - lam
    base[level > n + 1] = 0.5 + lam
    rng = np.random.default_rng(seed)
    return GroundTruth(
        base=base,
        row_perm=random_permutation(n, rng),
        col_perm=random_permutation(n, rng),
    )


def gen_sst(n: int, seed: int) -> GroundTruth:
    """Draw a strong stochastic transitivity ground truth.

    The base has nondecreasing rows, nonincreasing columns, a constant 1/2
    diagonal, and satisfies base + base.T == 1 exactly.  A single random
    permutation acts on both rows and columns.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    inc = rng.uniform(size=(n, n))
    # Nondecreasing in j, nonincreasing in i: sum increments over j' <= j, i' >= i.
    field2d = np.cumsum(np.cumsum(inc, axis=1)[::-1], axis=0)[::-1]
    lo, hi = field2d.min(), field2d.max()
    if hi > lo:
        upper = 0.5 + 0.5 * (field2d - lo) / (hi - lo)
    else:
        upper = np.full((n, n), 0.75)
    base = np.full((n, n), 0.5)
    iu = np.triu_indices(n, k=1)
    base[iu] = upper[iu]
    il = (iu[1], iu[0])
    base[il] = 1.0 - upper[iu]
    perm = random_permutation(n, rng)
    return GroundTruth(base=base, row_perm=perm, col_perm=perm, sst=True)


def frob_error(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized squared Frobenius distance, (1/(n1*n2)) * sum (a-b)^2."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


def variation(v) -> float:
    """Max minus min of a nonempty vector."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("variation requires a nonempty 1-D vector")
    return float(v.max() - v.min())


def write_matrix_csv(m: np.ndarray, path) -> None:
    """Write a matrix as comma-separated rows with exact round-trip formatting."""
    m = as_matrix(m)
    with open(path, "w", newline="\n") as fh:
        for row in m:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def read_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix_csv`.

    Raises ValueError naming the offending line on parse failures or ragged rows.
    """
    rows: list[list[float]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise ValueError(f"{path}: cannot parse line {lineno}: {exc}") from None
            if rows and len(values) != len(rows[0]):
                raise ValueError(
                    f"{path}: ragged row at line {lineno}: expected "
                    f"{len(rows[0])} columns, got {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    return np.asarray(rows, dtype=float)
