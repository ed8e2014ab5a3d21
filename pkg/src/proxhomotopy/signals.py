"""Ground-truth structured signals and structural measurements.

Generators draw sparse vectors, group-sparse vectors and low-rank matrices
with standard Gaussian amplitudes; the measurement side lives in
:mod:`proxhomotopy.sensing`.  The leakage / rank functions quantify how much
structure an iterate has picked up outside the truth's support, which is the
quantity the homotopy solvers are designed to keep small.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .validation import as_float_matrix, as_float_vector, check_count

SPARSE = "sparse"
GROUP = "group"
LOW_RANK = "lowrank"


@dataclass(frozen=True)
class GroupPartition:
    """Contiguous, disjoint cover of ``range(n)`` by half-open index ranges."""

    bounds: tuple

    def __post_init__(self):
        bounds = tuple((int(a), int(b)) for a, b in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if not bounds:
            raise ValueError("partition must contain at least one group")
        cursor = 0
        for start, end in bounds:
            if start != cursor or end <= start:
                raise ValueError(
                    f"groups must tile 0..n contiguously; offending range ({start}, {end})"
                )
            cursor = end

    @classmethod
    def uniform(cls, n, n_groups):
        """Split ``range(n)`` into ``n_groups`` equal parts (n must divide evenly)."""
        n = check_count(n, "n")
        n_groups = check_count(n_groups, "n_groups")
        if n % n_groups != 0:
            raise ValueError(f"n={n} is not divisible into {n_groups} equal groups")
        size = n // n_groups
        return cls(tuple((i * size, (i + 1) * size) for i in range(n_groups)))

    @property
    def n(self):
        return self.bounds[-1][1]

    @property
    def n_groups(self):
        return len(self.bounds)

    def slices(self):
        return [slice(a, b) for a, b in self.bounds]


@dataclass(frozen=True)
class StructuredSignal:
    """A ground-truth signal together with its structural parameters.

    ``values`` is a length-n vector for the sparse / group kinds and a d x d
    matrix for the low-rank kind.  The structural budget (``s`` nonzeros,
    ``s`` active groups, or rank ``r``) is validated at construction.
    """

    kind: str
    values: np.ndarray
    s: Optional[int] = None
    r: Optional[int] = None
    partition: Optional[GroupPartition] = None

    def __post_init__(self):
        if self.kind == SPARSE:
            vals = as_float_vector(self.values, "values")
            if self.s is None or np.count_nonzero(vals) > self.s:
                raise ValueError("sparse signal exceeds its sparsity budget")
        elif self.kind == GROUP:
            vals = as_float_vector(self.values, "values")
            if self.partition is None or self.partition.n != vals.size:
                raise ValueError("group signal requires a partition covering its length")
            active = sum(
                1 for sl in self.partition.slices() if np.any(vals[sl] != 0.0)
            )
            if self.s is None or active > self.s:
                raise ValueError("group signal exceeds its active-group budget")
        elif self.kind == LOW_RANK:
            vals = as_float_matrix(self.values, "values", square=True)
            if self.r is None or np.linalg.matrix_rank(vals) > self.r:
                raise ValueError("matrix signal exceeds its rank budget")
        else:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        object.__setattr__(self, "values", vals)

    @property
    def ambient_dim(self):
        """Length of the vectorized signal (d*d in matrix form)."""
        return self.values.size

    @property
    def d(self):
        if self.kind != LOW_RANK:
            raise ValueError("d is only defined for low-rank signals")
        return self.values.shape[0]

    def norm(self):
        """l2 norm (Frobenius norm in matrix form)."""
        return float(np.linalg.norm(self.values))


def generate_sparse(n, s, seed=0):
    """Draw an s-sparse vector: uniform random support, N(0,1) amplitudes."""
    n = check_count(n, "n")
    s = check_count(s, "s")
    if s > n:
        raise ValueError(f"s={s} exceeds ambient dimension n={n}")
    rng = np.random.default_rng(seed)
    values = np.zeros(n)
    support = rng.choice(n, size=s, replace=False)
    values[support] = rng.standard_normal(s)
    return StructuredSignal(kind=SPARSE, values=values, s=s)


def generate_group_sparse(n, partition, s, seed=0):
    """Draw a group-sparse vector with exactly ``s`` dense active groups."""
    n = check_count(n, "n")
    if isinstance(partition, int):
        partition = GroupPartition.uniform(n, partition)
    if partition.n != n:
        raise ValueError("partition does not cover 0..n")
    s = check_count(s, "s")
    if s > partition.n_groups:
        raise ValueError(f"s={s} exceeds the number of groups {partition.n_groups}")
    rng = np.random.default_rng(seed)
    values = np.zeros(n)
    active = rng.choice(partition.n_groups, size=s, replace=False)
    for g in active:
        sl = partition.slices()[g]
        values[sl] = rng.standard_normal(sl.stop - sl.start)
    return StructuredSignal(kind=GROUP, values=values, s=s, partition=partition)


def generate_low_rank(d, r, seed=0):
    """Draw a d x d rank-r matrix as a product of two Gaussian factors."""
    d = check_count(d, "d")
    r = check_count(r, "r")
    if r > d:
        raise ValueError(f"r={r} exceeds side length d={d}")
    rng = np.random.default_rng(seed)
    left = rng.standard_normal((d, r))
    right = rng.standard_normal((d, r))
    return StructuredSignal(kind=LOW_RANK, values=left @ right.T, r=r)


def default_zero_tol(x):
    """Numerical threshold below which an entry counts as zero."""
    x = np.asarray(x)
    scale = np.max(np.abs(x)) if x.size else 0.0
    return 1e-9 * max(1.0, float(scale))


def support_leakage(x, truth, zero_tol=None):
    """Number of numerically nonzero entries of ``x`` outside the true support."""
    if truth.kind != SPARSE:
        raise ValueError("support_leakage requires a sparse ground truth")
    x = as_float_vector(x, "x")
    if x.size != truth.values.size:
        raise ValueError("length mismatch between iterate and truth")
    if zero_tol is None:
        zero_tol = default_zero_tol(x)
    return int(np.count_nonzero((np.abs(x) > zero_tol) & (truth.values == 0.0)))


def group_leakage(x, truth, partition=None, zero_tol=None):
    """Number of numerically active groups of ``x`` outside the truth's active groups."""
    if truth.kind != GROUP:
        raise ValueError("group_leakage requires a group-sparse ground truth")
    partition = partition if partition is not None else truth.partition
    x = as_float_vector(x, "x")
    if x.size != partition.n:
        raise ValueError("length mismatch between iterate and partition")
    if zero_tol is None:
        zero_tol = default_zero_tol(x)
    count = 0
    for sl in partition.slices():
        if np.any(np.abs(x[sl]) > zero_tol) and not np.any(truth.values[sl] != 0.0):
            count += 1
    return count


def numerical_rank(X, rel_tol=1e-8):
    """Count singular values above ``rel_tol`` times the largest one."""
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    X = as_float_matrix(X, "X")
    if not np.any(X):
        return 0
    sv = np.linalg.svd(X, compute_uv=False)
    return int(np.count_nonzero(sv > rel_tol * sv[0]))
