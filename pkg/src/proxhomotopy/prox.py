"""Closed-form proximal and projection operators.

All four maps are the exact minimizers of their defining objectives

    prox_g(v) = argmin_x  g(x) + (1/2) ||x - v||^2

for g equal to a nonnegative multiple of the l1 norm, the group l2,1 norm and
the nuclear norm, plus the Euclidean projection onto an l1 ball.  Thresholds
are taken pre-multiplied (the product of regularization weight and step size),
matching how the homotopy updates consume them.
"""

import numpy as np

from .validation import as_float_matrix, as_float_vector, check_finite, check_nonnegative


def soft_threshold(v, tau):
    """Entrywise shrinkage ``sign(v) * max(|v| - tau, 0)``.

    Parameters
    ----------
    v : array_like, 1-D
        Input vector.
    tau : float
        Nonnegative threshold; ``tau = 0`` is the identity map.

    Returns
    -------
    ndarray
        The exact minimizer of ``tau * ||x||_1 + 0.5 * ||x - v||^2``.
    """
    v = as_float_vector(v, "v")
    tau = check_nonnegative(tau, "tau")
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def group_soft_threshold(v, tau, partition):
    """Blockwise shrinkage: each group is scaled by ``max(1 - tau/||v_g||, 0)``.

    Groups whose l2 norm is zero map to zero (the formula's continuous limit).
    Minimizes ``tau * sum_g ||x_g||_2 + 0.5 * ||x - v||^2`` exactly.
    """
    v = as_float_vector(v, "v")
    tau = check_nonnegative(tau, "tau")
    if partition.n != v.size:
        raise ValueError(f"partition covers {partition.n} entries, vector has {v.size}")
    out = np.empty_like(v)
    for sl in partition.slices():
        block = v[sl]
        norm = np.linalg.norm(block)
        if norm <= tau or norm == 0.0:
            out[sl] = 0.0
        else:
            out[sl] = block * (1.0 - tau / norm)
    return out


def singular_value_threshold(M, tau):
    """Shrink each singular value of a square matrix by ``tau`` and clamp at zero.

    Parameters
    ----------
    M : array_like, d x d
        Input matrix; must be square with finite entries.
    tau : float
        Nonnegative threshold.

    Returns
    -------
    ndarray
        ``U diag(max(sigma - tau, 0)) V^T`` built from a singular value
        decomposition with descending, nonnegative singular values; this is
        the exact minimizer of ``tau * ||X||_* + 0.5 * ||X - M||_F^2``.
    """
    M = check_finite(as_float_matrix(M, "M", square=True), "M")
    tau = check_nonnegative(tau, "tau")
    left, sv, right_t = np.linalg.svd(M, full_matrices=False)
    shrunk = np.maximum(sv - tau, 0.0)
    return (left * shrunk) @ right_t


def project_l1_ball(v, radius):
    """Euclidean projection onto ``{x : ||x||_1 <= radius}``.

    Uses the sort-and-shift construction: the projection equals soft
    thresholding at the unique level that makes the l1 norm hit the radius,
    and that level is found from the sorted magnitudes in O(n log n).
    Vectors already inside the ball are returned unchanged.
    """
    v = check_finite(as_float_vector(v, "v"), "v")
    radius = check_nonnegative(radius, "radius")
    if radius == 0.0:
        return np.zeros_like(v)
    mags = np.abs(v)
    if mags.sum() <= radius:
        return v.copy()
    drop = np.sort(mags)[::-1]
    cumulative = np.cumsum(drop)
    counts = np.arange(1, v.size + 1)
    shifted = (cumulative - radius) / counts
    k = int(np.nonzero(drop > shifted)[0][-1])
    level = shifted[k]
    return np.sign(v) * np.maximum(mags - level, 0.0)
