"""Small argument-checking helpers shared across the package."""

import numpy as np


def as_float_vector(x, name="x"):
    """Coerce to a 1-D float64 array, rejecting anything else."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def as_float_matrix(x, name="X", square=False):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_nonnegative(value, name):
    value = float(value)
    if not value >= 0.0:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return value


def check_positive(value, name):
    value = float(value)
    if not value > 0.0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_count(value, name, minimum=1):
    if int(value) != value or int(value) < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)
