"""Sub-Gaussian measurement operators and noisy linear observations.

Operators are dense m x n matrices with i.i.d. unit-variance rows drawn from
one of three centered isotropic families.  In matrix mode the same operator
measures d x d matrices through column-stacking vectorization, so the adjoint
reshapes back with the same convention.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import signals
from .validation import as_float_matrix, as_float_vector, check_count, check_finite, check_nonnegative

# psi2 norms solving E exp(X^2 / t^2) = 2 for each unit-variance family.
GAUSSIAN_PSI2 = math.sqrt(8.0 / 3.0)
RADEMACHER_PSI2 = 1.0 / math.sqrt(math.log(2.0))
UNIFORM_PSI2 = 1.3383691554309112  # numeric root for U[-sqrt(3), sqrt(3)]

_PSI2 = {
    "gaussian": GAUSSIAN_PSI2,
    "rademacher": RADEMACHER_PSI2,
    "uniform": UNIFORM_PSI2,
}


@dataclass(frozen=True)
class SubGaussianSpec:
    """Row distribution of a sensing matrix: family plus unit-variance flag."""

    family: str = "gaussian"
    unit_variance: bool = True

    def __post_init__(self):
        if self.family not in _PSI2:
            raise ValueError(
                f"unknown family {self.family!r}; choose from {sorted(_PSI2)}"
            )
        if not self.unit_variance:
            raise ValueError("only unit-variance (isotropic) rows are supported")

    @property
    def psi2_bound(self):
        """Sub-Gaussian (Orlicz-psi2) norm of a single entry."""
        return _PSI2[self.family]

    def draw(self, rng, shape):
        if self.family == "gaussian":
            return rng.standard_normal(shape)
        if self.family == "rademacher":
            return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
        half_width = math.sqrt(3.0)
        return rng.uniform(-half_width, half_width, size=shape)


@dataclass(frozen=True)
class SensingOperator:
    """Dense measurement map with optional d x d matrix-mode interpretation."""

    entries: np.ndarray
    distribution: Optional[SubGaussianSpec] = None
    d: Optional[int] = None

    def __post_init__(self):
        entries = check_finite(as_float_matrix(self.entries, "entries"), "entries")
        object.__setattr__(self, "entries", entries)
        if self.d is not None:
            d = check_count(self.d, "d")
            if entries.shape[1] != d * d:
                raise ValueError(
                    f"matrix mode requires n == d*d, got n={entries.shape[1]}, d={d}"
                )
            object.__setattr__(self, "d", d)

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    @property
    def mode(self):
        return "vector" if self.d is None else "matrix"

    def apply(self, x):
        x = as_float_vector(x, "x")
        if x.size != self.n:
            raise ValueError(f"expected length {self.n}, got {x.size}")
        return self.entries @ x

    def apply_adjoint(self, v):
        v = as_float_vector(v, "v")
        if v.size != self.m:
            raise ValueError(f"expected length {self.m}, got {v.size}")
        return self.entries.T @ v

    def _require_matrix_mode(self):
        if self.d is None:
            raise ValueError("operator is in vector mode; matrix application undefined")

    def apply_matrix(self, X):
        """Measure a d x d matrix: equals apply(vec(X)) with column stacking."""
        self._require_matrix_mode()
        X = as_float_matrix(X, "X", square=True)
        if X.shape[0] != self.d:
            raise ValueError(f"expected a {self.d} x {self.d} matrix, got {X.shape}")
        return self.entries @ X.ravel(order="F")

    def apply_matrix_adjoint(self, v):
        """Adjoint of apply_matrix: reshape of the vector adjoint."""
        self._require_matrix_mode()
        return self.apply_adjoint(v).reshape((self.d, self.d), order="F")


@dataclass(frozen=True)
class Observation:
    """Measurements y = A(signal) + noise with the realized noise recorded.

    ``delta`` is a hard l2 bound on the noise: when the noise is drawn from a
    per-entry std-dev ``sigma`` it is set to the realized ``||noise||_2``
    exactly (zero in the noiseless case).
    """

    y: np.ndarray
    noise: np.ndarray
    delta: float
    sigma: float = 0.0

    def __post_init__(self):
        y = as_float_vector(self.y, "y")
        noise = as_float_vector(self.noise, "noise")
        if y.size != noise.size:
            raise ValueError("y and noise must have equal length")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "noise", noise)
        delta = check_nonnegative(self.delta, "delta")
        realized = float(np.linalg.norm(noise))
        if realized > delta * (1.0 + 1e-12) + 1e-300:
            raise ValueError("delta must upper-bound the realized noise norm")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "sigma", check_nonnegative(self.sigma, "sigma"))

    @property
    def m(self):
        return self.y.size


def generate_sensing(m, n, spec=None, seed=0, d=None):
    """Draw an m x n operator with i.i.d. rows from ``spec``; pure in the seed."""
    m = check_count(m, "m")
    n = check_count(n, "n")
    spec = spec if spec is not None else SubGaussianSpec()
    rng = np.random.default_rng(seed)
    entries = spec.draw(rng, (m, n))
    return SensingOperator(entries=entries, distribution=spec, d=d)


def matrix_sensing(m, d, spec=None, seed=0):
    """Convenience wrapper: operator measuring d x d matrices (n = d*d)."""
    d = check_count(d, "d")
    return generate_sensing(m, d * d, spec=spec, seed=seed, d=d)


def observe(op, truth, sigma=0.0, seed=0):
    """Measure a structured signal under N(0, sigma^2 I) noise.

    sigma = 0 yields exact measurements with delta = 0; otherwise delta is the
    realized noise norm so downstream schedules hold it as a hard bound.
    """
    sigma = check_nonnegative(sigma, "sigma")
    if truth.kind == signals.LOW_RANK:
        clean = op.apply_matrix(truth.values)
    else:
        clean = op.apply(truth.values)
    if sigma == 0.0:
        noise = np.zeros(op.m)
        delta = 0.0
    else:
        rng = np.random.default_rng(seed)
        noise = sigma * rng.standard_normal(op.m)
        delta = float(np.linalg.norm(noise))
    return Observation(y=clean + noise, noise=noise, delta=delta, sigma=sigma)
