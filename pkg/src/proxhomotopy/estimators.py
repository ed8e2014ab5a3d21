"""Scikit-learn style estimator wrappers around the homotopy solvers.

These classes follow the sklearn parameter protocol (``get_params`` /
``set_params`` discovered from the constructor signature), so they clone and
compose with that ecosystem without importing it.  ``fit`` treats the design
matrix as the measurement operator and recovers the coefficient vector (or
matrix) from the targets; contraction constants not supplied up front are
estimated from the data by Monte-Carlo power iterations over the matching
structured cones.
"""

import inspect
import math
import warnings

import numpy as np

from . import homotopy, theory
from .sensing import Observation, SensingOperator
from .signals import GroupPartition
from .validation import as_float_matrix, as_float_vector


class RecoveryEstimator:
    """Base class implementing the sklearn parameter protocol."""

    @classmethod
    def _get_param_names(cls):
        sig = inspect.signature(cls.__init__)
        return sorted(p for p in sig.parameters if p != "self")

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._get_param_names()}

    def set_params(self, **params):
        valid = set(self._get_param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for {type(self).__name__}"
                )
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in sorted(self.get_params().items()))
        return f"{type(self).__name__}({args})"

    def score(self, X, y):
        """Coefficient of determination of the measurement fit."""
        y = as_float_vector(y, "y")
        pred = self.predict(X)
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - np.mean(y)) ** 2))
        return 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0

    def _validate_Xy(self, X, y):
        X = as_float_matrix(X, "X")
        y = as_float_vector(y, "y")
        if X.shape[0] != y.size:
            raise ValueError(
                f"X has {X.shape[0]} rows but y has {y.size} entries"
            )
        return X, y

    def _observation(self, y):
        return Observation(
            y=y, noise=np.zeros(y.size), delta=float(self.noise_level)
        )


def _capped(rho):
    if rho >= 1.0:
        warnings.warn(
            f"estimated contraction {rho:.3f} >= 1: the measurement count is "
            "below the guaranteed regime; capping the envelope rate at 0.95",
            stacklevel=3,
        )
        return 0.95
    return rho


class SparseHomotopyRegressor(RecoveryEstimator):
    """Sparse recovery by homotopy continuation of the l1 penalty.

    Parameters
    ----------
    s : int
        Sparsity budget of the coefficient vector.
    rho, rho_restricted, xi, xi_restricted : float or None
        Schedule constants; the ones left as None are estimated from the
        design matrix by projected power iterations.
    noise_level : float
        Hard l2 bound on the measurement noise (0 for exact data).
    """

    def __init__(
        self,
        s=1,
        rho=None,
        rho_restricted=None,
        xi=0.0,
        xi_restricted=0.0,
        noise_level=0.0,
        delta0=None,
        t_max=200,
        stop_tol=1e-12,
        mc_trials=24,
        random_state=0,
    ):
        self.s = s
        self.rho = rho
        self.rho_restricted = rho_restricted
        self.xi = xi
        self.xi_restricted = xi_restricted
        self.noise_level = noise_level
        self.delta0 = delta0
        self.t_max = t_max
        self.stop_tol = stop_tol
        self.mc_trials = mc_trials
        self.random_state = random_state

    def _structure(self, n):
        return homotopy.SparseStructure(self.s)

    def _cones(self, n):
        return theory.sparse_cone(n, self.s), theory.sparse_cone(n, min(2 * self.s, n))

    def _runner(self):
        return homotopy.run_sparse_homotopy

    def fit(self, X, y):
        X, y = self._validate_Xy(X, y)
        n = X.shape[1]
        op = SensingOperator(entries=X)
        obs = self._observation(y)
        cone, cone_dbl = self._cones(n)
        mu = 1.0 / op.m
        rho_restricted = self.rho_restricted
        if rho_restricted is None:
            rho_restricted = theory.rho_monte_carlo(
                op, mu, cone, cone_dbl, trials=self.mc_trials, seed=self.random_state
            ).value
        rho = self.rho
        if rho is None:
            rho_dbl = theory.rho_monte_carlo(
                op, mu, cone_dbl, cone_dbl, trials=self.mc_trials,
                seed=self.random_state + 1,
            ).value
            rho = _capped(rho_restricted + rho_dbl)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            config = homotopy.HomotopyConfig(
                structure=self._structure(n),
                rho=rho,
                rho_restricted=rho_restricted,
                xi=self.xi,
                xi_restricted=self.xi_restricted,
                delta=self.noise_level,
                delta0=self.delta0,
                t_max=self.t_max,
                stop_tol=self.stop_tol,
            )
        result = self._runner()(op, obs, config)
        self._store(result, n)
        return self

    def _store(self, result, n):
        self.coef_ = result.estimate
        self.result_ = result
        self.trace_ = result.trace
        self.n_iter_ = result.trace[-1].t
        self.converged_ = result.converged

    def predict(self, X):
        X = as_float_matrix(X, "X")
        return X @ self.coef_


class GroupHomotopyRegressor(SparseHomotopyRegressor):
    """Group-sparse recovery: block shrinkage over a contiguous partition.

    ``groups`` is either the number of equal groups or an explicit sequence
    of (start, end) index ranges tiling the feature axis.
    """

    def __init__(
        self,
        groups=1,
        s=1,
        rho=None,
        rho_restricted=None,
        xi=0.0,
        xi_restricted=0.0,
        noise_level=0.0,
        delta0=None,
        t_max=200,
        stop_tol=1e-12,
        mc_trials=24,
        random_state=0,
    ):
        super().__init__(
            s=s, rho=rho, rho_restricted=rho_restricted, xi=xi,
            xi_restricted=xi_restricted, noise_level=noise_level, delta0=delta0,
            t_max=t_max, stop_tol=stop_tol, mc_trials=mc_trials,
            random_state=random_state,
        )
        self.groups = groups

    def _partition(self, n):
        if isinstance(self.groups, int):
            return GroupPartition.uniform(n, self.groups)
        return GroupPartition(tuple(self.groups))

    def _structure(self, n):
        return homotopy.GroupStructure(self._partition(n), self.s)

    def _cones(self, n):
        partition = self._partition(n)
        return (
            theory.group_cone(partition, self.s),
            theory.group_cone(partition, min(2 * self.s, partition.n_groups)),
        )

    def _runner(self):
        return homotopy.run_group_homotopy


class LowRankHomotopyRegressor(SparseHomotopyRegressor):
    """Low-rank matrix recovery; features are vectorized d x d matrices.

    The side length is inferred from the feature count when ``d`` is None.
    ``coef_`` holds the vectorized estimate (column stacking) so ``predict``
    is a plain matrix product; ``matrix_`` holds the d x d solution.
    """

    def __init__(
        self,
        r=1,
        d=None,
        rho=None,
        rho_restricted=None,
        xi=0.0,
        xi_restricted=0.0,
        noise_level=0.0,
        delta0=None,
        t_max=200,
        stop_tol=1e-12,
        mc_trials=24,
        random_state=0,
    ):
        super().__init__(
            s=1, rho=rho, rho_restricted=rho_restricted, xi=xi,
            xi_restricted=xi_restricted, noise_level=noise_level, delta0=delta0,
            t_max=t_max, stop_tol=stop_tol, mc_trials=mc_trials,
            random_state=random_state,
        )
        self.r = r
        self.d = d

    def _side(self, n):
        if self.d is not None:
            return self.d
        side = math.isqrt(n)
        if side * side != n:
            raise ValueError(
                f"feature count {n} is not a perfect square; pass d explicitly"
            )
        return side

    def fit(self, X, y):
        X, y = self._validate_Xy(X, y)
        n = X.shape[1]
        side = self._side(n)
        op = SensingOperator(entries=X, d=side)
        obs = self._observation(y)
        cone = theory.lowrank_cone(side, self.r)
        cone_dbl = theory.lowrank_cone(side, min(3 * self.r, side))
        mu = 1.0 / op.m
        rho_restricted = self.rho_restricted
        if rho_restricted is None:
            rho_restricted = theory.rho_monte_carlo(
                op, mu, cone, cone_dbl, trials=self.mc_trials, seed=self.random_state
            ).value
        rho = self.rho
        if rho is None:
            rho_dbl = theory.rho_monte_carlo(
                op, mu, cone_dbl, cone_dbl, trials=self.mc_trials,
                seed=self.random_state + 1,
            ).value
            rho = _capped(rho_restricted + rho_dbl)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            config = homotopy.HomotopyConfig(
                structure=homotopy.LowRankStructure(self.r),
                rho=rho,
                rho_restricted=rho_restricted,
                xi=self.xi,
                xi_restricted=self.xi_restricted,
                delta=self.noise_level,
                delta0=self.delta0,
                t_max=self.t_max,
                stop_tol=self.stop_tol,
            )
        result = homotopy.run_lowrank_homotopy(op, obs, config)
        self.matrix_ = result.estimate
        self.coef_ = result.estimate.ravel(order="F")
        self.result_ = result
        self.trace_ = result.trace
        self.n_iter_ = result.trace[-1].t
        self.converged_ = result.converged
        return self


class L1ProjectionRegressor(RecoveryEstimator):
    """Projected-gradient baseline onto a known l1 ball radius."""

    def __init__(self, radius=1.0, step_mu=None, t_max=200, stop_tol=1e-12):
        self.radius = radius
        self.step_mu = step_mu
        self.t_max = t_max
        self.stop_tol = stop_tol

    def fit(self, X, y):
        X, y = self._validate_Xy(X, y)
        op = SensingOperator(entries=X)
        obs = Observation(y=y, noise=np.zeros(y.size), delta=0.0)
        result = homotopy.run_pgd(
            op, obs, self.radius, step_mu=self.step_mu, t_max=self.t_max,
            stop_tol=self.stop_tol,
        )
        self.coef_ = result.estimate
        self.result_ = result
        self.trace_ = result.trace
        self.n_iter_ = result.trace[-1].t
        self.converged_ = result.converged
        return self

    def predict(self, X):
        X = as_float_matrix(X, "X")
        return X @ self.coef_

    @property
    def noise_level(self):
        return 0.0
