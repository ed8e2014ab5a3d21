"""Proximal-gradient homotopy solvers with full per-iteration tracing.

Each solver runs the same loop: a gradient step on the least-squares fit, a
structure-matched proximal map whose threshold is the product of the step
size and a continuation weight, and a geometric update of the error envelope
that drives the weight downward.  The envelope recursion is

    Delta_{t+1} = rho * Delta_t + xi * delta / m

and the continuation weight at step t is
``(xi_restricted * delta + rho_restricted * Delta_t / mu) / sqrt(s)`` (with
``sqrt(r)`` in the matrix case).  A projected-gradient baseline onto an l1
ball is provided for comparison runs with known signal scale.

The solvers never read the ground truth: when one is supplied it only fills
the error / leakage columns of the trace.
"""

import math
import time
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import prox, signals
from .validation import check_count, check_nonnegative, check_positive

DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class SparseStructure:
    s: int

    def __post_init__(self):
        check_count(self.s, "s")


@dataclass(frozen=True)
class GroupStructure:
    partition: signals.GroupPartition
    s: int

    def __post_init__(self):
        s = check_count(self.s, "s")
        if s > self.partition.n_groups:
            raise ValueError("s exceeds the number of groups")


@dataclass(frozen=True)
class LowRankStructure:
    r: int

    def __post_init__(self):
        check_count(self.r, "r")


Structure = Union[SparseStructure, GroupStructure, LowRankStructure]


@dataclass(frozen=True)
class HomotopyConfig:
    """All solver inputs: contraction / noise constants, noise level, budget.

    ``rho`` and ``xi`` drive the envelope recursion; ``rho_restricted`` and
    ``xi_restricted`` enter the continuation weight.  ``delta`` is the hard
    noise bound, ``step_mu`` defaults to 1/m at run time, and ``delta0``
    defaults to a crude data-driven over-estimate when no value is given
    (flagged on the result).  The linear-convergence guarantee needs
    ``rho < 1`` and ``delta0 >= ||truth||``; violations warn rather than
    raise so that below-threshold instances can still be run and probed.
    """

    structure: Structure
    rho: float
    rho_restricted: float
    xi: float = 0.0
    xi_restricted: float = 0.0
    delta: float = 0.0
    delta0: Optional[float] = None
    step_mu: Optional[float] = None
    t_max: int = 200
    stop_tol: Optional[float] = 1e-12

    def __post_init__(self):
        check_nonnegative(self.rho, "rho")
        check_nonnegative(self.rho_restricted, "rho_restricted")
        check_nonnegative(self.xi, "xi")
        check_nonnegative(self.xi_restricted, "xi_restricted")
        check_nonnegative(self.delta, "delta")
        if self.delta0 is not None:
            check_positive(self.delta0, "delta0")
        if self.step_mu is not None:
            check_positive(self.step_mu, "step_mu")
        check_count(self.t_max, "t_max")
        if self.rho >= 1.0:
            warnings.warn(
                f"rho={self.rho:.3g} >= 1: the error envelope does not contract, "
                "so the linear-convergence guarantee is vacuous",
                stacklevel=2,
            )


@dataclass(frozen=True)
class IterateRecord:
    """State of one iterate: continuation weight, envelope, errors, structure.

    ``rel_error`` divides by the truth norm (absolute error if that norm is
    zero) and ``leakage`` counts off-support entries / off-support groups /
    the numerical rank; both are None when no truth was supplied.
    ``objective`` is the penalized value ``lambda_t * reg(x_t) + 0.5 *
    ||A x_t - y||^2`` at this iterate.
    """

    t: int
    lambda_t: float
    delta_t: float
    rel_error: Optional[float]
    leakage: Optional[int]
    objective: float
    wall_time_ns: int = 0


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    trace: list
    converged: bool
    reason: str
    delta0: float
    delta0_estimated: bool = False

    @property
    def final_record(self):
        return self.trace[-1]

    def rel_errors(self):
        return np.array([r.rel_error for r in self.trace], dtype=float)


class DivergenceError(RuntimeError):
    """Iterates left the stable region; carries the partial result."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


def lambda_schedule_sparse(config, delta_t, m):
    """Continuation weight for sparse (and group-sparse) runs.

    With the default step 1/m this is
    ``xi_restricted * delta / sqrt(s) + m * rho_restricted * delta_t / sqrt(s)``.
    """
    delta_t = check_nonnegative(delta_t, "delta_t")
    s = config.structure.s
    mu = config.step_mu if config.step_mu is not None else 1.0 / m
    return (config.xi_restricted * config.delta + config.rho_restricted * delta_t / mu) / math.sqrt(s)


def lambda_schedule_lowrank(config, delta_t, m):
    """Continuation weight for low-rank runs; same form with sqrt(r)."""
    delta_t = check_nonnegative(delta_t, "delta_t")
    r = config.structure.r
    mu = config.step_mu if config.step_mu is not None else 1.0 / m
    return (config.xi_restricted * config.delta + config.rho_restricted * delta_t / mu) / math.sqrt(r)


def delta_update(config, delta_t, m):
    """One step of the error-envelope recursion."""
    delta_t = check_nonnegative(delta_t, "delta_t")
    return config.rho * delta_t + config.xi * config.delta / m


def _default_delta0(op, obs):
    # Crude over-estimate when no signal-scale prior exists.
    return float(np.linalg.norm(op.apply_adjoint(obs.y)) / op.m * math.sqrt(op.n))


def _check_delta0(delta0, truth):
    if truth is not None and delta0 < truth.norm() * (1.0 - 1e-12):
        warnings.warn(
            f"delta0={delta0:.3g} is below the truth norm {truth.norm():.3g}; "
            "the envelope majorization is not guaranteed",
            stacklevel=3,
        )


def _run_homotopy(op, obs, config, truth, kind):
    if kind == LowRankStructure:
        if op.mode != "matrix":
            raise ValueError("low-rank recovery requires an operator in matrix mode")
        forward = op.apply_matrix
        adjoint = op.apply_matrix_adjoint
        x = np.zeros((op.d, op.d))
        schedule = lambda_schedule_lowrank
        reg_norm = lambda z: float(np.linalg.svd(z, compute_uv=False).sum())
        prox_step = lambda z, tau: prox.singular_value_threshold(z, tau)
        leak = (lambda z: signals.numerical_rank(z)) if truth is not None else None
    else:
        if op.mode != "vector":
            raise ValueError("vector recovery requires an operator in vector mode")
        forward = op.apply
        adjoint = op.apply_adjoint
        x = np.zeros(op.n)
        schedule = lambda_schedule_sparse
        if kind == GroupStructure:
            partition = config.structure.partition
            reg_norm = lambda z: float(
                sum(np.linalg.norm(z[sl]) for sl in partition.slices())
            )
            prox_step = lambda z, tau: prox.group_soft_threshold(z, tau, partition)
            leak = (
                (lambda z: signals.group_leakage(z, truth, partition))
                if truth is not None
                else None
            )
        else:
            reg_norm = lambda z: float(np.abs(z).sum())
            prox_step = prox.soft_threshold
            leak = (
                (lambda z: signals.support_leakage(z, truth)) if truth is not None else None
            )

    m = op.m
    mu = config.step_mu if config.step_mu is not None else 1.0 / m
    delta0_estimated = config.delta0 is None
    delta0 = config.delta0 if config.delta0 is not None else _default_delta0(op, obs)
    _check_delta0(delta0, truth)

    truth_norm = truth.norm() if truth is not None else None
    denom = truth_norm if truth_norm else 1.0
    guard = DIVERGENCE_FACTOR * delta0

    trace = []
    result = RecoveryResult(
        estimate=x,
        trace=trace,
        converged=False,
        reason="t_max",
        delta0=delta0,
        delta0_estimated=delta0_estimated,
    )

    delta_t = delta0
    lam = schedule(config, delta_t, m)
    prev_lam_mu = 0.0

    def record(t, lam, delta_t, x, elapsed_ns, residual):
        rel = None
        leakage = None
        if truth is not None:
            rel = float(np.linalg.norm(x - truth.values) / denom)
            leakage = leak(x)
        obj = lam * reg_norm(x) + 0.5 * float(residual @ residual)
        trace.append(
            IterateRecord(
                t=t,
                lambda_t=lam,
                delta_t=delta_t,
                rel_error=rel,
                leakage=leakage,
                objective=obj,
                wall_time_ns=elapsed_ns,
            )
        )

    residual = forward(x) - obs.y
    record(0, lam, delta_t, x, 0, residual)

    for t in range(config.t_max):
        tic = time.perf_counter_ns()
        grad_point = x - mu * adjoint(residual)
        if not np.all(np.isfinite(grad_point)):
            result.estimate = x
            result.reason = "divergence"
            raise DivergenceError("iterate became non-finite", result)
        x_next = prox_step(grad_point, lam * mu)
        if float(np.linalg.norm(x_next)) > guard:
            result.estimate = x_next
            result.reason = "divergence"
            raise DivergenceError(
                f"iterate norm exceeded {DIVERGENCE_FACTOR:.0e} * delta0", result
            )
        step_norm = float(np.linalg.norm(x_next - x))
        x = x_next
        delta_t = delta_update(config, delta_t, m)
        prev_lam_mu = lam * mu
        lam = schedule(config, delta_t, m)
        residual = forward(x) - obs.y
        elapsed = time.perf_counter_ns() - tic
        record(t + 1, lam, delta_t, x, elapsed, residual)
        if config.stop_tol is not None:
            scale = config.stop_tol * max(1.0, float(np.linalg.norm(x)))
            # A stalled iterate only counts as converged once the threshold
            # is stationary too; an early stall under a still-decaying (or
            # growing) weight is the schedule waiting, not convergence.
            if step_norm <= scale and abs(lam * mu - prev_lam_mu) <= scale:
                result.converged = True
                result.reason = "rel_change"
                break
        if lam * mu == 0.0 and prev_lam_mu > 0.0:
            result.converged = True
            result.reason = "lambda_underflow"
            break

    result.estimate = x
    return result


def run_sparse_homotopy(op, obs, config, truth=None):
    """Recover a sparse vector; soft-thresholding prox, sqrt(s) schedule."""
    if not isinstance(config.structure, SparseStructure):
        raise ValueError("config.structure must be SparseStructure")
    return _run_homotopy(op, obs, config, truth, SparseStructure)


def run_group_homotopy(op, obs, config, truth=None):
    """Recover a group-sparse vector; block-shrinkage prox over the partition."""
    if not isinstance(config.structure, GroupStructure):
        raise ValueError("config.structure must be GroupStructure")
    return _run_homotopy(op, obs, config, truth, GroupStructure)


def run_lowrank_homotopy(op, obs, config, truth=None):
    """Recover a low-rank matrix; singular-value-thresholding prox."""
    if not isinstance(config.structure, LowRankStructure):
        raise ValueError("config.structure must be LowRankStructure")
    return _run_homotopy(op, obs, config, truth, LowRankStructure)


def run_pgd(op, obs, radius, step_mu=None, t_max=200, truth=None, stop_tol=1e-12):
    """Projected gradient descent onto ``{||x||_1 <= radius}``.

    The known-signal-scale baseline: gradient step with the same 1/m default
    step size, then Euclidean projection onto the l1 ball.  Trace records
    carry NaN for the continuation weight and envelope, which do not exist
    here; the objective is the plain least-squares value.
    """
    radius = check_nonnegative(radius, "radius")
    if op.mode != "vector":
        raise ValueError("the projected-gradient baseline runs in vector mode")
    m = op.m
    mu = step_mu if step_mu is not None else 1.0 / m
    check_positive(mu, "step_mu")
    t_max = check_count(t_max, "t_max")

    truth_norm = truth.norm() if truth is not None else None
    denom = truth_norm if truth_norm else 1.0
    x = np.zeros(op.n)
    trace = []
    result = RecoveryResult(
        estimate=x,
        trace=trace,
        converged=False,
        reason="t_max",
        delta0=float("nan"),
    )
    guard = DIVERGENCE_FACTOR * max(radius, 1.0)

    def record(t, x, elapsed_ns, residual):
        rel = None
        leakage = None
        if truth is not None:
            rel = float(np.linalg.norm(x - truth.values) / denom)
            if truth.kind == signals.SPARSE:
                leakage = signals.support_leakage(x, truth)
        trace.append(
            IterateRecord(
                t=t,
                lambda_t=float("nan"),
                delta_t=float("nan"),
                rel_error=rel,
                leakage=leakage,
                objective=0.5 * float(residual @ residual),
                wall_time_ns=elapsed_ns,
            )
        )

    residual = op.apply(x) - obs.y
    record(0, x, 0, residual)
    for t in range(t_max):
        tic = time.perf_counter_ns()
        grad_point = x - mu * op.apply_adjoint(residual)
        if not np.all(np.isfinite(grad_point)):
            result.estimate = x
            result.reason = "divergence"
            raise DivergenceError("projected-gradient iterate diverged", result)
        x_next = prox.project_l1_ball(grad_point, radius)
        if float(np.linalg.norm(x_next)) > guard:
            result.estimate = x_next
            result.reason = "divergence"
            raise DivergenceError("projected-gradient iterate diverged", result)
        step_norm = float(np.linalg.norm(x_next - x))
        x = x_next
        residual = op.apply(x) - obs.y
        record(t + 1, x, time.perf_counter_ns() - tic, residual)
        if stop_tol is not None and step_norm <= stop_tol * max(1.0, float(np.linalg.norm(x))):
            result.converged = True
            result.reason = "rel_change"
            break
    result.estimate = x
    return result
