"""Structured-signal recovery via the proximal-gradient homotopy method.

Solvers for sparse, group-sparse and low-rank linear inverse problems whose
continuation weight follows a geometric error envelope, together with the
restricted-singular-value and Gaussian-complexity estimators that drive the
schedules, sklearn-style estimator wrappers, and a reproduction harness for
the time-data tradeoff experiments.
"""

from .calibration import (
    CalibrationError,
    CalibrationRecord,
    CalibrationScenario,
    calibrate_constants,
    calibrated_config,
    load_calibration,
    oracle_group_config,
    oracle_lowrank_config,
    oracle_sparse_config,
    save_calibration,
)
from .estimators import (
    GroupHomotopyRegressor,
    L1ProjectionRegressor,
    LowRankHomotopyRegressor,
    SparseHomotopyRegressor,
)
from .homotopy import (
    DivergenceError,
    GroupStructure,
    HomotopyConfig,
    IterateRecord,
    LowRankStructure,
    RecoveryResult,
    SparseStructure,
    delta_update,
    lambda_schedule_lowrank,
    lambda_schedule_sparse,
    run_group_homotopy,
    run_lowrank_homotopy,
    run_pgd,
    run_sparse_homotopy,
)
from .prox import (
    group_soft_threshold,
    project_l1_ball,
    singular_value_threshold,
    soft_threshold,
)
from .sensing import (
    Observation,
    SensingOperator,
    SubGaussianSpec,
    generate_sensing,
    matrix_sensing,
    observe,
)
from .signals import (
    GroupPartition,
    StructuredSignal,
    generate_group_sparse,
    generate_low_rank,
    generate_sparse,
    group_leakage,
    numerical_rank,
    support_leakage,
)
from .theory import (
    ConeSpec,
    RsvEstimate,
    gaussian_complexity,
    group_cone,
    lowrank_cone,
    rho_exact,
    rho_monte_carlo,
    sparse_cone,
    theoretical_rho_xi,
    verify_deviation_bound,
    xi_exact,
)

__version__ = "0.1.0"
