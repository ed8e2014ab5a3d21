"""Structured-cone complexity and restricted singular value estimation.

The solvers' schedules are driven by two quantities defined over a structured
set P (sparse, group-sparse or low-rank unit-norm elements):

* the contraction value ``sup_{v in P, u in Q} <v, (I - mu A^T A) u>``, and
* the noise correlation ``sup_{v in P} <v, A^T w>`` for a unit noise
  direction ``w``.

Both admit exact evaluation on small instances (support enumeration, or a
closed form for the noise correlation) and Monte-Carlo lower bounds at scale
(projected power iterations).  The Gaussian complexity of a cone is estimated
by Monte Carlo through per-draw closed forms.  ``theoretical_rho_xi`` turns a
complexity estimate plus calibrated constants into schedule parameters.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .signals import GROUP, LOW_RANK, SPARSE, GroupPartition
from .validation import check_count, check_nonnegative, check_positive

DEFAULT_ENUMERATION_BUDGET = 10**6


class EnumerationBudgetError(ValueError):
    """Raised when exact enumeration would exceed its pair budget.

    Callers hitting this should fall back to :func:`rho_monte_carlo`.
    """


@dataclass(frozen=True)
class ConeSpec:
    """A structured set intersected with the unit sphere.

    ``kind`` selects sparse vectors (at most ``s`` nonzeros in dimension
    ``n``), group-sparse vectors (at most ``s`` active groups of
    ``partition``) or square matrices of rank at most ``r`` and side ``d``.
    """

    kind: str
    n: Optional[int] = None
    s: Optional[int] = None
    d: Optional[int] = None
    r: Optional[int] = None
    partition: Optional[GroupPartition] = None

    def __post_init__(self):
        if self.kind == SPARSE:
            n = check_count(self.n, "n")
            s = check_count(self.s, "s")
            if s > n:
                raise ValueError(f"s={s} exceeds n={n}")
        elif self.kind == GROUP:
            if self.partition is None:
                raise ValueError("group cone requires a partition")
            s = check_count(self.s, "s")
            if s > self.partition.n_groups:
                raise ValueError("s exceeds the number of groups")
            object.__setattr__(self, "n", self.partition.n)
        elif self.kind == LOW_RANK:
            d = check_count(self.d, "d")
            r = check_count(self.r, "r")
            if r > d:
                raise ValueError(f"r={r} exceeds d={d}")
        else:
            raise ValueError(f"unknown cone kind {self.kind!r}")

    @property
    def ambient_dim(self):
        """Dimension of the vectorized ambient space (d*d for matrices)."""
        if self.kind == LOW_RANK:
            return self.d * self.d
        return self.n


def sparse_cone(n, s):
    return ConeSpec(kind=SPARSE, n=n, s=s)


def group_cone(partition, s):
    return ConeSpec(kind=GROUP, partition=partition, s=s)


def lowrank_cone(d, r):
    return ConeSpec(kind=LOW_RANK, d=d, r=r)


@dataclass(frozen=True)
class RsvEstimate:
    """A restricted singular value with its provenance.

    Monte-Carlo estimates are lower bounds of a supremum and carry
    ``is_upper_bound=False``; exact enumeration attains the supremum.
    """

    value: float
    method: str
    trials: Optional[int] = None
    is_upper_bound: bool = True


def _sup_inner_product(cone, g):
    """sup over unit x in the cone of |<g, x>|, by closed form."""
    if cone.kind == SPARSE:
        mags = np.abs(g)
        if cone.s >= g.size:
            return float(np.linalg.norm(g))
        top = np.partition(mags, -cone.s)[-cone.s:]
        return float(np.linalg.norm(top))
    if cone.kind == GROUP:
        norms = np.array([np.linalg.norm(g[sl]) for sl in cone.partition.slices()])
        if cone.s >= norms.size:
            return float(np.linalg.norm(norms))
        top = np.partition(norms, -cone.s)[-cone.s:]
        return float(np.linalg.norm(top))
    sv = np.linalg.svd(g.reshape((cone.d, cone.d), order="F"), compute_uv=False)
    return float(np.linalg.norm(sv[: cone.r]))


def gaussian_complexity(cone, trials=10000, seed=0):
    """Monte-Carlo estimate of ``E sup_{x in cone} |<g, x>|`` for Gaussian g."""
    trials = check_count(trials, "trials")
    rng = np.random.default_rng(seed)
    dim = cone.ambient_dim
    total = 0.0
    for _ in range(trials):
        total += _sup_inner_product(cone, rng.standard_normal(dim))
    return total / trials


def xi_exact(op, noise_dir, cone):
    """Exact noise correlation ``sup_{v in cone} <v, A^T w>`` for unit ``w``.

    The supremum of a linear functional over each structured set has a closed
    form (top-magnitude entries, top group norms, or leading singular values
    of the matricized correlation), so no enumeration is needed.
    """
    noise_dir = np.asarray(noise_dir, dtype=float)
    if abs(np.linalg.norm(noise_dir) - 1.0) > 1e-10:
        raise ValueError("noise_dir must have unit l2 norm")
    correlation = op.apply_adjoint(noise_dir)
    return RsvEstimate(
        value=_sup_inner_product(cone, correlation),
        method="exact-enumeration",
        is_upper_bound=True,
    )


def _support_sets(cone):
    """All index supports realizing the cone's structural budget."""
    if cone.kind == SPARSE:
        return [list(c) for c in itertools.combinations(range(cone.n), cone.s)], math.comb(
            cone.n, cone.s
        )
    if cone.kind == GROUP:
        slices = cone.partition.slices()
        combos = itertools.combinations(range(cone.partition.n_groups), cone.s)
        supports = [
            [i for g in combo for i in range(slices[g].start, slices[g].stop)]
            for combo in combos
        ]
        return supports, math.comb(cone.partition.n_groups, cone.s)
    raise EnumerationBudgetError(
        "exact enumeration is not available for low-rank cones; use rho_monte_carlo"
    )


def _count_supports(cone):
    if cone.kind == SPARSE:
        return math.comb(cone.n, cone.s)
    if cone.kind == GROUP:
        return math.comb(cone.partition.n_groups, cone.s)
    raise EnumerationBudgetError(
        "exact enumeration is not available for low-rank cones; use rho_monte_carlo"
    )


def _deviation_matrix(op, mu):
    a = op.entries
    return np.eye(op.n) - mu * (a.T @ a)


def _topk_sum(row, k):
    if k >= row.size:
        return float(row.sum())
    return float(np.partition(row, -k)[-k:].sum())


def _rho_exact_pairs_generic(M, supports_p, supports_q, chunk=4096):
    """Reference path: batched SVD over all (S, T) support pairs."""
    best = 0.0
    t_arrays = [np.array(t) for t in supports_q]
    for s_idx in supports_p:
        block = M[np.array(s_idx)]
        for lo in range(0, len(t_arrays), chunk):
            batch = np.stack([block[:, t] for t in t_arrays[lo : lo + chunk]])
            sv = np.linalg.svd(batch, compute_uv=False)
            best = max(best, float(sv[:, 0].max()))
    return best


def _rho_exact_sparse_small_s(M, s, q, warm_start, chunk=20000):
    """Exact sup of sigma_max over |S|=s<=2, |T|=q supports of a symmetric M.

    Branch and bound: a Monte-Carlo warm start lower-bounds the answer, cheap
    per-pair upper bounds prune almost every left support, and the survivors
    are enumerated exactly with closed-form 2x2 eigenvalues.
    """
    n = M.shape[0]
    sq = M * M
    if s == 1:
        best = max(_topk_sum(sq[i], q) for i in range(n))
        return math.sqrt(best)
    pairs = np.array(list(itertools.combinations(range(n), 2)))
    i_idx, j_idx = pairs[:, 0], pairs[:, 1]
    alpha = np.array([_topk_sum(sq[i], q) for i in range(n)])
    cross = np.abs(M[i_idx] * M[j_idx])
    if q >= n:
        beta = cross.sum(axis=1)
    else:
        beta = -np.partition(-cross, q - 1, axis=1)[:, :q].sum(axis=1)
    upper = np.maximum(alpha[i_idx], alpha[j_idx]) + beta
    best = warm_start**2
    keep = np.nonzero(upper > best * (1.0 + 1e-12))[0]
    if keep.size:
        supports = np.array(list(itertools.combinations(range(n), q)))
        indicator = np.zeros((len(supports), n))
        indicator[np.arange(len(supports))[:, None], supports] = 1.0
        for p in keep:
            i, j = pairs[p]
            sums = indicator @ np.column_stack([sq[i], sq[j], M[i] * M[j]])
            a, c, b = sums[:, 0], sums[:, 1], sums[:, 2]
            lam = 0.5 * (a + c) + np.sqrt(0.25 * (a - c) ** 2 + b * b)
            best = max(best, float(lam.max()))
    return math.sqrt(best)


def rho_exact(op, mu, cone_p, cone_q, budget=DEFAULT_ENUMERATION_BUDGET, seed=0):
    """Exact contraction value by support enumeration (sparse / group cones).

    Evaluates ``sup sigma_max`` of the (S, T)-submatrices of ``I - mu A^T A``
    over every support pair the two cones admit.  The number of pairs must
    stay within ``budget``; larger instances should use
    :func:`rho_monte_carlo` instead.  Sparse cones with a side of at most two
    use a pruned branch-and-bound path that handles much larger budgets.
    """
    mu = check_positive(mu, "mu")
    n_pairs = _count_supports(cone_p) * _count_supports(cone_q)
    if n_pairs > budget:
        raise EnumerationBudgetError(
            f"{n_pairs} support pairs exceed the enumeration budget {budget}; "
            "use rho_monte_carlo"
        )
    M = _deviation_matrix(op, mu)
    if cone_p.kind == SPARSE and cone_q.kind == SPARSE and min(cone_p.s, cone_q.s) <= 2:
        # M is symmetric, so the smaller side can always be taken on the left.
        s, q = sorted((cone_p.s, cone_q.s))
        # A warm start only pays for itself when it can prune a large sweep.
        warm = 0.0
        if n_pairs > 50_000:
            warm = rho_monte_carlo(op, mu, cone_p, cone_q, trials=32, seed=seed).value
        value = _rho_exact_sparse_small_s(M, s, q, warm)
    else:
        supports_p, _ = _support_sets(cone_p)
        supports_q, _ = _support_sets(cone_q)
        value = _rho_exact_pairs_generic(M, supports_p, supports_q)
    return RsvEstimate(value=value, method="exact-enumeration", is_upper_bound=True)


def _project_to_cone(v, cone):
    """Nearest cone direction: structural truncation followed by normalization."""
    if cone.kind == SPARSE:
        out = np.zeros_like(v)
        idx = np.argpartition(np.abs(v), -cone.s)[-cone.s :]
        out[idx] = v[idx]
    elif cone.kind == GROUP:
        norms = np.array([np.linalg.norm(v[sl]) for sl in cone.partition.slices()])
        keep = np.argpartition(norms, -cone.s)[-cone.s :]
        out = np.zeros_like(v)
        for g in keep:
            sl = cone.partition.slices()[g]
            out[sl] = v[sl]
    else:
        mat = v.reshape((cone.d, cone.d), order="F")
        left, sv, right_t = np.linalg.svd(mat, full_matrices=False)
        trunc = (left[:, : cone.r] * sv[: cone.r]) @ right_t[: cone.r]
        out = trunc.ravel(order="F")
    norm = np.linalg.norm(out)
    return out / norm if norm > 0 else out


def rho_monte_carlo(op, mu, cone_p, cone_q, trials=50, seed=0, inner_iters=50):
    """Monte-Carlo lower bound on the contraction value.

    Alternating projected power iterations: from a random cone start, each
    half-step replaces one argument by the cone projection of the deviation
    matrix applied to the other, which never decreases the bilinear value.
    Returns the best value across ``trials`` independent starts, flagged as a
    lower bound.
    """
    mu = check_positive(mu, "mu")
    trials = check_count(trials, "trials")
    M = _deviation_matrix(op, mu)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        u = _project_to_cone(rng.standard_normal(op.n), cone_q)
        v = np.zeros(op.n)
        for _ in range(inner_iters):
            v = _project_to_cone(M @ u, cone_p)
            u = _project_to_cone(M @ v, cone_q)
        best = max(best, abs(float(v @ (M @ u))))
    return RsvEstimate(
        value=best, method="monte-carlo", trials=trials, is_upper_bound=False
    )


def theoretical_rho_xi(cone, m, K, eta=1.0, calib=None, trials=4000, seed=0):
    """Schedule constants from the complexity of an (already doubled) cone.

    Plugs a Monte-Carlo complexity estimate into

        rho = C_rho * K^2 * (gamma + eta) / sqrt(m)
        xi  = C_xi  * K   * (gamma + eta)

    with the multipliers taken from a calibration record (see
    :mod:`proxhomotopy.calibration`).  The caller passes the doubled or
    tripled cone explicitly; no hidden scaling is applied.
    """
    m = check_count(m, "m")
    K = check_positive(K, "K")
    eta = check_nonnegative(eta, "eta")
    if calib is None:
        raise ValueError("theoretical_rho_xi requires a calibration record")
    gamma = gaussian_complexity(cone, trials=trials, seed=seed)
    c_rho = calib.rho_multiplier(cone.kind)
    c_xi = calib.xi_multiplier(cone.kind)
    rho = c_rho * K * K * (gamma + eta) / math.sqrt(m)
    xi = c_xi * K * (gamma + eta)
    return rho, xi


@dataclass
class DeviationPoint:
    m: int
    draws: int
    median: float
    maximum: float
    admissible_constant: float
    fraction_within: Optional[float] = None


@dataclass
class DeviationReport:
    """Per-m summary of the restricted deviation against its sqrt(m) law."""

    points: list = field(default_factory=list)
    gamma_p: float = 0.0
    gamma_q: float = 0.0
    eta: float = 1.0
    K: float = 1.0
    smallest_admissible_constant: float = 0.0


def verify_deviation_bound(
    cone_p,
    cone_q,
    m_list,
    trials=100,
    seed=0,
    spec=None,
    eta=1.0,
    c_dev=None,
    gamma_trials=20000,
):
    """Monte-Carlo check of the sqrt(m) deviation law on enumerable cones.

    For each m, draws fresh operators, computes the exact restricted
    deviation ``sup <v, (I - A^T A / m) u>`` by enumeration, and reports the
    empirical smallest constant ``C`` making the bound
    ``C * K^2 * (gamma_p + gamma_q + 2 eta) / sqrt(m)`` hold, plus the
    fraction of draws within the bound when a calibrated ``c_dev`` is given.
    """
    from .sensing import SubGaussianSpec, generate_sensing

    spec = spec if spec is not None else SubGaussianSpec()
    gamma_p = gaussian_complexity(cone_p, trials=gamma_trials, seed=seed)
    gamma_q = gaussian_complexity(cone_q, trials=gamma_trials, seed=seed + 1)
    K = spec.psi2_bound
    envelope = K * K * (gamma_p + gamma_q + 2.0 * eta)
    report = DeviationReport(gamma_p=gamma_p, gamma_q=gamma_q, eta=eta, K=K)
    overall = 0.0
    n = cone_p.ambient_dim
    for m in m_list:
        m = check_count(m, "m")
        values = np.empty(trials)
        for t in range(trials):
            op = generate_sensing(m, n, spec=spec, seed=seed + 977 * m + t)
            values[t] = rho_exact(op, 1.0 / m, cone_p, cone_q).value
        constants = values * math.sqrt(m) / envelope
        point = DeviationPoint(
            m=m,
            draws=trials,
            median=float(np.median(values)),
            maximum=float(values.max()),
            admissible_constant=float(constants.max()),
        )
        if c_dev is not None:
            bound = c_dev * envelope / math.sqrt(m)
            point.fraction_within = float(np.mean(values <= bound))
        overall = max(overall, point.admissible_constant)
        report.points.append(point)
    report.smallest_admissible_constant = overall
    return report
