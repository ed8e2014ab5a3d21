"""Independent reference computations used to pin expected test values.

Everything here is deliberately naive (triple loops, exhaustive enumeration,
grid and bisection searches) and never calls the code paths it checks.
"""

import itertools

import numpy as np


def matvec_triple_loop(entries, x):
    m, n = entries.shape
    out = np.zeros(m)
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += entries[i, j] * x[j]
        out[i] = acc
    return out


def l1_prox_objective(x, v, tau):
    return tau * np.abs(x).sum() + 0.5 * np.sum((x - v) ** 2)


def group_prox_objective(x, v, tau, slices):
    reg = sum(np.linalg.norm(x[sl]) for sl in slices)
    return tau * reg + 0.5 * np.sum((x - v) ** 2)


def perturbation_beats_nothing(candidate, v, tau, rng, n_perturb=10**5, scale=0.1):
    """True when no random perturbation lowers the shrinkage objective."""
    base = l1_prox_objective(candidate, v, tau)
    steps = rng.standard_normal((n_perturb, v.size)) * scale
    perturbed = candidate[None, :] + steps
    values = tau * np.abs(perturbed).sum(axis=1) + 0.5 * np.sum(
        (perturbed - v[None, :]) ** 2, axis=1
    )
    return bool(np.all(values + 1e-12 >= base))


def coordinate_grid_beats_nothing(candidate, v, tau, step=0.001, span=3):
    base = l1_prox_objective(candidate, v, tau)
    for j in range(v.size):
        for k in range(-span, span + 1):
            if k == 0:
                continue
            trial = candidate.copy()
            trial[j] += k * step
            if l1_prox_objective(trial, v, tau) + 1e-12 < base:
                return False
    return True


def group_block_minimizer(block, tau):
    """Scalar line-search oracle for the block-shrinkage objective.

    Minimizes ``tau * ||alpha b|| + 0.5 * ||alpha b - b||^2`` over alpha >= 0
    using only objective evaluations: a central finite difference gives the
    derivative exactly on the quadratic region, and one secant step finds its
    root; negative roots clamp to the boundary.
    """

    def objective(alpha):
        return tau * np.linalg.norm(alpha * block) + 0.5 * np.sum(
            (alpha * block - block) ** 2
        )

    h = 1e-5

    def derivative(alpha):
        return (objective(alpha + h) - objective(alpha - h)) / (2.0 * h)

    a1, a2 = 0.25, 1.0
    d1, d2 = derivative(a1), derivative(a2)
    if d2 == d1:
        return block * 0.0
    root = a1 - d1 * (a2 - a1) / (d2 - d1)
    return max(root, 0.0) * block


def nuclear_subgradient_residual(solution, target, tau):
    """Distance of (target - solution)/tau from the nuclear-norm subdifferential."""
    gradient = (target - solution) / tau
    left, sv, right_t = np.linalg.svd(solution, full_matrices=True)
    rank = int(np.sum(sv > 1e-10 * max(sv[0], 1e-300))) if sv.size else 0
    u_r, v_r = left[:, :rank], right_t[:rank].T
    u_perp, v_perp = left[:, rank:], right_t[rank:].T
    res_core = np.linalg.norm(u_r.T @ gradient @ v_r - np.eye(rank))
    res_mix1 = np.linalg.norm(u_r.T @ gradient @ v_perp)
    res_mix2 = np.linalg.norm(u_perp.T @ gradient @ v_r)
    corner = u_perp.T @ gradient @ v_perp
    spectral = np.linalg.norm(corner, 2) if corner.size else 0.0
    res_corner = max(0.0, spectral - 1.0)
    return res_core + res_mix1 + res_mix2 + res_corner


def l1_projection_by_bisection(v, radius, tol=1e-12):
    """Projection level found by bisection on the shrunken l1 norm."""
    def shrunk_norm(theta):
        return np.maximum(np.abs(v) - theta, 0.0).sum()

    if np.abs(v).sum() <= radius:
        return v.copy()
    lo, hi = 0.0, float(np.abs(v).max())
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if shrunk_norm(mid) > radius:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def xi_by_support_enumeration(entries, noise_dir, s):
    """Brute-force sup of <v, A^T w> over s-sparse unit v."""
    corr = entries.T @ noise_dir
    n = corr.size
    best = 0.0
    for support in itertools.combinations(range(n), s):
        best = max(best, float(np.linalg.norm(corr[list(support)])))
    return best


def rho_by_svd_enumeration(entries, mu, s, q):
    """Brute-force restricted deviation via all (S, T) submatrix SVDs."""
    n = entries.shape[1]
    M = np.eye(n) - mu * (entries.T @ entries)
    best = 0.0
    for S in itertools.combinations(range(n), s):
        for T in itertools.combinations(range(n), q):
            sub = M[np.ix_(list(S), list(T))]
            best = max(best, float(np.linalg.svd(sub, compute_uv=False)[0]))
    return best


def chi_mean(n):
    """E ||g||_2 for standard Gaussian g in R^n."""
    from scipy.special import gammaln

    return float(np.sqrt(2.0) * np.exp(gammaln((n + 1) / 2.0) - gammaln(n / 2.0)))
