import numpy as np
import pytest
from proxhomotopy.prox import (
    group_soft_threshold,
    project_l1_ball,
    singular_value_threshold,
    soft_threshold,
)
from proxhomotopy.signals import GroupPartition

from oracles import (
    coordinate_grid_beats_nothing,
    group_block_minimizer,
    group_prox_objective,
    l1_projection_by_bisection,
    nuclear_subgradient_residual,
    perturbation_beats_nothing,
)


class TestSoftThreshold:
    def test_analytic_example(self):
        out = soft_threshold(np.array([3.0, -0.5, 0.0]), 1.0)
        assert np.array_equal(out, np.array([2.0, 0.0, 0.0]))

    def test_zero_threshold_is_identity(self):
        v = np.array([1.0, -2.0, 0.25])
        assert np.array_equal(soft_threshold(v, 0.0), v)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            soft_threshold(np.ones(3), -0.1)

    def test_minimizes_objective_against_search(self):
        rng = np.random.default_rng(42)
        v = rng.standard_normal(6)
        out = soft_threshold(v, 0.7)
        assert perturbation_beats_nothing(out, v, 0.7, rng)
        assert coordinate_grid_beats_nothing(out, v, 0.7)

    def test_never_grows_entries_and_keeps_signs(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            v = rng.standard_normal(8)
            out = soft_threshold(v, 0.3)
            assert np.all(np.abs(out) <= np.abs(v) + 1e-15)
            surviving = out != 0
            assert np.all(np.sign(out[surviving]) == np.sign(v[surviving]))

    def test_nonexpansive(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            a, b = rng.standard_normal((2, 10))
            lhs = np.linalg.norm(soft_threshold(a, 0.4) - soft_threshold(b, 0.4))
            assert lhs <= np.linalg.norm(a - b) + 1e-12


class TestGroupSoftThreshold:
    def test_full_shrink_at_block_norm(self):
        part = GroupPartition(((0, 2),))
        out = group_soft_threshold(np.array([3.0, 4.0]), 5.0, part)
        assert np.array_equal(out, np.zeros(2))

    def test_zero_threshold_is_identity(self):
        part = GroupPartition.uniform(6, 3)
        v = np.arange(6.0)
        assert np.array_equal(group_soft_threshold(v, 0.0, part), v)

    def test_partition_length_mismatch(self):
        part = GroupPartition.uniform(6, 3)
        with pytest.raises(ValueError):
            group_soft_threshold(np.ones(5), 0.1, part)

    def test_matches_per_group_line_search(self):
        rng = np.random.default_rng(3)
        part = GroupPartition(((0, 3), (3, 6)))
        for _ in range(100):
            v = rng.standard_normal(6)
            tau = 0.5
            out = group_soft_threshold(v, tau, part)
            # the block minimizer is colinear with the input block
            for sl in part.slices():
                expected = group_block_minimizer(v[sl], tau)
                assert np.linalg.norm(out[sl] - expected) <= 1e-8

    def test_objective_not_beaten_by_random_search(self):
        rng = np.random.default_rng(5)
        part = GroupPartition(((0, 2), (2, 5)))
        v = rng.standard_normal(5)
        out = group_soft_threshold(v, 0.6, part)
        base = group_prox_objective(out, v, 0.6, part.slices())
        for _ in range(2000):
            trial = out + 0.05 * rng.standard_normal(5)
            assert group_prox_objective(trial, v, 0.6, part.slices()) + 1e-12 >= base

    def test_nonexpansive(self):
        rng = np.random.default_rng(13)
        part = GroupPartition.uniform(9, 3)
        for _ in range(100):
            a, b = rng.standard_normal((2, 9))
            lhs = np.linalg.norm(
                group_soft_threshold(a, 0.5, part) - group_soft_threshold(b, 0.5, part)
            )
            assert lhs <= np.linalg.norm(a - b) + 1e-12


class TestSingularValueThreshold:
    def test_diagonal_case(self):
        out = singular_value_threshold(np.diag([3.0, 1.0]), 2.0)
        assert np.allclose(out, np.diag([1.0, 0.0]), atol=1e-12)

    def test_zero_threshold_reconstructs(self):
        rng = np.random.default_rng(17)
        M = rng.standard_normal((5, 5))
        assert np.linalg.norm(singular_value_threshold(M, 0.0) - M) <= 1e-10

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            singular_value_threshold(np.ones((2, 3)), 0.1)

    def test_rejects_non_finite(self):
        M = np.ones((2, 2))
        M[0, 1] = np.nan
        with pytest.raises(ValueError):
            singular_value_threshold(M, 0.1)

    def test_subgradient_optimality(self):
        rng = np.random.default_rng(19)
        for _ in range(100):
            M = rng.standard_normal((4, 4))
            out = singular_value_threshold(M, 0.8)
            assert nuclear_subgradient_residual(out, M, 0.8) < 1e-8

    def test_singular_values_shrink_and_rank_drops(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            M = rng.standard_normal((5, 5))
            out = singular_value_threshold(M, 0.6)
            sv_in = np.linalg.svd(M, compute_uv=False)
            sv_out = np.linalg.svd(out, compute_uv=False)
            assert np.all(sv_out <= sv_in + 1e-12)
            assert np.linalg.matrix_rank(out, tol=1e-10) <= np.linalg.matrix_rank(M)

    def test_nonexpansive(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            A = rng.standard_normal((4, 4))
            B = rng.standard_normal((4, 4))
            lhs = np.linalg.norm(
                singular_value_threshold(A, 0.5) - singular_value_threshold(B, 0.5)
            )
            assert lhs <= np.linalg.norm(A - B) + 1e-12


class TestProjectL1Ball:
    def test_interior_unchanged(self):
        v = np.array([0.2, -0.3, 0.1])
        assert np.array_equal(project_l1_ball(v, 1.0), v)

    def test_zero_radius(self):
        assert np.array_equal(project_l1_ball(np.array([1.0, 1.0]), 0.0), np.zeros(2))

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            project_l1_ball(np.ones(2), -1.0)

    def test_matches_bisection_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            v = rng.standard_normal(5) * 2.0
            out = project_l1_ball(v, 1.0)
            expected = l1_projection_by_bisection(v, 1.0)
            assert np.linalg.norm(out - expected) <= 1e-8

    def test_feasibility_and_variational_inequality(self):
        rng = np.random.default_rng(37)
        radius = 1.5
        v = rng.standard_normal(8) * 3.0
        out = project_l1_ball(v, radius)
        assert np.abs(out).sum() <= radius + 1e-10
        for _ in range(100):
            candidate = rng.standard_normal(8)
            candidate *= radius / max(np.abs(candidate).sum(), radius)
            assert float((v - out) @ (candidate - out)) <= 1e-8

    def test_nonexpansive(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            a, b = rng.standard_normal((2, 7))
            lhs = np.linalg.norm(project_l1_ball(a, 1.0) - project_l1_ball(b, 1.0))
            assert lhs <= np.linalg.norm(a - b) + 1e-12
