"""Tests for the quadrature grid and the collocation linear system.

The kernel matrix entries are checked against hand-computed values, the
solver against dense reference solves, and the grouped solve against the
per-column bitwise contract that makes reuse of one factorization safe.
"""

import math

import numpy as np
import pytest

from cusumkit import (
    Hypothesis,
    assemble_kernel,
    assemble_reference_kernel,
    build_grid,
    counter_snapshot,
    gaussian_shift,
    nystrom_extend,
    solve_grouped,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)


class TestBuildGrid:
    def test_two_point_rule(self):
        """On [-1, 1] the two-point rule has nodes +-1/sqrt(3), weights 1."""
        grid = build_grid(-1.0, 1.0, 2)
        root = 1.0 / math.sqrt(3.0)
        np.testing.assert_allclose(grid.nodes, [-root, root], atol=1e-12)
        np.testing.assert_allclose(grid.weights, [1.0, 1.0], atol=1e-12)

    def test_affine_map(self):
        grid = build_grid(0.0, 4.0, 3)
        ref = math.sqrt(3.0 / 5.0)
        np.testing.assert_allclose(
            grid.nodes, [2.0 - 2.0 * ref, 2.0, 2.0 + 2.0 * ref], atol=1e-12
        )
        np.testing.assert_allclose(
            grid.weights, [10.0 / 9.0, 16.0 / 9.0, 10.0 / 9.0], atol=1e-12
        )

    @pytest.mark.parametrize("a,b,n", [(-2.0, 2.0, 17), (0.0, 4.0, 256), (-1.0, 3.0, 64)])
    def test_weights_sum_to_length(self, a, b, n):
        grid = build_grid(a, b, n)
        np.testing.assert_allclose(grid.weights.sum(), b - a, atol=1e-10)

    @pytest.mark.parametrize("n", [2, 3, 8])
    def test_cubic_exactness(self, n):
        """Gauss-Legendre with n >= 2 integrates x**3 on [0, 4] exactly."""
        grid = build_grid(0.0, 4.0, n)
        np.testing.assert_allclose(grid.weights @ grid.nodes**3, 64.0, atol=1e-12)

    def test_nodes_sorted_and_interior(self):
        grid = build_grid(-3.0, 5.0, 40)
        assert np.all(np.diff(grid.nodes) > 0.0)
        assert grid.nodes[0] > -3.0 and grid.nodes[-1] < 5.0
        assert grid.size == 40

    @pytest.mark.parametrize(
        "a,b,n",
        [(2.0, 2.0, 8), (3.0, 1.0, 8), (0.0, 1.0, 1), (0.0, 1.0, 4097), (math.nan, 1.0, 8)],
    )
    def test_validation(self, a, b, n):
        with pytest.raises(ValueError):
            build_grid(a, b, n)

    def test_arrays_are_read_only(self):
        grid = build_grid(0.0, 1.0, 4)
        assert not grid.nodes.flags.writeable
        assert not grid.weights.flags.writeable
        with pytest.raises(ValueError):
            grid.nodes[0] = 0.0


def hand_kernel_h0(theta, x_to, x_from, weight):
    """One matrix entry computed longhand: weight * K0(x_from - x_to)."""
    z = x_from - x_to
    v = theta * theta
    return weight * math.exp(-((z + 0.5 * v) ** 2) / (2.0 * v)) / (abs(theta) * SQRT_2PI)


class TestAssembleKernel:
    def test_three_by_three_hand_check(self):
        """Every entry of a 3x3 matrix matches longhand evaluation."""
        grid = build_grid(0.0, 4.0, 3)
        kernel = assemble_kernel(gaussian_shift(1.0), grid)
        expected = np.array(
            [
                [
                    hand_kernel_h0(1.0, grid.nodes[i], grid.nodes[j], grid.weights[j])
                    for j in range(3)
                ]
                for i in range(3)
            ]
        )
        np.testing.assert_allclose(kernel.entries, expected, atol=1e-12, rtol=0)
        assert kernel.hypothesis is Hypothesis.H0

    def test_entries_nonnegative_row_sums_below_one(self):
        """Quadrature rows approximate a sub-probability integral."""
        grid = build_grid(-8.0, 8.0, 128)
        kernel = assemble_kernel(gaussian_shift(1.0), grid)
        assert np.all(kernel.entries >= 0.0)
        assert np.all(kernel.entries.sum(axis=1) <= 1.0 + 1e-12)

    def test_row_matches_manual_quadrature(self):
        from cusumkit import log_lr_pdf

        grid = build_grid(-2.0, 2.0, 32)
        model = gaussian_shift(1.0)
        kernel = assemble_kernel(model, grid)
        x = 0.7
        manual = grid.weights * log_lr_pdf(model, Hypothesis.H0, grid.nodes - x)
        np.testing.assert_allclose(kernel.row(x), manual, rtol=1e-15)

    def test_condition_estimate_sane(self):
        grid = build_grid(0.0, 4.0, 64)
        kernel = assemble_kernel(gaussian_shift(1.0), grid)
        assert math.isfinite(kernel.condition_estimate)
        assert 1.0 <= kernel.condition_estimate < 100.0

    def test_reference_kernel_h1_matches_tilt(self):
        """The H1 reference matrix equals the tilted H0 matrix elementwise."""
        grid = build_grid(-2.0, 2.0, 48)
        model = gaussian_shift(1.0)
        k0 = assemble_kernel(model, grid).entries
        k1 = assemble_reference_kernel(model, grid, Hypothesis.H1).entries
        scale = np.exp(grid.nodes[None, :] - grid.nodes[:, None])
        np.testing.assert_allclose(k1, k0 * scale, atol=1e-12, rtol=0)

    def test_counters_track_assembly_and_factorization(self):
        before = counter_snapshot()
        grid = build_grid(0.0, 4.0, 16)
        assemble_kernel(gaussian_shift(1.0), grid)
        after = counter_snapshot()
        assert after["kernel_assemblies"] - before["kernel_assemblies"] == 1
        assert after["factorizations"] - before["factorizations"] == 1


class TestSolveGrouped:
    def setup_method(self):
        self.grid = build_grid(-2.0, 2.0, 64)
        self.kernel = assemble_kernel(gaussian_shift(1.0), self.grid)

    def test_zero_rhs_gives_zero(self):
        (solution,) = solve_grouped(self.kernel, [np.zeros(64)])
        assert np.all(solution == 0.0)

    def test_round_trip(self):
        """Applying (I - M) to the solution recovers the right-hand side."""
        rng = np.random.default_rng(42)
        truth = rng.standard_normal(64)
        rhs = truth - self.kernel.entries @ truth
        (solution,) = solve_grouped(self.kernel, [rhs])
        np.testing.assert_allclose(solution, truth, rtol=1e-12)

    def test_matches_dense_reference_solve(self):
        rng = np.random.default_rng(42)
        rhs = rng.standard_normal(64)
        (solution,) = solve_grouped(self.kernel, [rhs])
        reference = np.linalg.solve(np.eye(64) - self.kernel.entries, rhs)
        np.testing.assert_allclose(solution, reference, rtol=1e-12)

    def test_grouped_equals_per_column_bitwise(self):
        """Grouping right-hand sides must not change a single bit."""
        rng = np.random.default_rng(42)
        columns = [rng.standard_normal(64) for _ in range(4)]
        grouped = solve_grouped(self.kernel, columns)
        for col, got in zip(columns, grouped):
            (single,) = solve_grouped(self.kernel, [col])
            assert np.array_equal(got, single)

    def test_linearity(self):
        rng = np.random.default_rng(42)
        rhs = rng.standard_normal(64)
        base, scaled = solve_grouped(self.kernel, [rhs, 3.5 * rhs])
        np.testing.assert_allclose(scaled, 3.5 * base, rtol=1e-12)

    def test_solves_do_not_refactorize(self):
        before = counter_snapshot()
        solve_grouped(self.kernel, [np.ones(64), np.arange(64.0)])
        assert counter_snapshot() == before

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError):
            solve_grouped(self.kernel, [np.ones(63)])


class TestNystromExtend:
    def setup_method(self):
        self.grid = build_grid(-2.0, 2.0, 64)
        self.kernel = assemble_kernel(gaussian_shift(1.0), self.grid)
        (self.values,) = solve_grouped(self.kernel, [np.ones(64)])

    def test_reproduces_node_values(self):
        """The natural interpolant passes through the collocation solution."""
        for k in (0, 17, 63):
            got = nystrom_extend(
                self.kernel, self.values, lambda t: 1.0, self.grid.nodes[k]
            )
            np.testing.assert_allclose(got, self.values[k], atol=1e-10)

    def test_matches_manual_formula(self):
        x = 0.3
        expected = 1.0 + self.kernel.row(x) @ self.values
        got = nystrom_extend(self.kernel, self.values, lambda t: 1.0, x)
        np.testing.assert_allclose(got, expected, rtol=1e-15)

    @pytest.mark.parametrize("x", [-2.1, 2.1])
    def test_outside_interval_rejected(self, x):
        with pytest.raises(ValueError):
            nystrom_extend(self.kernel, self.values, lambda t: 1.0, x)
