import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goodsubset.ratios import (RatioProblem, check_theorem2_conditions, empirical_ratios,
                               rate_residual, balance_residual, g_partials, g_value, solve_ratios)


def simplex_grid_oracle(means, stds, survivor, complement, step=1e-3):
    """Grid point on the (r_j1, r_j2) simplex with the smallest max balance residual."""
    mu, sd = np.asarray(means), np.asarray(stds)
    j1, j2 = complement
    a = np.arange(step, 1.0, step)
    r1, r2 = np.meshgrid(a, a, indexing="ij")
    rs = 1.0 - r1 - r2
    ok = rs > step / 2
    r1, r2, rs = r1[ok], r2[ok], rs[ok]
    s = survivor
    g1 = (mu[s] - mu[j1]) ** 2 / (sd[s] ** 2 / rs + sd[j1] ** 2 / r1)
    g2 = (mu[s] - mu[j2]) ** 2 / (sd[s] ** 2 / rs + sd[j2] ** 2 / r2)
    res9 = np.abs(g1 - g2) / np.maximum(g1, g2)
    res10 = np.abs(rs - sd[s] * np.sqrt(r1 ** 2 / sd[j1] ** 2 + r2 ** 2 / sd[j2] ** 2)) / rs
    best = np.argmin(np.maximum(res9, res10))
    return rs[best], r1[best], r2[best]


class TestRate:
    def test_value(self):
        assert g_value(1, 1, 0.5, 0, 1, 0.5) == pytest.approx(0.25)

    def test_vanishing_ratio(self):
        assert g_value(1, 1, 1e-12, 0, 1, 0.5) < 1e-11

    @pytest.mark.parametrize("r", [(0.0, 0.5), (0.5, -0.1)])
    def test_domain(self, r):
        with pytest.raises(ValueError):
            g_value(1, 1, r[0], 0, 1, r[1])

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-3, 3), st.floats(0.2, 3), st.floats(0.05, 0.9),
           st.floats(-3, 3), st.floats(0.2, 3), st.floats(0.05, 0.9))
    def test_partials_match_finite_differences(self, mi, si, ri, mj, sj, rj):
        h = 1e-6
        di, dj = g_partials(mi, si, ri, mj, sj, rj)
        fi = (g_value(mi, si, ri + h, mj, sj, rj) - g_value(mi, si, ri - h, mj, sj, rj)) / (2 * h)
        fj = (g_value(mi, si, ri, mj, sj, rj + h) - g_value(mi, si, ri, mj, sj, rj - h)) / (2 * h)
        scale = max(1.0, abs(fi), abs(fj))
        assert di == pytest.approx(fi, abs=1e-6 * scale)
        assert dj == pytest.approx(fj, abs=1e-6 * scale)


class TestSolver:
    def test_symmetric_three(self):
        sol = solve_ratios(RatioProblem([1.0, 0.0, 0.0], [1.0, 1.0, 1.0], 1))
        # r1 = sqrt(2) r2 and r1 + 2 r2 = 1
        r2 = 1.0 / (2.0 + math.sqrt(2.0))
        assert sol.converged
        np.testing.assert_allclose(sol.r, [math.sqrt(2) * r2, r2, r2], atol=1e-8)

    def test_symmetric_three_perturbed(self):
        sol = solve_ratios(RatioProblem([1.0, 0.0, 1e-9], [1.0, 1.0, 1.0], 1))
        np.testing.assert_allclose(sol.r, [0.41421356, 0.29289322, 0.29289322], atol=1e-7)

    def test_four_alternatives_against_grid(self):
        means, stds = [4.0, 3.0, 1.0, 0.0], [1.0] * 4
        sol = solve_ratios(RatioProblem(means, stds, 2, survivor=0))
        rs, r2, r3 = simplex_grid_oracle(means, stds, 0, (2, 3))
        assert sol.r[1] == 0.0
        assert abs(sol.r[0] - rs) < 1e-3
        assert abs(sol.r[2] - r2) < 1e-3
        assert abs(sol.r[3] - r3) < 1e-3

    def test_other_survivor(self):
        sol = solve_ratios(RatioProblem([4.0, 3.0, 1.0, 0.0], [1.0] * 4, 2, survivor=1))
        assert sol.converged and sol.r[0] == 0.0 and sol.r.sum() == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 9), st.data())
    def test_random_instances_balance(self, k, data):
        m = data.draw(st.integers(1, k - 2))
        means = sorted(data.draw(st.lists(st.floats(-5, 5), min_size=k, max_size=k, unique=True)),
                       reverse=True)
        if means[m - 1] - means[m] < 0.05:
            return
        stds = data.draw(st.lists(st.floats(0.3, 3.0), min_size=k, max_size=k))
        problem = RatioProblem(means, stds, m)
        sol = solve_ratios(problem)
        assert sol.converged
        assert sol.r.sum() == pytest.approx(1.0)
        assert rate_residual(problem, sol.r) < 1e-8
        assert balance_residual(problem, sol.r) < 1e-8
        others = np.setdiff1d(problem.top, [problem.survivor])
        assert np.all(sol.r[others] == 0)

    def test_solution_maximizes_min_rate(self):
        # the balance equations are the optimality conditions of max-min G
        problem = RatioProblem([2.0, 1.0, 0.3, -0.5], [1.0, 2.0, 0.5, 1.5], 1)
        sol = solve_ratios(problem)

        def min_rate(r):
            return min(g_value(2.0, 1.0, r[0], problem.means[j], problem.stds[j], r[j])
                       for j in (1, 2, 3))

        base = min_rate(sol.r)
        rng = np.random.default_rng(0)
        for _ in range(200):
            r = sol.r + rng.normal(0, 0.01, 4)
            r = np.abs(r) / np.abs(r).sum()
            assert min_rate(r) <= base + 1e-12


class TestProblemValidation:
    def test_top_not_separated(self):
        with pytest.raises(ValueError):
            RatioProblem([1.0, 1.0, 0.0], [1.0] * 3, 1)

    def test_survivor_outside_top(self):
        with pytest.raises(ValueError):
            RatioProblem([3.0, 2.0, 1.0], [1.0] * 3, 1, survivor=2)

    def test_nonpositive_std(self):
        with pytest.raises(ValueError):
            RatioProblem([1.0, 0.0], [1.0, 0.0], 1)


class TestTheorem2Conditions:
    def test_singleton_gamma_trivial(self):
        sol = solve_ratios(RatioProblem([1.0, 0.0, 0.0], [1.0] * 3, 1))
        rep = check_theorem2_conditions(sol.r, [0], [1, 2], [1.0, 0.0, 0.0], [1.0] * 3, tol=1e-6)
        assert rep.equal_min_rate_residual == 0.0
        assert rep.equal_derivative_residual == 0.0
        assert rep.argmin_sets[0] == frozenset({1, 2})
        assert rep.cover_holds and rep.all_hold(1e-6)

    def test_unbalanced_ratios(self):
        r = [0.3, 0.3, 0.2, 0.2]
        rep = check_theorem2_conditions(r, [0, 1], [2, 3], [2.0, 1.5, 0.0, -1.0], [1.0] * 4)
        assert rep.equal_min_rate_residual > 0.1
        assert not rep.all_hold(1e-3)
        assert rep.argmin_sets[0] == frozenset({2}) and rep.uncovered == frozenset({3})

    def test_input_checks(self):
        with pytest.raises(ValueError):
            check_theorem2_conditions([0.5, 0.5, 0.0], [0], [0, 1], [1, 0, 0], [1, 1, 1])
        with pytest.raises(ValueError):
            check_theorem2_conditions([0.4, 0.4, 0.0], [0], [1], [1, 0, 0], [1, 1, 1])


class TestEmpiricalRatios:
    def test_examples(self):
        np.testing.assert_allclose(empirical_ratios([10, 10, 10]), [1 / 3] * 3)
        np.testing.assert_allclose(empirical_ratios([0, 5, 5]), [0, 0.5, 0.5])

    def test_errors(self):
        with pytest.raises(ValueError):
            empirical_ratios([0, 0])
        with pytest.raises(ValueError):
            empirical_ratios([1, -1])
