import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsodlqr import (
    ConstraintSetP,
    ConstraintSetQ,
    CostMatrices,
    DimensionMismatch,
    NonStabilizable,
    ThetaParams,
    closed_loop_norm,
    in_set_p,
    in_set_q,
    riccati_map,
    solve_dare,
)


def scalar_p_root(a, b, q, r):
    # Eliminating the gain from the scalar fixed point leaves a quadratic in p.
    c1 = b * b * q + r * (a * a - 1.0)
    return (c1 + math.sqrt(c1 * c1 + 4.0 * b * b * q * r)) / (2.0 * b * b)


class TestSolveDare:
    def test_zero_a_identity_b(self):
        sol = solve_dare(ThetaParams(np.zeros((3, 3)), np.eye(3)), CostMatrices.identity(3, 3))
        assert np.allclose(sol.p_matrix, np.eye(3), atol=1e-12)
        assert np.allclose(sol.gain, 0.0, atol=1e-12)
        assert sol.avg_cost == pytest.approx(3.0, abs=1e-12)

    def test_scalar_closed_form(self):
        a, b, q, r = 0.5, 1.0, 1.0, 1.0
        sol = solve_dare(ThetaParams([[a]], [[b]]), CostMatrices([[q]], [[r]]))
        p = scalar_p_root(a, b, q, r)
        assert p == pytest.approx((0.25 + math.sqrt(4.0625)) / 2.0, abs=1e-12)
        assert sol.p_matrix[0, 0] == pytest.approx(p, abs=1e-9)
        k = -p * a * b / (r + b * b * p)
        assert sol.gain[0, 0] == pytest.approx(k, abs=1e-9)
        assert sol.gain[0, 0] == pytest.approx(-0.265565, abs=1e-6)

    def test_section_v_system_against_long_oracle(self, theta_star, costs32):
        sol = solve_dare(theta_star, costs32)
        residual = np.linalg.norm(riccati_map(sol.p_matrix, theta_star, costs32) - sol.p_matrix)
        assert residual <= 1e-10
        # Oracle: the same map iterated far past the solver's stopping point.
        p = costs32.q_matrix.copy()
        for _ in range(100_000):
            p_next = riccati_map(p, theta_star, costs32)
            if np.linalg.norm(p_next - p) <= 1e-15:
                p = p_next
                break
            p = p_next
        assert np.linalg.norm(sol.p_matrix - p) <= 1e-9
        assert sol.avg_cost == pytest.approx(np.trace(p), abs=1e-9)
        assert sol.avg_cost == np.trace(sol.p_matrix)

    def test_divergence_raises(self):
        with pytest.raises(NonStabilizable):
            solve_dare(ThetaParams([[2.0]], [[0.0]]), CostMatrices([[1.0]], [[1.0]]))

    def test_gain_consistency(self, theta_star, costs32):
        sol = solve_dare(theta_star, costs32)
        a, b = theta_star.a_matrix, theta_star.b_matrix
        k = -np.linalg.solve(costs32.r_matrix + b.T @ sol.p_matrix @ b, b.T @ sol.p_matrix @ a)
        assert np.linalg.norm(sol.gain - k) <= 1e-10

    def test_scalar_gain_monotone_in_r(self):
        a, b, q = 0.7, 1.3, 1.0
        gains = []
        for r in np.linspace(0.1, 8.0, 20):
            sol = solve_dare(ThetaParams([[a]], [[b]]), CostMatrices([[q]], [[r]]))
            p = scalar_p_root(a, b, q, r)
            assert sol.p_matrix[0, 0] == pytest.approx(p, rel=1e-8)
            gains.append(abs(sol.gain[0, 0]))
        assert all(g1 > g2 for g1, g2 in zip(gains, gains[1:]))


class TestClosedLoopNorm:
    def test_zero(self):
        theta = ThetaParams(np.zeros((2, 2)), np.eye(2))
        assert closed_loop_norm(theta, np.zeros((2, 2))) == 0.0

    def test_exact_cancellation(self):
        theta = ThetaParams(0.5 * np.eye(2), np.eye(2))
        assert closed_loop_norm(theta, -0.5 * np.eye(2)) == pytest.approx(0.0, abs=1e-15)

    def test_section_v_against_power_iteration(self, theta_star, costs32):
        gain = solve_dare(theta_star, costs32).gain
        norm = closed_loop_norm(theta_star, gain)
        assert norm < 1.0
        m = theta_star.a_matrix + theta_star.b_matrix @ gain
        g = m.T @ m
        v = np.ones(3) / np.sqrt(3)
        for _ in range(10_000):
            v = g @ v
            v /= np.linalg.norm(v)
        assert norm == pytest.approx(math.sqrt(v @ g @ v), rel=1e-10)

    def test_dimension_mismatch(self, theta_star):
        with pytest.raises(DimensionMismatch):
            closed_loop_norm(theta_star, np.zeros((3, 3)))


class TestMembership:
    def test_trivial_true(self):
        theta = ThetaParams(np.zeros((3, 3)), np.eye(3))
        assert in_set_q(theta, CostMatrices.identity(3, 3), ConstraintSetQ(10.0, 0.99))

    def test_unstable_uncontrollable_false(self):
        theta = ThetaParams([[2.0]], [[0.0]])
        costs = CostMatrices([[1.0]], [[1.0]])
        for m_p in (1.0, 50.0, 1e6):
            assert not in_set_q(theta, costs, ConstraintSetQ(m_p, 0.99))

    def test_section_v_true_with_oracle(self, theta_star, costs32, set_q):
        assert in_set_q(theta_star, costs32, set_q)
        sol = solve_dare(theta_star, costs32, tol=1e-13, max_iters=100_000)
        assert sol.avg_cost <= set_q.m_p
        assert closed_loop_norm(theta_star, sol.gain) <= set_q.rho

    def test_trace_bound_excludes(self, theta_star, costs32):
        assert not in_set_q(theta_star, costs32, ConstraintSetQ(1.0, 0.99))

    def test_set_p_examples(self, theta_sim, costs32, set_p):
        theta = ThetaParams(np.zeros((3, 3)), np.eye(3))
        c33 = CostMatrices.identity(3, 3)
        assert in_set_p(theta, c33, ConstraintSetP(10.0, 10.0, 0.99))
        assert not in_set_p(theta, c33, ConstraintSetP(10.0, 1.0, 0.99))  # ||theta||_F = sqrt(3)
        assert in_set_p(theta_sim, costs32, set_p)

    def test_membership_implies_geometric_decay(self, theta_star, costs32, set_q):
        sol = solve_dare(theta_star, costs32)
        m = theta_star.a_matrix + theta_star.b_matrix @ sol.gain
        x = np.array([1.0, -2.0, 0.5])
        x0_norm = np.linalg.norm(x)
        for step in range(1, 51):
            x = m @ x
            assert np.linalg.norm(x) <= set_q.rho**step * x0_norm + 1e-12


class TestThetaParams:
    @settings(max_examples=50, deadline=None)
    @given(
        n=st.integers(min_value=1, max_value=4),
        m=st.integers(min_value=1, max_value=4),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_stacked_round_trip(self, n, m, seed):
        rng = np.random.default_rng(seed)
        theta = ThetaParams(rng.normal(size=(n, n)), rng.normal(size=(n, m)))
        back = ThetaParams.from_stacked(theta.stacked, n, m)
        assert np.array_equal(back.a_matrix, theta.a_matrix)
        assert np.array_equal(back.b_matrix, theta.b_matrix)
        assert np.array_equal(theta.stacked.T[:, :n], theta.a_matrix)
        assert np.array_equal(theta.stacked.T[:, n:], theta.b_matrix)

    def test_rejects_bad_shapes(self):
        with pytest.raises(DimensionMismatch):
            ThetaParams(np.zeros((2, 3)), np.zeros((2, 1)))
        with pytest.raises(DimensionMismatch):
            ThetaParams(np.zeros((2, 2)), np.zeros((3, 1)))
        with pytest.raises(ValueError):
            ThetaParams(np.array([[np.nan]]), np.array([[1.0]]))


class TestCostMatrices:
    def test_rejects_non_spd(self):
        with pytest.raises(ValueError, match="r_matrix"):
            CostMatrices(np.eye(2), np.array([[1.0, 0.0], [0.0, -1.0]]))
        with pytest.raises(ValueError, match="q_matrix"):
            CostMatrices(np.array([[1.0, 0.5], [0.4, 1.0]]), np.eye(2))
