import numpy as np
import pytest

from fluidpricing import (
    DegeneracyWarning,
    DomainError,
    MultiDemandModel,
    active_partition,
    partial_optimum,
    solve_fluid_multi,
    solve_fluid_single,
    validate_multi,
)
from fluidpricing.fluid import box_qp2_batch

from conftest import random_multi_model


class TestSingle:
    def test_limited_inventory_active(self, bernoulli_model):
        sol = solve_fluid_single(bernoulli_model, 5 / 16)
        assert sol.x_c[0] == pytest.approx(5 / 16)
        assert sol.active_set == [0]
        assert sol.lam[0] == pytest.approx(0.25)  # r'(5/16)
        assert sol.objective == pytest.approx(35 / 128)
        assert not sol.clamped and not sol.degenerate

    def test_ample_inventory_inactive(self, bernoulli_model):
        sol = solve_fluid_single(bernoulli_model, 0.5)
        assert sol.x_c[0] == pytest.approx(3 / 8)
        assert sol.active_set == []
        assert sol.lam[0] == 0.0

    def test_boundary_flagged(self, bernoulli_model):
        with pytest.warns(DegeneracyWarning):
            sol = solve_fluid_single(bernoulli_model, bernoulli_model.x_u)
        assert sol.degenerate
        assert sol.x_c[0] == pytest.approx(3 / 8)

    def test_below_floor_clamped(self, bernoulli_model):
        sol = solve_fluid_single(bernoulli_model, 0.1)
        assert sol.clamped
        assert sol.x_c[0] == pytest.approx(bernoulli_model.d_lo)

    def test_negative_inventory_rejected(self, bernoulli_model):
        with pytest.raises(DomainError):
            solve_fluid_single(bernoulli_model, -0.2)


class TestMulti:
    def test_interior_newton_point(self):
        model = MultiDemandModel(g=[1.0, 1.0], H=[[-2.0, 0.0], [0.0, -2.0]], box_hi=[1.0, 1.0])
        sol = solve_fluid_multi(model, np.array([10.0, 10.0]))
        np.testing.assert_allclose(sol.x_c, [0.5, 0.5], atol=1e-12)
        assert sol.active_set == []

    def test_one_constrained_product(self):
        model = MultiDemandModel(g=[1.0, 1.0], H=[[-2.0, 0.0], [0.0, -2.0]], box_hi=[1.0, 1.0])
        sol = solve_fluid_multi(model, np.array([0.2, 10.0]))
        np.testing.assert_allclose(sol.x_c, [0.2, 0.5], atol=1e-12)
        assert sol.active_set == [0]
        assert sol.lam[0] == pytest.approx(0.6)  # g_1 + (H x)_1 = 1 - 0.4

    def test_zero_inventory(self, multi_model):
        sol = solve_fluid_multi(multi_model, np.zeros(2))
        np.testing.assert_allclose(sol.x_c, [0.0, 0.0], atol=1e-14)
        assert sol.active_set == [0, 1]
        assert sol.objective == pytest.approx(multi_model.revenue([0.0, 0.0]))

    def test_degenerate_dual_warns(self):
        model = MultiDemandModel(g=[1.0, 1.0], H=[[-2.0, 0.0], [0.0, -2.0]], box_hi=[1.0, 1.0])
        with pytest.warns(DegeneracyWarning):
            sol = solve_fluid_multi(model, np.array([0.5, 10.0]))
        assert sol.degenerate

    def test_kkt_residuals_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            model = random_multi_model(rng, n)
            rhs = rng.uniform(0.0, 1.2, size=n)
            sol = solve_fluid_multi(model, rhs)
            x = sol.x_c
            ub = np.minimum(model.box_hi, rhs)
            # primal feasibility
            assert np.all(x >= -1e-8) and np.all(x <= ub + 1e-8)
            # stationarity with bound multipliers, dual feasibility, slackness
            grad = model.revenue_grad(x)
            mu_up = np.where(x >= ub - 1e-9, np.maximum(grad, 0.0), 0.0)
            mu_lo = np.where(x <= 1e-9, np.maximum(-grad, 0.0), 0.0)
            residual = grad - mu_up + mu_lo
            assert np.linalg.norm(residual, ord=np.inf) <= 1e-8
            assert np.all(mu_up >= -1e-10) and np.all(mu_lo >= -1e-10)
            slack_up = np.abs(mu_up * (ub - x))
            slack_lo = np.abs(mu_lo * x)
            assert slack_up.max(initial=0.0) <= 1e-8
            assert slack_lo.max(initial=0.0) <= 1e-8

    def test_matches_dense_grid_oracle_n2(self):
        rng = np.random.default_rng(12)
        step = 1e-3
        for _ in range(5):
            model = random_multi_model(rng, 2)
            rhs = rng.uniform(0.05, 1.2, size=2)
            ub = np.minimum(model.box_hi, rhs)
            g1 = np.arange(0.0, ub[0] + step / 2, step)
            g2 = np.arange(0.0, ub[1] + step / 2, step)
            X1, X2 = np.meshgrid(g1, g2, indexing="ij")
            vals = (model.c + model.g[0] * X1 + model.g[1] * X2
                    + 0.5 * (model.H[0, 0] * X1**2 + model.H[1, 1] * X2**2)
                    + model.H[0, 1] * X1 * X2)
            best = np.unravel_index(np.argmax(vals), vals.shape)
            sol = solve_fluid_multi(model, rhs)
            assert abs(sol.x_c[0] - g1[best[0]]) <= 2e-3
            assert abs(sol.x_c[1] - g2[best[1]]) <= 2e-3

    def test_monotone_right_hand_side(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            model = random_multi_model(rng, n)
            lo = rng.uniform(0.0, 0.8, size=n)
            hi = lo + rng.uniform(0.0, 0.4, size=n)
            assert (solve_fluid_multi(model, hi).objective
                    >= solve_fluid_multi(model, lo).objective - 1e-12)

    def test_region_consistency_under_raising_unconstrained(self):
        rng = np.random.default_rng(14)
        done = 0
        while done < 30:
            n = int(rng.integers(2, 5))
            model = random_multi_model(rng, n)
            rhs = rng.uniform(0.05, 1.0, size=n)
            sol = solve_fluid_multi(model, rhs)
            I = sol.active_set
            U = [k for k in range(n) if k not in I]
            if not U or sol.degenerate:
                continue
            margins = np.array([rhs[k] - sol.x_c[k] for k in U])
            if margins.min() < 1e-3 or (I and min(sol.lam[k] for k in I) < 1e-3):
                continue
            rhs2 = rhs.copy()
            for k in U:
                rhs2[k] += rng.uniform(0.0, 1.0)
            sol2 = solve_fluid_multi(model, rhs2)
            assert sol2.active_set == I
            done += 1


class TestPartialOptimum:
    def test_full_index_set(self, multi_model):
        po = partial_optimum(multi_model, [0, 1], [0.2, 0.3])
        assert po.value == pytest.approx(multi_model.revenue([0.2, 0.3]))
        np.testing.assert_allclose(po.hess, multi_model.H)
        np.testing.assert_allclose(po.grad, multi_model.revenue_grad([0.2, 0.3]))

    def test_empty_index_set(self, multi_model):
        po = partial_optimum(multi_model, [], [])
        x_u = multi_model.unconstrained_optimum()
        assert po.value == pytest.approx(multi_model.revenue(x_u))
        assert po.grad.shape == (0,)
        assert po.hess.shape == (0, 0)

    def test_schur_complement_value(self, multi_model):
        po = partial_optimum(multi_model, [0], [0.2])
        # H_II - H_IU H_UU^{-1} H_UI = -2 - 0.25 / (-2)
        assert po.hess[0, 0] == pytest.approx(-1.875)
        assert po.full_solution[1] == pytest.approx((1 - 0.5 * 0.2) / 2.0)
        assert po.grad[0] == pytest.approx(
            float(multi_model.revenue_grad(po.full_solution)[0]))

    def test_infeasible_z_rejected(self, multi_model):
        with pytest.raises(DomainError):
            partial_optimum(multi_model, [0], [1.5])

    def test_envelope_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(15)
        h = 1e-4
        for _ in range(20):
            n = int(rng.integers(2, 6))
            model = random_multi_model(rng, n)
            k = int(rng.integers(1, n))
            I = sorted(rng.choice(n, size=k, replace=False).tolist())
            z = rng.uniform(0.2, 0.8, size=k)
            po = partial_optimum(model, I, z)
            for j in range(k):
                zp, zm = z.copy(), z.copy()
                zp[j] += h
                zm[j] -= h
                fd = (partial_optimum(model, I, zp).value
                      - partial_optimum(model, I, zm).value) / (2 * h)
                denom = max(1.0, abs(po.grad[j]))
                assert abs(fd - po.grad[j]) / denom < 1e-5

    def test_schur_hessian_matches_finite_differences_and_curvature(self):
        rng = np.random.default_rng(16)
        h = 1e-4
        for _ in range(20):
            n = int(rng.integers(2, 6))
            model = random_multi_model(rng, n)
            m_prime = validate_multi(model).m_prime
            k = int(rng.integers(1, n))
            I = sorted(rng.choice(n, size=k, replace=False).tolist())
            z = rng.uniform(0.2, 0.8, size=k)
            po = partial_optimum(model, I, z)
            for j in range(k):
                zp, zm = z.copy(), z.copy()
                zp[j] += h
                zm[j] -= h
                fd_col = (partial_optimum(model, I, zp).grad
                          - partial_optimum(model, I, zm).grad) / (2 * h)
                denom = np.maximum(1.0, np.abs(po.hess[:, j]))
                assert np.max(np.abs(fd_col - po.hess[:, j]) / denom) < 1e-4
            eigs = np.linalg.eigvalsh(po.hess)
            assert eigs.max() <= -m_prime * (1 - 1e-6)

    def test_solution_map_is_lipschitz(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            model = random_multi_model(rng, n)
            k = int(rng.integers(1, n))
            I = sorted(rng.choice(n, size=k, replace=False).tolist())
            z1 = rng.uniform(0.25, 0.75, size=k)
            z2 = z1 + rng.uniform(-0.05, 0.05, size=k)
            z2 = np.clip(z2, 0.0, 1.0)
            p1 = partial_optimum(model, I, z1)
            p2 = partial_optimum(model, I, z2)
            lhs = np.linalg.norm(p1.full_solution - p2.full_solution)
            rhs = p1.lipschitz_z * np.linalg.norm(z1 - z2)
            assert lhs <= rhs * (1 + 1e-6) + 1e-12


class TestActivePartition:
    def test_interior_empty(self, multi_model):
        I, U = active_partition(multi_model, np.array([10.0, 10.0]))
        assert I == [] and U == [0, 1]

    def test_zero_all_constrained(self, multi_model):
        I, U = active_partition(multi_model, np.zeros(2))
        assert I == [0, 1] and U == []

    def test_single_constrained(self):
        model = MultiDemandModel(g=[1.0, 1.0], H=[[-2.0, 0.0], [0.0, -2.0]], box_hi=[1.0, 1.0])
        I, U = active_partition(model, np.array([0.2, 10.0]))
        assert I == [0] and U == [1]


def test_box_qp2_batch_matches_general_solver():
    rng = np.random.default_rng(18)
    for _ in range(200):
        model = random_multi_model(rng, 2)
        rhs = rng.uniform(0.0, 1.2, size=2)
        ub = np.minimum(model.box_hi, rhs)
        x1, x2, _ = box_qp2_batch(model.H[0, 0], model.H[1, 1], model.H[0, 1],
                                  model.g[0], model.g[1], ub[0], ub[1])
        sol = solve_fluid_multi(model, rhs)
        np.testing.assert_allclose([float(x1), float(x2)], sol.x_c, atol=1e-9)
