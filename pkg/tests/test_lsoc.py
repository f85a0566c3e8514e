"""First-exit domains, rollout batches, desirability and control estimates."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safe_lsoc.hjb import GridSpec, grid_hjb_oracle
from safe_lsoc.lsoc import (
    BallBoundary,
    BoxBoundary,
    DesirabilityUnderflow,
    LsocProblem,
    PiConfig,
    PiPolicy,
    RolloutBatch,
    UnionDomain,
    estimate_desirability,
    estimate_log_desirability,
    estimate_optimal_control,
    rollout_batch,
)
from safe_lsoc.sde import ControlAffineDynamics, NoiseStream, validate_lambda_condition


def line_problem(sigma: float = 0.5, q: float = 1.0, lam: float = 1.0) -> LsocProblem:
    dyn = ControlAffineDynamics(
        state_dim=1,
        input_dim=1,
        drift=lambda x: np.zeros_like(np.atleast_2d(x)),
        control_matrix=lambda x: np.array([[1.0]]),
        noise_cov=np.array([[sigma]]),
    )
    return LsocProblem(
        dynamics=dyn,
        running_cost=lambda x: np.full(np.atleast_2d(x).shape[0], q),
        final_cost=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
        domain=BoxBoundary((0,), np.array([-1.0]), np.array([1.0])),
        lam=lam,
    )


def synthetic_batch(path_costs, dw0=None, dt=0.01, sigma=0.6) -> RolloutBatch:
    """Batch with prescribed costs; enough structure for the estimators."""
    s = np.asarray(path_costs, dtype=float)
    k = s.shape[0]
    if dw0 is None:
        dw0 = np.random.default_rng(0).normal(0.0, np.sqrt(dt), size=(k, 1))
    return RolloutBatch(
        x0=np.zeros(1),
        dt=dt,
        horizon=10,
        noise_cov=np.array([[sigma]]),
        dw0=np.asarray(dw0, dtype=float),
        exit_states=np.zeros((k, 1)),
        exit_steps=np.full(k, 10),
        running_costs=s.copy(),
        path_costs=s,
    )


class TestDomains:
    def test_box_mask_and_clamp(self):
        box = BoxBoundary((0, 2), np.array([-1.0, 0.0]), np.array([1.0, 5.0]))
        inside = np.array([0.0, 99.0, 2.5])
        outside = np.array([1.5, 99.0, 2.5])
        assert not box.boundary_mask(inside)
        assert box.boundary_mask(outside)
        np.testing.assert_allclose(box.clamp_exit(outside), [1.0, 99.0, 2.5])

    def test_box_batch_mask(self):
        box = BoxBoundary((0,), np.array([-1.0]), np.array([1.0]))
        pts = np.array([[-2.0], [0.0], [1.0]])
        np.testing.assert_array_equal(box.boundary_mask(pts), [True, False, True])

    def test_box_extent_validation(self):
        with pytest.raises(ValueError):
            BoxBoundary((0,), np.array([1.0]), np.array([1.0]))

    def test_ball_mask(self):
        ball = BallBoundary((0, 1), np.array([2.0, 3.0]), 0.5)
        assert ball.boundary_mask(np.array([2.1, 3.0, 77.0]))
        assert not ball.boundary_mask(np.array([2.6, 3.0, 77.0]))

    def test_ball_radius_validation(self):
        with pytest.raises(ValueError):
            BallBoundary((0,), np.array([0.0]), 0.0)

    def test_union_clamp_claim_order(self):
        ball = BallBoundary((0,), np.array([2.0]), 0.5)
        box = BoxBoundary((0,), np.array([-1.0]), np.array([1.0]))
        x = np.array([2.0])
        # Ball fires first and has no clamp; reversed order clamps to the box.
        np.testing.assert_allclose(UnionDomain([ball, box]).clamp_exit(x), [2.0])
        np.testing.assert_allclose(UnionDomain([box, ball]).clamp_exit(x), [1.0])


class TestProblemSetup:
    def test_control_weight_derived_satisfies_lambda_condition(self):
        p = line_problem(sigma=0.4, lam=0.8)
        assert validate_lambda_condition(
            p.control_weight, p.dynamics.noise_cov, 0.8
        )

    def test_explicit_bad_weight_rejected(self):
        dyn = line_problem().dynamics
        with pytest.raises(ValueError):
            LsocProblem(
                dynamics=dyn,
                running_cost=lambda x: np.zeros(1),
                final_cost=lambda x: np.zeros(1),
                domain=BoxBoundary((0,), np.array([-1.0]), np.array([1.0])),
                lam=1.0,
                control_weight=np.array([[1.0]]),
            )

    def test_nonpositive_lambda_rejected(self):
        dyn = line_problem().dynamics
        with pytest.raises(ValueError):
            LsocProblem(
                dynamics=dyn,
                running_cost=lambda x: np.zeros(1),
                final_cost=lambda x: np.zeros(1),
                domain=BoxBoundary((0,), np.array([-1.0]), np.array([1.0])),
                lam=0.0,
            )


class TestRolloutBatch:
    def test_deterministic_given_stream(self):
        p = line_problem()
        a = rollout_batch(p, np.zeros(1), 0.02, 40, 64, NoiseStream(3, 5))
        b = rollout_batch(p, np.zeros(1), 0.02, 40, 64, NoiseStream(3, 5))
        np.testing.assert_array_equal(a.path_costs, b.path_costs)
        np.testing.assert_array_equal(a.dw0, b.dw0)
        np.testing.assert_array_equal(a.exit_states, b.exit_states)

    def test_costs_finite_and_shared_setup(self):
        p = line_problem()
        batch = rollout_batch(p, np.zeros(1), 0.02, 40, 64, NoiseStream(3))
        assert np.all(np.isfinite(batch.path_costs))
        assert batch.n_rollouts == 64
        assert batch.horizon == 40
        assert batch.dt == 0.02

    def test_start_on_boundary_rejected(self):
        p = line_problem()
        with pytest.raises(ValueError):
            rollout_batch(p, np.array([1.0]), 0.02, 10, 8, NoiseStream(0))

    def test_paths_frozen_after_exit(self):
        p = line_problem()
        batch = rollout_batch(
            p, np.array([0.9]), 0.02, 30, 32, NoiseStream(1), keep_paths=True
        )
        assert batch.paths.shape == (31, 32, 1)
        for k in range(32):
            stop = batch.exit_steps[k]
            frozen = batch.paths[stop:, k, 0]
            np.testing.assert_array_equal(frozen, np.full_like(frozen, frozen[0]))

    def test_exit_states_clamped_to_box(self):
        p = line_problem()
        batch = rollout_batch(p, np.array([0.95]), 0.05, 50, 64, NoiseStream(2))
        exited = batch.exit_steps < 50
        assert np.all(np.abs(batch.exit_states[exited, 0]) <= 1.0)

    @pytest.mark.parametrize("bad", [{"dt": 0.0}, {"horizon": 0}, {"n_rollouts": 0}])
    def test_argument_validation(self, bad):
        p = line_problem()
        args = {"dt": 0.01, "horizon": 5, "n_rollouts": 4}
        args.update(bad)
        with pytest.raises(ValueError):
            rollout_batch(
                p, np.zeros(1), args["dt"], args["horizon"], args["n_rollouts"],
                NoiseStream(0),
            )


class TestDesirability:
    @given(
        costs=st.lists(
            st.floats(0.0, 50.0, allow_nan=False), min_size=2, max_size=40
        ),
        lam=st.floats(0.1, 5.0),
    )
    @settings(max_examples=80)
    def test_mean_of_exponentials_is_bracketed(self, costs, lam):
        batch = synthetic_batch(costs)
        z = estimate_desirability(batch, lam)
        lo = np.exp(-max(costs) / lam)
        hi = np.exp(-min(costs) / lam)
        assert lo * (1 - 1e-12) <= z <= hi * (1 + 1e-12)
        assert z > 0

    @given(
        costs=st.lists(
            st.floats(0.0, 30.0, allow_nan=False), min_size=2, max_size=40
        ),
        shift=st.floats(-5.0, 5.0),
        lam=st.floats(0.2, 3.0),
    )
    @settings(max_examples=80)
    def test_cost_shift_scales_z_and_preserves_control(self, costs, shift, lam):
        base = synthetic_batch(costs)
        shifted = synthetic_batch(np.asarray(costs) + shift, dw0=base.dw0)
        z0 = estimate_desirability(base, lam)
        z1 = estimate_desirability(shifted, lam)
        np.testing.assert_allclose(z1, z0 * np.exp(-shift / lam), rtol=1e-9)
        u0 = estimate_optimal_control(base, lam).control
        u1 = estimate_optimal_control(shifted, lam).control
        np.testing.assert_allclose(u1, u0, rtol=1e-9, atol=1e-12)

    def test_log_estimate_agrees(self):
        batch = synthetic_batch([1.0, 2.0, 0.5, 4.0])
        z = estimate_desirability(batch, 0.7)
        np.testing.assert_allclose(
            estimate_log_desirability(batch, 0.7), np.log(z), rtol=1e-12
        )

    def test_underflow_raises(self):
        batch = synthetic_batch([1e6, 2e6])
        with pytest.raises(DesirabilityUnderflow):
            estimate_desirability(batch, 1.0)
        # The log-domain estimate survives the same batch.
        assert np.isfinite(estimate_log_desirability(batch, 1.0))

    def test_nonpositive_lambda_rejected(self):
        with pytest.raises(ValueError):
            estimate_desirability(synthetic_batch([1.0]), 0.0)


class TestControlEstimate:
    def test_hand_computed_two_rollouts(self):
        batch = synthetic_batch(
            [1.0, 1.0], dw0=np.array([[0.2], [-0.4]]), dt=0.1, sigma=0.5
        )
        est = estimate_optimal_control(batch, 2.0)
        np.testing.assert_allclose(est.control, [0.5 * (-0.1) / 0.1])
        np.testing.assert_allclose(est.effective_sample_size, 2.0)

    def test_ess_uniform_equals_k(self):
        batch = synthetic_batch(np.full(50, 3.0))
        est = estimate_optimal_control(batch, 1.0)
        np.testing.assert_allclose(est.effective_sample_size, 50.0, rtol=1e-12)
        assert not est.degenerate

    def test_ess_collapse_flags_degenerate(self):
        batch = synthetic_batch([0.0, 1000.0, 1000.0])
        est = estimate_optimal_control(batch, 1.0)
        np.testing.assert_allclose(est.effective_sample_size, 1.0, rtol=1e-9)
        assert est.degenerate

    def test_log_desirability_matches_standalone(self):
        batch = synthetic_batch([0.5, 1.5, 2.5])
        est = estimate_optimal_control(batch, 0.9)
        np.testing.assert_allclose(
            est.log_desirability, estimate_log_desirability(batch, 0.9), rtol=1e-12
        )


class TestPiPolicy:
    def test_same_stream_same_controls(self):
        p = line_problem()
        cfg = PiConfig(n_rollouts=32, horizon_steps=10)
        pol_a = PiPolicy(p, cfg, 0.05, NoiseStream(4), agent=0)
        pol_b = PiPolicy(p, cfg, 0.05, NoiseStream(4), agent=0)
        x = np.array([0.2])
        np.testing.assert_array_equal(pol_a(x, 0.35), pol_b(x, 0.35))
        assert pol_a.last_batch is not None
        assert pol_a.last_estimate is not None

    def test_distinct_agents_decorrelate(self):
        p = line_problem()
        cfg = PiConfig(n_rollouts=32, horizon_steps=10)
        u0 = PiPolicy(p, cfg, 0.05, NoiseStream(4), agent=0)(np.array([0.2]), 0.0)
        u1 = PiPolicy(p, cfg, 0.05, NoiseStream(4), agent=1)(np.array([0.2]), 0.0)
        assert np.max(np.abs(u0 - u1)) > 0

    def test_step_index_rounding(self):
        p = line_problem()
        pol = PiPolicy(p, PiConfig(8, 5), 0.05, NoiseStream(0))
        assert pol.step_index(0.35) == 7
        assert pol.step_index(0.3500000001) == 7


class TestGridOracle:
    def test_first_order_convergence_against_analytic(self):
        # Constant-coefficient problem with drift: the upwind solve should
        # halve its error when the mesh halves.
        g, sigma, q, lam = 0.3, 0.5, 0.6, 1.0
        phi_lo, phi_hi = 0.5, 0.1
        dyn = ControlAffineDynamics(
            state_dim=1,
            input_dim=1,
            drift=lambda x: np.full_like(np.atleast_2d(x), g),
            control_matrix=lambda x: np.array([[1.0]]),
            noise_cov=np.array([[sigma]]),
        )
        problem = LsocProblem(
            dynamics=dyn,
            running_cost=lambda x: np.full(np.atleast_2d(x).shape[0], q),
            final_cost=lambda x: np.where(
                np.atleast_2d(x)[..., 0] < 0.0, phi_lo, phi_hi
            ),
            domain=BoxBoundary((0,), np.array([-1.0]), np.array([1.0])),
            lam=lam,
        )

        # 0 = g Z' + sigma^2/2 Z'' - q/lam Z with Dirichlet data.
        half_var = 0.5 * sigma**2
        roots = np.roots([half_var, g, -q / lam])
        k1, k2 = roots
        za, zb = np.exp(-phi_lo / lam), np.exp(-phi_hi / lam)
        mat = np.array(
            [[np.exp(-k1), np.exp(-k2)], [np.exp(k1), np.exp(k2)]]
        )
        coef = np.linalg.solve(mat, np.array([za, zb]))

        def z_exact(x):
            return coef[0] * np.exp(k1 * x) + coef[1] * np.exp(k2 * x)

        errs = []
        for shape in (51, 101, 201):
            sol = grid_hjb_oracle(
                problem, GridSpec(lower=(-1.0,), upper=(1.0,), shape=(shape,))
            )
            nodes = np.linspace(-1.0, 1.0, shape)
            errs.append(float(np.max(np.abs(sol.z - z_exact(nodes)))))
        assert errs[0] > errs[1] > errs[2]
        for coarse, fine in zip(errs, errs[1:]):
            assert 1.4 <= coarse / fine <= 3.2

    def test_gradient_consistent_with_field(self):
        problem = line_problem(sigma=0.5, q=0.8, lam=1.0)
        sol = grid_hjb_oracle(
            problem, GridSpec(lower=(-1.0,), upper=(1.0,), shape=(401,))
        )
        x = np.array([0.3])
        h = 1e-4
        fd = (sol.z_at(x + h) - sol.z_at(x - h)) / (2 * h)
        np.testing.assert_allclose(sol.gradient_at(x), fd, rtol=1e-3)
