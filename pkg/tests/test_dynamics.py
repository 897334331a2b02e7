import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from koopman_wncs.dynamics import (CartPole, DoublePendulum, NoiseModel,
                                   PendulumParams, PlantDivergedError,
                                   cartpole_step, control_cost,
                                   double_pendulum_deriv, input_nonlinearity,
                                   plant_step)


def table1_params(h_kind="tanh"):
    return PendulumParams(h_kind=h_kind)


class TestInputNonlinearity:
    def test_odd_at_origin(self):
        assert input_nonlinearity(0.0, "tanh") == 0.0
        assert input_nonlinearity(0.0, "cubic") == 0.0

    def test_cubic_at_one(self):
        assert input_nonlinearity(1.0, "cubic") == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_tanh_at_two_vs_exp_oracle(self):
        # independent evaluation through exp instead of the tanh library call
        e4 = np.exp(4.0)
        assert input_nonlinearity(2.0, "tanh") == pytest.approx(
            (e4 - 1.0) / (e4 + 1.0), abs=1e-14)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            input_nonlinearity(1.0, "quintic")


class TestPendulumDeriv:
    def test_origin(self):
        d = double_pendulum_deriv([0, 0, 0, 0], [0, 0], table1_params())
        assert d == pytest.approx([0.0, 0.1, 0.0, -0.1], abs=1e-12)

    def test_first_pendulum_upright_quarter(self):
        d = double_pendulum_deriv([np.pi / 2, 0, 0, 0], [0, 0], table1_params())
        # (m1 g s / j1 - k s^2 / 4 j1) = 19.75 plus +0.1 coupling; second
        # pendulum sees the spring term 0.25 minus its -0.1 coupling
        assert d == pytest.approx([0.0, 19.85, 0.0, 0.15], abs=1e-12)

    @given(th1=st.floats(-10, 10), th2=st.floats(-10, 10),
           u1=st.floats(-5, 5), u2=st.floats(-5, 5))
    @settings(max_examples=50, deadline=None)
    def test_zero_velocity_rows(self, th1, th2, u1, u2):
        d = double_pendulum_deriv([th1, 0, th2, 0], [u1, u2], table1_params())
        assert d[0] == 0.0 and d[2] == 0.0

    @given(th1=st.floats(-6, 6), w1=st.floats(-3, 3), th2=st.floats(-6, 6),
           w2=st.floats(-3, 3), k1=st.integers(-3, 3), k2=st.integers(-3, 3))
    @settings(max_examples=50, deadline=None)
    def test_two_pi_periodic(self, th1, w1, th2, w2, k1, k2):
        p = table1_params()
        u = [0.7, -1.3]
        a = double_pendulum_deriv([th1, w1, th2, w2], u, p)
        b = double_pendulum_deriv([th1 + 2 * np.pi * k1, w1,
                                   th2 + 2 * np.pi * k2, w2], u, p)
        assert a == pytest.approx(b, abs=1e-9)

    def test_positive_params_enforced(self):
        with pytest.raises(ValueError):
            PendulumParams(m1=-1.0)


class TestPlantStep:
    def test_fixed_point_is_preserved(self):
        # solve sin terms so the drift cancels: 19.75 s1 + 0.25 s2 = -0.1,
        # 0.25 s1 + 20.25 s2 = 0.1, zero velocity, zero torque
        A = np.array([[19.75, 0.25], [0.25, 20.25]])
        s = np.linalg.solve(A, [-0.1, 0.1])
        x_eq = np.array([np.arcsin(s[0]), 0.0, np.arcsin(s[1]), 0.0])
        plant = DoublePendulum(table1_params())
        d = plant.deriv(x_eq, np.zeros(2))
        assert np.max(np.abs(d)) < 1e-12
        x_next = plant.step(x_eq, np.zeros(2))
        assert x_next == pytest.approx(x_eq, abs=1e-14)

    def test_rk4_vs_substepped_euler(self):
        # dt/100 substeps: at dt/10 the first-order oracle's own truncation
        # error (~8e-4 on this field) would swamp the 1e-4 tolerance
        plant = DoublePendulum(table1_params())
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            x = rng.uniform([-np.pi, -2, -np.pi, -2], [np.pi, 2, np.pi, 2])
            u = rng.uniform(-5, 5, 2)
            x_rk4 = plant.step(x, u)
            x_e = x.copy()
            for _ in range(100):
                x_e = x_e + (plant.dt / 100.0) * plant.deriv(x_e, u)
            worst = max(worst, np.max(np.abs(x_rk4 - x_e)))
        assert worst <= 1e-4

    def test_noise_free_is_deterministic(self):
        plant = DoublePendulum(table1_params())
        x = np.array([0.3, -0.2, 0.7, 0.1])
        u = np.array([1.0, -2.0])
        a = plant.step(x, u)
        b = plant.step(x, u)
        assert np.array_equal(a, b)

    def test_noise_is_additive_and_replayable(self):
        plant = DoublePendulum(table1_params())
        x = np.array([0.1, 0.0, -0.1, 0.0])
        u = np.zeros(2)
        clean = plant.step(x, u)
        noisy = [plant.step(x, u, NoiseModel(1e-4 * np.eye(4), seed=5))
                 for _ in range(3)]
        # same seed -> same draw; difference from the clean step is the draw
        assert np.array_equal(noisy[0], noisy[1])
        replay = NoiseModel(1e-4 * np.eye(4), seed=5)
        assert noisy[0] == pytest.approx(clean + replay.sample(), abs=1e-15)

    def test_noise_covariance_monte_carlo(self):
        sigma2 = 4e-4
        nm = NoiseModel(sigma2 * np.eye(4), seed=7)
        draws = np.array([nm.sample() for _ in range(100_000)])
        cov = draws.T @ draws / draws.shape[0]
        assert np.abs(np.diag(cov) - sigma2).max() < 0.05 * sigma2
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() < 0.05 * sigma2

    def test_divergence_error_carries_last_state(self):
        plant = DoublePendulum(table1_params())
        x = np.array([0.0, 1e308, 0.0, 0.0])
        with pytest.raises(PlantDivergedError) as exc:
            plant.step(x, np.zeros(2))
        assert np.array_equal(exc.value.last_state, x)

    def test_drift_only_trajectory_matches_fine_oracle(self):
        # from rest at the origin the motion is the constant +-0.1 coupling
        # drift; 10 RK4 steps against a dt/100 Euler oracle
        plant = DoublePendulum(table1_params())
        x = np.zeros(4)
        x_fine = np.zeros(4)
        for _ in range(10):
            x = plant.step(x, np.zeros(2))
            for _ in range(100):
                x_fine = x_fine + (plant.dt / 100.0) * plant.deriv(x_fine, np.zeros(2))
        assert x == pytest.approx(x_fine, abs=1e-4)
        # leading-order drift 0.05 t^2; the 19.75 sin(theta) feedback adds
        # the higher-order cosh growth, hence the looser band
        t_total = 10 * plant.dt
        assert x[0] == pytest.approx(0.5 * 0.1 * t_total**2, abs=2e-4)
        assert x[2] == pytest.approx(-0.5 * 0.1 * t_total**2, abs=2e-4)


class TestCartPole:
    def test_upright_equilibrium(self):
        assert np.array_equal(cartpole_step(np.zeros(4), np.zeros(1)), np.zeros(4))

    def test_positive_force_moves_cart_forward(self):
        x1 = cartpole_step(np.zeros(4), np.array([5.0]))
        x2 = cartpole_step(x1, np.array([5.0]))
        assert x2[1] > 0.0

    def test_against_rederived_equations(self):
        # classic gym equations written out independently
        g, mc, mp, half = 9.8, 1.0, 0.1, 0.5
        mt, pml, tau = mc + mp, mp * half, 0.02
        rng = np.random.default_rng(1)
        plant = CartPole()
        for _ in range(20):
            x = rng.uniform(-1, 1, 4)
            f = rng.uniform(-10, 10)
            st_, sd, th, td = x
            costh, sinth = np.cos(th), np.sin(th)
            temp = (f + pml * td**2 * sinth) / mt
            thacc = (g * sinth - costh * temp) / (half * (4.0 / 3.0 - mp * costh**2 / mt))
            xacc = temp - pml * thacc * costh / mt
            expected = x + tau * np.array([sd, xacc, td, thacc])
            got = plant.step(x, np.array([f]))
            assert got == pytest.approx(expected, abs=0)

    def test_plant_step_dispatch(self):
        plant = CartPole()
        x = np.array([0.1, 0.0, 0.05, 0.0])
        assert np.array_equal(plant_step(plant, x, np.array([1.0])),
                              plant.step(x, np.array([1.0])))


class TestControlCost:
    Q = np.diag([20.0, 0.01, 5.0, 0.01])
    B = 0.001 * np.eye(2)

    def test_zero_at_target(self):
        x0 = np.array([0.2, 0, 0, 0])
        assert control_cost(x0, np.zeros(2), self.Q, self.B, x0) == 0.0

    def test_table1_arithmetic(self):
        x0 = np.zeros(4)
        x = np.array([1.0, 0, 0, 0])
        u = np.array([1.0, 1.0])
        assert control_cost(x, u, self.Q, self.B, x0) == pytest.approx(20.002, abs=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_nonnegative_for_psd_weights(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((4, 4))
        Q = A @ A.T
        x = rng.standard_normal(4)
        u = rng.standard_normal(2)
        assert control_cost(x, u, Q, self.B, np.zeros(4)) >= 0.0

    def test_sign_flip_invariance_diagonal_B(self):
        x = np.array([0.5, 0.1, -0.3, 0.2])
        u = np.array([1.5, -2.5])
        a = control_cost(x, u, self.Q, self.B, np.zeros(4))
        b = control_cost(x, -u, self.Q, self.B, np.zeros(4))
        assert a == pytest.approx(b, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            control_cost(np.zeros(3), np.zeros(2), self.Q, self.B, np.zeros(3))


class TestNoiseModel:
    def test_requires_symmetric_psd(self):
        with pytest.raises(ValueError):
            NoiseModel(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            NoiseModel(np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_spawned_streams_differ(self):
        nm = NoiseModel(np.eye(2), seed=3)
        a = nm.spawn(0).sample()
        b = nm.spawn(1).sample()
        assert not np.array_equal(a, b)
