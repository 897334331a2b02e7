import numpy as np
import pytest

from koopman_wncs.nn import Adam, Mlp, adam_update, mlp_backward, mlp_forward


def finite_diff(f, arrays, h=1e-6):
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat, gflat = arr.ravel(), g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


class TestForward:
    def test_identity_linear_layer(self):
        net = Mlp((3, 3))
        net.set_params([np.eye(3), np.zeros(3)])
        x = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(net.forward(x), x)

    def test_zero_weights_give_bias(self):
        net = Mlp((4, 8, 3))
        params = net.params()
        for p in params[::2]:
            p[:] = 0.0
        net.biases[-1][:] = [1.0, 2.0, 3.0]
        assert np.array_equal(net.forward(np.ones(4)), [1.0, 2.0, 3.0])

    def test_random_net_vs_loop_oracle(self):
        rng = np.random.default_rng(0)
        net = Mlp((4, 8, 3), rng)
        x = rng.standard_normal(4)
        # independent forward: explicit loops
        a = x.copy()
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            z = np.array([sum(a[k] * w[k, j] for k in range(w.shape[0])) + b[j]
                          for j in range(w.shape[1])])
            a = np.maximum(z, 0.0) if i < len(net.weights) - 1 else z
        assert net.forward(x) == pytest.approx(a, abs=1e-12)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(1)
        net = Mlp((4, 6, 2), rng)
        X = rng.standard_normal((5, 4))
        Y = net.forward(X)
        for i in range(5):
            # GEMM kernels differ between batch shapes; agreement to rounding
            assert Y[i] == pytest.approx(net.forward(X[i]), rel=1e-12, abs=1e-14)

    def test_dim_mismatch(self):
        net = Mlp((4, 2))
        with pytest.raises(ValueError):
            net.forward(np.zeros(3))


class TestBackward:
    def test_linear_net_input_grad(self):
        rng = np.random.default_rng(2)
        net = Mlp((3, 2))
        net.set_params([rng.standard_normal((3, 2)), np.zeros(2)])
        x = rng.standard_normal(3)
        _, cache = mlp_forward(net, x)
        gy = rng.standard_normal(2)
        _, gx = mlp_backward(net, cache, gy)
        assert gx == pytest.approx(net.weights[0] @ gy, abs=1e-14)

    def test_gradients_vs_central_differences(self):
        rng = np.random.default_rng(3)
        net = Mlp((4, 8, 8, 2), rng)
        x = rng.standard_normal((6, 4))
        target = rng.standard_normal((6, 2))

        def loss():
            return float(np.sum((net.forward(x) - target) ** 2))

        y, cache = net.forward_cached(x)
        grads, _ = net.backward(cache, 2.0 * (y - target))
        num = finite_diff(loss, net.params())
        for g, n in zip(grads, num):
            denom = np.maximum(1e-8, np.maximum(np.abs(g), np.abs(n)))
            assert (np.abs(g - n) / denom).max() < 1e-4

    def test_zero_output_grad(self):
        rng = np.random.default_rng(4)
        net = Mlp((3, 5, 2), rng)
        _, cache = net.forward_cached(rng.standard_normal(3))
        grads, gx = net.backward(cache, np.zeros(2))
        assert all(np.all(g == 0) for g in grads)
        assert np.all(gx == 0)

    def test_stale_cache_rejected(self):
        rng = np.random.default_rng(5)
        a = Mlp((3, 2), rng)
        b = Mlp((3, 2), rng)
        _, cache = a.forward_cached(np.zeros(3))
        with pytest.raises(ValueError):
            b.backward(cache, np.zeros(2))

    def test_relu_subgradient_zero_at_zero(self):
        net = Mlp((1, 1, 1))
        net.set_params([np.array([[1.0]]), np.array([0.0]),
                        np.array([[1.0]]), np.array([0.0])])
        _, cache = net.forward_cached(np.array([0.0]))
        grads, gx = net.backward(cache, np.array([1.0]))
        assert gx[0] == 0.0


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = [np.ones((2, 2)), np.ones(3)]
        opt = Adam(lr=0.1)
        adam_update(p, [np.zeros((2, 2)), np.zeros(3)], opt)
        assert opt.step_count == 1
        assert np.array_equal(p[0], np.ones((2, 2)))
        assert np.array_equal(p[1], np.ones(3))

    def test_first_step_magnitude_near_lr(self):
        p = [np.zeros(4)]
        opt = Adam(lr=1e-3)
        opt.update(p, [np.full(4, 7.0)])
        assert np.abs(p[0]) == pytest.approx(np.full(4, 1e-3), rel=1e-6)

    def test_quadratic_convergence(self):
        rng = np.random.default_rng(6)
        w = [rng.standard_normal(10)]
        opt = Adam(lr=0.05)
        norms = [np.linalg.norm(w[0])]
        for _ in range(200):
            opt.update(w, [2.0 * w[0]])
            norms.append(np.linalg.norm(w[0]))
        assert all(a > b for a, b in zip(norms[:-1], norms[1:]))

    def test_param_list_shape_guard(self):
        opt = Adam()
        opt.update([np.zeros(2)], [np.ones(2)])
        with pytest.raises(ValueError):
            opt.update([np.zeros(2), np.zeros(3)], [np.ones(2), np.ones(3)])


class TestInitDeterminism:
    def test_same_seed_same_init(self):
        a = Mlp((4, 8, 2), np.random.default_rng(42))
        b = Mlp((4, 8, 2), np.random.default_rng(42))
        for pa, pb in zip(a.params(), b.params()):
            assert np.array_equal(pa, pb)
