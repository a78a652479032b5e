"""Gradient correctness: finite differences, blocked paths, backend parity."""

import numpy as np
import pytest

from causalcast.nn import backward, forward, init_forecast_model
from causalcast.nn.kernels import BACKEND, numpy_impl
from causalcast.nn import kernels
from causalcast.nn.network import backward_batch, forward_batch


class ReplayRng:
    """Deterministic stand-in for a Generator: same masks on every call."""

    def __init__(self, seed):
        self._seed = seed
        self._count = 0

    def random(self, shape):
        rng = np.random.default_rng((self._seed, self._count))
        self._count += 1
        return rng.random(shape)

    def reset(self):
        self._count = 0


def finite_difference_check(seed, dropout=0.2, eps=1e-5, per_param=4):
    rng = np.random.default_rng(seed)
    model = init_forecast_model(n_features=3, gru_units=4, lstm_units=5, dense_units=6,
                                dropout=dropout, lookback=4, seed=seed + 1000)
    window = rng.standard_normal((4, 3))
    masks = ReplayRng(seed)

    def run():
        masks.reset()
        return forward(model, window, train=True, rng=masks)

    _, cache = run()
    grads = backward(model, cache, 1.0)
    worst = 0.0
    for name, arr in model.param_dict().items():
        flat = arr.ravel()
        g = grads[name].ravel()
        idx = rng.choice(flat.size, size=min(per_param, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            up = run()[0]
            flat[i] = orig - eps
            down = run()[0]
            flat[i] = orig
            fd = (up - down) / (2 * eps)
            rel = abs(fd - g[i]) / max(abs(fd), abs(g[i]), 1e-8)
            worst = max(worst, rel)
    return worst


class TestFiniteDifferences:
    def test_joint_stack_ten_seeds(self):
        for seed in range(10):
            assert finite_difference_check(seed) < 1e-4

    def test_eval_mode_without_dropout(self):
        assert finite_difference_check(99, dropout=0.0) < 1e-4


class TestBackwardStructure:
    def test_zero_upstream_gradient_gives_zero_grads(self):
        model = init_forecast_model(2, 3, 4, 5, dropout=0.0, lookback=3, seed=0)
        window = np.random.default_rng(1).standard_normal((3, 2))
        _, cache = forward(model, window, train=False)
        grads = backward(model, cache, 0.0)
        assert all(np.all(g == 0.0) for g in grads.values())

    def test_all_dropped_gru_output_blocks_gru_gradients(self):
        class AllDrop:
            def random(self, shape):
                return np.zeros(shape)  # below rate -> everything dropped

        model = init_forecast_model(2, 3, 4, 5, dropout=0.2, lookback=3, seed=2)
        window = np.random.default_rng(3).standard_normal((3, 2))
        _, cache = forward(model, window, train=True, rng=AllDrop())
        grads = backward(model, cache, 1.0)
        for name, g in grads.items():
            if name.startswith("gru."):
                assert np.all(g == 0.0), name

    def test_batch_gradients_sum_over_samples(self):
        model = init_forecast_model(2, 3, 4, 5, dropout=0.0, lookback=3, seed=4)
        batch = np.random.default_rng(5).standard_normal((3, 3, 2))
        _, cache = forward_batch(model, batch, train=False)
        joint = backward_batch(model, cache, np.array([1.0, 2.0, -0.5]))
        singles = {}
        for s, w in zip(range(3), [1.0, 2.0, -0.5]):
            _, c1 = forward(model, batch[s], train=False)
            g1 = backward(model, c1, w)
            for k, v in g1.items():
                singles[k] = singles.get(k, 0.0) + v
        for k in joint:
            assert np.allclose(joint[k], singles[k], rtol=1e-10, atol=1e-12), k


@pytest.mark.skipif(BACKEND != "cython", reason="compiled backend not built")
class TestBackendParity:
    def test_forward_and_backward_match_numpy(self):
        rng = np.random.default_rng(0)
        L, B, D, H = 6, 4, 3, 5
        x = rng.standard_normal((L, B, D))
        w3 = [rng.standard_normal((D, H)) * 0.4 for _ in range(3)]
        u3 = [rng.standard_normal((H, H)) * 0.4 for _ in range(3)]
        b3 = [rng.standard_normal(H) * 0.2 for _ in range(3)]
        f_cy = kernels.gru_forward(x, *w3, *u3, *b3)
        f_np = numpy_impl.gru_forward(x, *w3, *u3, *b3)
        for a, b in zip(f_cy, f_np):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
        dh = rng.standard_normal((L, B, H))
        g_cy = kernels.gru_backward(dh, x, *f_cy, *w3, *u3)
        g_np = numpy_impl.gru_backward(dh, x, *f_np, *w3, *u3)
        for a, b in zip(g_cy, g_np):
            assert np.allclose(a, b, rtol=1e-10, atol=1e-12)

        w4 = [rng.standard_normal((D, H)) * 0.4 for _ in range(4)]
        u4 = [rng.standard_normal((H, H)) * 0.4 for _ in range(4)]
        b4 = [rng.standard_normal(H) * 0.2 for _ in range(4)]
        l_cy = kernels.lstm_forward(x, *w4, *u4, *b4)
        l_np = numpy_impl.lstm_forward(x, *w4, *u4, *b4)
        for a, b in zip(l_cy, l_np):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
        lb_cy = kernels.lstm_backward(dh, x, *l_cy, *w4, *u4)
        lb_np = numpy_impl.lstm_backward(dh, x, *l_np, *w4, *u4)
        for a, b in zip(lb_cy, lb_np):
            assert np.allclose(a, b, rtol=1e-10, atol=1e-12)

    def test_numpy_fallback_passes_finite_differences(self, monkeypatch):
        # route the network through the numpy kernels and re-check gradients
        from causalcast.nn import network
        for name in ("gru_forward", "gru_backward", "lstm_forward", "lstm_backward"):
            monkeypatch.setattr(network.kernels, name, getattr(numpy_impl, name))
        try:
            assert finite_difference_check(7) < 1e-4
        finally:
            pass
