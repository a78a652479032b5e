import math

import numpy as np
import pytest

from causalcast.errors import NumericalError
from causalcast.nn import (
    adam_step,
    forward,
    gru_step,
    init_adam,
    init_forecast_model,
    load_checkpoint,
    lstm_step,
    parameter_count_formula,
    predict,
    save_checkpoint,
)
from causalcast.nn.network import _dropout_mask, forward_batch
from causalcast.nn.params import GruParams, LstmParams


def zero_gru(in_dim, units):
    z = lambda *s: np.zeros(s)
    return GruParams(z(in_dim, units), z(in_dim, units), z(in_dim, units),
                     z(units, units), z(units, units), z(units, units),
                     z(units), z(units), z(units))


def zero_lstm(in_dim, units):
    z = lambda *s: np.zeros(s)
    return LstmParams(z(in_dim, units), z(in_dim, units), z(in_dim, units), z(in_dim, units),
                      z(units, units), z(units, units), z(units, units), z(units, units),
                      z(units), z(units), z(units), z(units))


class TestGruStep:
    def test_zero_params_halve_state(self):
        params = zero_gru(3, 2)
        h = gru_step(params, np.zeros(3), np.array([1.0, -2.0]))
        assert np.allclose(h, [0.5, -1.0])

    def test_zero_state_fixed_point(self):
        params = zero_gru(3, 2)
        h = gru_step(params, np.array([0.3, -1.0, 2.0]), np.zeros(2))
        assert np.allclose(h, 0.0)

    def test_saturated_update_gate_hand_value(self):
        # bias drives z to 1 exactly in float64; candidate is tanh(w*x)
        params = zero_gru(1, 1)
        params.bz = np.array([40.0])
        params.wh = np.array([[1.0]])
        h = gru_step(params, np.array([0.5]), np.array([3.0]))
        assert abs(h[0] - math.tanh(0.5)) < 1e-15
        assert round(float(h[0]), 4) == 0.4621

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            gru_step(zero_gru(3, 2), np.zeros(2), np.zeros(2))

    def test_state_stays_bounded(self):
        rng = np.random.default_rng(0)
        for trial in range(5):
            params = GruParams(*[rng.standard_normal(s)
                                 for s in [(3, 4)] * 3 + [(4, 4)] * 3 + [(4,)] * 3])
            h = np.zeros(4)
            for _ in range(50):
                h = gru_step(params, rng.standard_normal(3), h)
                assert np.all(np.abs(h) <= 1.0)


class TestLstmStep:
    def test_zero_params_hand_value(self):
        params = zero_lstm(2, 1)
        h, c = lstm_step(params, np.zeros(2), np.zeros(1), np.array([2.0]))
        assert abs(c[0] - 1.0) < 1e-15
        assert abs(h[0] - 0.5 * math.tanh(1.0)) < 1e-15
        assert round(float(h[0]), 4) == 0.3808

    def test_zero_everything_fixed_point(self):
        params = zero_lstm(2, 3)
        h, c = lstm_step(params, np.ones(2), np.zeros(3), np.zeros(3))
        assert np.allclose(h, 0.0) and np.allclose(c, 0.0)

    def test_forget_bias_hand_value(self):
        params = zero_lstm(1, 1)
        params.bf = np.array([1.0])
        h, c = lstm_step(params, np.zeros(1), np.zeros(1), np.array([2.0]))
        f = 1.0 / (1.0 + math.exp(-1.0))
        assert abs(f - 0.7310585786300049) < 1e-15
        assert abs(c[0] - 2.0 * f) < 1e-15

    def test_output_bounded(self):
        rng = np.random.default_rng(1)
        params = LstmParams(*[rng.standard_normal(s)
                              for s in [(2, 3)] * 4 + [(3, 3)] * 4 + [(3,)] * 4])
        h, c = np.zeros(3), np.zeros(3)
        for _ in range(50):
            h, c = lstm_step(params, rng.standard_normal(2), h, c)
            assert np.all(np.abs(h) < 1.0)


class TestAdam:
    def test_first_step_magnitude_closed_form(self):
        params = {"w": np.array([1.0])}
        grads = {"w": np.array([0.5])}
        state = init_adam(params, lr=1e-3)
        new, state = adam_step(state, params, grads)
        # bias correction makes the first step -lr * g / (|g| + eps)
        expected = -1e-3 * 0.5 / (0.5 + 1e-8)
        assert abs((new["w"][0] - 1.0) - expected) < 1e-15
        assert state.t == 1

    def test_zero_gradient_no_change(self):
        params = {"w": np.arange(4.0)}
        state = init_adam(params)
        for _ in range(3):
            new, state = adam_step(state, params, {"w": np.zeros(4)})
            assert np.array_equal(new["w"], params["w"])
            params = new

    def test_first_step_scale_invariance(self):
        params = {"a": np.array([0.0]), "b": np.array([0.0])}
        grads = {"a": np.array([0.01]), "b": np.array([10.0])}
        state = init_adam(params, lr=1e-3)
        new, _ = adam_step(state, params, grads)
        assert abs(abs(new["a"][0]) - abs(new["b"][0])) < 1e-9

    def test_nonfinite_gradient_rejected(self):
        params = {"w": np.array([1.0])}
        state = init_adam(params)
        with pytest.raises(NumericalError, match="non-finite gradient"):
            adam_step(state, params, {"w": np.array([np.nan])})


class TestDropout:
    def test_eval_mode_is_identity(self):
        model = init_forecast_model(2, 4, 5, 6, dropout=0.5, lookback=3, seed=0)
        window = np.random.default_rng(0).standard_normal((3, 2))
        p1, _ = forward(model, window, train=False)
        p2, _ = forward(model, window, train=False)
        assert p1 == p2

    def test_inverted_mask_preserves_mean(self):
        rng = np.random.default_rng(2024)
        rate = 0.2
        total = 0.0
        n_masks = 100_000
        sums = _dropout_mask(rng, (n_masks, 10), rate).mean(axis=1)
        assert abs(sums.mean() - 1.0) < 0.01

    def test_mask_values_are_zero_or_scaled(self):
        rng = np.random.default_rng(7)
        mask = _dropout_mask(rng, (1000,), 0.2)
        assert set(np.unique(mask)) == {0.0, 1.0 / 0.8}


class TestForwardBasics:
    def zero_model(self, features=2, lookback=3):
        model = init_forecast_model(features, 4, 5, 6, dropout=0.0, lookback=lookback, seed=0)
        for arr in model.param_dict().values():
            arr[...] = 0.0
        return model

    def test_zero_network_predicts_zero(self):
        model = self.zero_model()
        window = np.random.default_rng(1).standard_normal((3, 2))
        pred, _ = forward(model, window)
        assert pred == 0.0

    def test_eval_determinism_bitwise(self):
        model = init_forecast_model(3, 8, 9, 4, dropout=0.2, lookback=5, seed=3)
        windows = np.random.default_rng(5).standard_normal((7, 5, 3))
        assert np.array_equal(predict(model, windows), predict(model, windows))

    def test_window_shape_checked(self):
        model = init_forecast_model(3, 4, 4, 4, lookback=5, seed=0)
        with pytest.raises(ValueError, match="window shape"):
            forward_batch(model, np.zeros((2, 4, 3)))

    def test_hand_oracle_scalar_chain(self):
        """Straight-line scalar recomputation of the full stack, L=3, V=2."""
        model = init_forecast_model(2, 2, 2, 2, dropout=0.0, lookback=3, seed=11)
        window = np.array([[0.5, -1.0], [1.5, 0.25], [-0.75, 2.0]])
        got, _ = forward(model, window)

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        g, m = model.gru, model.lstm
        h = [0.0, 0.0]
        gru_out = []
        for t in range(3):
            x = window[t]
            new_h = [0.0, 0.0]
            for j in range(2):
                az = x[0] * g.wz[0][j] + x[1] * g.wz[1][j] + h[0] * g.uz[0][j] + h[1] * g.uz[1][j] + g.bz[j]
                ar = x[0] * g.wr[0][j] + x[1] * g.wr[1][j] + h[0] * g.ur[0][j] + h[1] * g.ur[1][j] + g.br[j]
                z, r = sig(az), sig(ar)
                rh = [sig(x[0] * g.wr[0][k] + x[1] * g.wr[1][k] + h[0] * g.ur[0][k] + h[1] * g.ur[1][k] + g.br[k]) * h[k] for k in range(2)]
                ac = x[0] * g.wh[0][j] + x[1] * g.wh[1][j] + rh[0] * g.uh[0][j] + rh[1] * g.uh[1][j] + g.bh[j]
                cand = math.tanh(ac)
                new_h[j] = (1 - z) * h[j] + z * cand
            h = new_h
            gru_out.append(list(h))
        hl = [0.0, 0.0]
        cl = [0.0, 0.0]
        for t in range(3):
            x = gru_out[t]
            f = [sig(x[0] * m.wf[0][j] + x[1] * m.wf[1][j] + hl[0] * m.uf[0][j] + hl[1] * m.uf[1][j] + m.bf[j]) for j in range(2)]
            i = [sig(x[0] * m.wi[0][j] + x[1] * m.wi[1][j] + hl[0] * m.ui[0][j] + hl[1] * m.ui[1][j] + m.bi[j]) for j in range(2)]
            o = [sig(x[0] * m.wo[0][j] + x[1] * m.wo[1][j] + hl[0] * m.uo[0][j] + hl[1] * m.uo[1][j] + m.bo[j]) for j in range(2)]
            gg = [math.tanh(x[0] * m.wg[0][j] + x[1] * m.wg[1][j] + hl[0] * m.ug[0][j] + hl[1] * m.ug[1][j] + m.bg[j]) for j in range(2)]
            cl = [f[j] * cl[j] + i[j] * gg[j] for j in range(2)]
            hl = [o[j] * math.tanh(cl[j]) for j in range(2)]
        dense = [max(0.0, hl[0] * model.dense_w[0][j] + hl[1] * model.dense_w[1][j] + model.dense_b[j]) for j in range(2)]
        expected = dense[0] * model.out_w[0] + dense[1] * model.out_w[1] + model.out_b[0]
        assert abs(got - expected) < 1e-12

    def test_nonfinite_activation_reported(self):
        model = self.zero_model()
        model.out_b[0] = np.inf
        window = np.zeros((3, 2))
        with pytest.raises(NumericalError, match="non-finite"):
            forward(model, window)


class TestParameterCount:
    def test_formula_matches_actual_count(self):
        for v in (1, 3, 10):
            model = init_forecast_model(v)
            assert model.parameter_count() == parameter_count_formula(v)

    def test_fewer_features_fewer_parameters(self):
        assert parameter_count_formula(3) < parameter_count_formula(10)

    def test_formula_terms(self):
        # V -> 64 -> 128 -> 64 -> 1 chain, single bias per gate
        v = 10
        expected = (3 * (64 * v + 64 * 64 + 64)
                    + 4 * (128 * 64 + 128 * 128 + 128)
                    + (64 * 128 + 64) + (64 + 1))
        assert parameter_count_formula(v) == expected


class TestCheckpoints:
    def test_round_trip_bit_identical_predictions(self, tmp_path):
        model = init_forecast_model(3, 6, 7, 5, dropout=0.1, lookback=4, seed=9)
        windows = np.random.default_rng(10).standard_normal((5, 4, 3))
        before = predict(model, windows)
        save_checkpoint(model, tmp_path / "m.json", {"horizon": 2, "features": ["a", "b", "c"]})
        loaded, meta = load_checkpoint(tmp_path / "m.json")
        assert meta["horizon"] == 2
        after = predict(loaded, windows)
        assert np.array_equal(before, after)

    def test_deterministic_bytes(self, tmp_path):
        model = init_forecast_model(2, 4, 4, 4, seed=1)
        save_checkpoint(model, tmp_path / "a.json", {"k": 1})
        save_checkpoint(model, tmp_path / "b.json", {"k": 1})
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
