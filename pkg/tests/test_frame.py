import datetime as dt

import numpy as np
import pytest

from causalcast import (
    DataError,
    TimeSeriesFrame,
    VariableMeta,
    aggregate_to_monthly,
    denormalize,
    impute_linear,
    load_csv,
    make_windows,
    normalize,
    save_csv,
    split_by_date,
)


def daily_frame(values, mask=None, names=None, start=dt.date(2020, 1, 1)):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1 and values.shape[1] > 1 and names is None:
        values = values.T
    n, v = values.shape
    names = names or [f"x{i}" for i in range(v)]
    ts = tuple(start + dt.timedelta(days=i) for i in range(n))
    return TimeSeriesFrame(ts, "daily", tuple(VariableMeta(nm) for nm in names), values, mask)


class TestLoadCsv:
    def test_parses_values_and_missing_mask(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,SIE\n2020-01-01,10.0\n2020-01-02,\n2020-01-03,12.0\n")
        frame = load_csv(p)
        assert frame.n_rows == 3 and frame.n_vars == 1
        assert frame.mask[:, 0].tolist() == [False, True, False]
        assert frame.values[0, 0] == 10.0 and frame.values[2, 0] == 12.0
        assert frame.cadence == "daily"

    def test_value_outside_valid_range_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,SIE\n2020-01-01,20.0\n")
        schema = [VariableMeta("SIE", "Million", (3.34, 16.63))]
        with pytest.raises(DataError) as err:
            load_csv(p, schema=schema)
        msg = str(err.value)
        assert "SIE" in msg and "20.0" in msg and "row 0" in msg

    def test_decreasing_dates_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,SIE\n2020-01-02,1.0\n2020-01-01,2.0\n")
        with pytest.raises(DataError, match="increasing"):
            load_csv(p)

    def test_duplicate_timestamp_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,SIE\n2020-01-01,1.0\n2020-01-01,2.0\n")
        with pytest.raises(DataError, match="duplicate"):
            load_csv(p)

    def test_malformed_date_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,SIE\n01/02/2020,1.0\n")
        with pytest.raises(DataError, match="malformed date"):
            load_csv(p)

    def test_schema_mismatch_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,SIE,Extra\n2020-01-01,1.0,2.0\n")
        with pytest.raises(DataError, match="schema"):
            load_csv(p, schema=[VariableMeta("SIE")])

    def test_garbage_cell_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("date,SIE\n2020-01-01,oops\n")
        with pytest.raises(DataError, match="oops"):
            load_csv(p)

    def test_round_trip_through_save(self, tmp_path):
        frame = daily_frame([1.25, np.nan, 3.5], mask=np.array([[False], [True], [False]]))
        p = tmp_path / "out.csv"
        save_csv(frame, p)
        back = load_csv(p)
        assert back.mask.tolist() == frame.mask.tolist()
        assert back.values[0, 0] == 1.25 and back.values[2, 0] == 3.5
        save_csv(back, tmp_path / "out2.csv")
        assert (tmp_path / "out.csv").read_bytes() == (tmp_path / "out2.csv").read_bytes()


class TestImputeLinear:
    def test_midpoint(self):
        frame = daily_frame([1.0, 0.0, 3.0], mask=np.array([[False], [True], [False]]))
        out = impute_linear(frame)
        assert out.values[:, 0].tolist() == [1.0, 2.0, 3.0]
        assert not out.mask.any()

    def test_edge_fill(self):
        frame = daily_frame([0.0, 5.0, 5.0], mask=np.array([[True], [False], [False]]))
        out = impute_linear(frame)
        assert out.values[:, 0].tolist() == [5.0, 5.0, 5.0]

    def test_two_step_interpolation(self):
        mask = np.array([[False], [True], [True], [False]])
        frame = daily_frame([0.0, 0.0, 0.0, 3.0], mask=mask)
        out = impute_linear(frame)
        assert out.values[:, 0].tolist() == [0.0, 1.0, 2.0, 3.0]

    def test_idempotent_and_preserves_observed(self):
        rng = np.random.default_rng(3)
        values = rng.standard_normal((40, 3))
        mask = rng.random((40, 3)) < 0.3
        mask[0] = False  # keep at least one observation per column
        frame = daily_frame(values, mask=mask)
        once = impute_linear(frame)
        twice = impute_linear(once)
        assert np.array_equal(once.values, twice.values)
        assert np.array_equal(once.values[~mask], values[~mask])

    def test_all_missing_column_rejected(self):
        frame = daily_frame([0.0, 0.0], mask=np.ones((2, 1), dtype=bool))
        with pytest.raises(DataError, match="entirely missing"):
            impute_linear(frame)


class TestNormalize:
    def test_z_score_with_population_std(self):
        frame = daily_frame([1.0, 2.0, 3.0])
        out, params = normalize(frame)
        sigma = np.sqrt(2.0 / 3.0)  # population std of [1,2,3]
        assert params.mean[0] == 2.0
        assert abs(params.std[0] - sigma) < 1e-15
        expected = (np.array([1.0, 2.0, 3.0]) - 2.0) / sigma
        assert np.allclose(out.values[:, 0], expected, atol=1e-15)
        assert round(float(out.values[0, 0]), 4) == -1.2247

    def test_renormalizing_with_own_params_is_identity_on_stats(self):
        frame = daily_frame(np.random.default_rng(0).standard_normal(50))
        normed, params = normalize(frame)
        again, _ = normalize(frame, params)
        assert np.array_equal(normed.values, again.values)

    def test_constant_column_rejected(self):
        frame = daily_frame([5.0, 5.0, 5.0])
        with pytest.raises(DataError, match="zero standard deviation"):
            normalize(frame)

    def test_round_trip_denormalize(self):
        rng = np.random.default_rng(11)
        frame = daily_frame(rng.standard_normal((60, 4)) * 7.0 + 3.0)
        normed, params = normalize(frame)
        back = denormalize(normed, params)
        assert np.max(np.abs(back.values - frame.values)) < 1e-12
        assert back.variables == frame.variables

    def test_params_from_train_apply_to_test(self):
        rng = np.random.default_rng(2)
        frame = daily_frame(rng.standard_normal(30) + 10.0)
        _, params = normalize(frame)
        other = daily_frame(rng.standard_normal(5) + 10.0, start=dt.date(2021, 1, 1))
        out, _ = normalize(other, params)
        assert np.allclose(out.values, (other.values - params.mean) / params.std)

    def test_requires_imputed_frame(self):
        frame = daily_frame([1.0, 2.0], mask=np.array([[True], [False]]))
        with pytest.raises(DataError, match="imputed"):
            normalize(frame)


class TestAggregateToMonthly:
    def test_constant_month_mean(self):
        frame = daily_frame([4.0] * 31, start=dt.date(2020, 1, 1))
        out = aggregate_to_monthly(frame)
        assert out.n_rows == 1
        assert out.values[0, 0] == 4.0
        assert out.cadence == "monthly"
        assert out.timestamps[0] == dt.date(2020, 1, 1)

    def test_mean_of_1_to_31(self):
        frame = daily_frame(list(range(1, 32)), start=dt.date(2020, 1, 1))
        out = aggregate_to_monthly(frame)
        assert out.values[0, 0] == 16.0

    def test_fully_missing_month_names_month_and_variable(self):
        values = np.ones((60, 2))
        mask = np.zeros((60, 2), dtype=bool)
        mask[:31, 1] = True  # January fully missing for x1
        frame = daily_frame(values, mask=mask, start=dt.date(2020, 1, 1))
        with pytest.raises(DataError) as err:
            aggregate_to_monthly(frame)
        assert "2020-01" in str(err.value) and "x1" in str(err.value)

    def test_skips_missing_days_in_mean(self):
        values = np.arange(1.0, 32.0).reshape(-1, 1)
        mask = np.zeros((31, 1), dtype=bool)
        mask[10:] = True  # only days 1..10 observed
        frame = daily_frame(values, mask=mask)
        out = aggregate_to_monthly(frame)
        assert out.values[0, 0] == np.mean(np.arange(1.0, 11.0))

    def test_monthly_input_rejected(self):
        ts = (dt.date(2020, 1, 1), dt.date(2020, 2, 1))
        frame = TimeSeriesFrame(ts, "monthly", (VariableMeta("x"),), np.ones((2, 1)))
        with pytest.raises(DataError, match="daily"):
            aggregate_to_monthly(frame)


class TestSplitByDate:
    def make_monthly(self, n, start=dt.date(2000, 1, 1)):
        ts = []
        y, m = start.year, start.month
        for _ in range(n):
            ts.append(dt.date(y, m, 1))
            y, m = (y + 1, 1) if m == 12 else (y, m + 1)
        values = np.arange(n, dtype=float).reshape(-1, 1)
        return TimeSeriesFrame(tuple(ts), "monthly", (VariableMeta("x"),), values)

    def test_counting_oracle_100_rows(self):
        frame = self.make_monthly(100)
        train_end = frame.timestamps[79]  # row 80 inclusive
        train, val, test = split_by_date(frame, train_end, 0.10)
        assert train.n_rows == 72
        assert val.n_rows == 8
        assert test.n_rows == 20
        # exact ordered partition
        combined = list(train.values[:, 0]) + list(val.values[:, 0]) + list(test.values[:, 0])
        assert combined == list(frame.values[:, 0])

    def test_zero_val_fraction(self):
        frame = self.make_monthly(100)
        train, val, test = split_by_date(frame, frame.timestamps[79], 0.0)
        assert val is None
        assert train.n_rows == 80 and test.n_rows == 20

    def test_train_end_before_first_row(self):
        frame = self.make_monthly(10)
        with pytest.raises(DataError, match="empty train"):
            split_by_date(frame, dt.date(1990, 1, 1), 0.1)

    def test_train_end_after_last_row(self):
        frame = self.make_monthly(10)
        with pytest.raises(DataError, match="empty test"):
            split_by_date(frame, dt.date(2030, 1, 1), 0.1)

    def test_partition_property_random_sizes(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(3, 60))
            frame = self.make_monthly(n)
            cut = int(rng.integers(1, n))
            vf = float(rng.uniform(0.0, 0.9))
            train, val, test = split_by_date(frame, frame.timestamps[cut - 1], vf)
            n_val = val.n_rows if val is not None else 0
            assert train.n_rows + n_val + test.n_rows == n
            assert train.n_rows >= 1 and test.n_rows == n - cut


class TestMakeWindows:
    def test_sample_count(self):
        frame = daily_frame(np.arange(24.0))
        w = make_windows(frame, ["x0"], "x0", lookback=21, horizon=1)
        assert w.n_samples == 3

    def test_insufficient_rows(self):
        frame = daily_frame(np.arange(22.0))
        with pytest.raises(DataError, match="insufficient"):
            make_windows(frame, ["x0"], "x0", lookback=21, horizon=2)

    def test_index_arithmetic(self):
        frame = daily_frame(np.arange(1.0, 31.0))
        w = make_windows(frame, ["x0"], "x0", lookback=2, horizon=1)
        assert w.inputs[0, :, 0].tolist() == [1.0, 2.0]
        assert w.targets[0] == 3.0
        # last sample s = 27: rows [27, 29) as input, row 29 as target
        assert w.inputs[-1, :, 0].tolist() == [28.0, 29.0]
        assert w.targets[-1] == 30.0

    def test_unknown_names(self):
        frame = daily_frame(np.arange(30.0))
        with pytest.raises(DataError, match="unknown variable"):
            make_windows(frame, ["nope"], "x0", 2, 1)
        with pytest.raises(DataError, match="unknown variable"):
            make_windows(frame, ["x0"], "nope", 2, 1)

    def test_count_formula_property(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            lookback = int(rng.integers(1, 12))
            horizon = int(rng.integers(1, 8))
            n = lookback + horizon + int(rng.integers(0, 20))
            frame = daily_frame(rng.standard_normal(n))
            w = make_windows(frame, ["x0"], "x0", lookback, horizon)
            assert w.n_samples == n - lookback - horizon + 1

    def test_feature_subset_and_target_column(self):
        rng = np.random.default_rng(9)
        frame = daily_frame(rng.standard_normal((30, 3)), names=["a", "b", "c"])
        w = make_windows(frame, ["c", "a"], "b", lookback=3, horizon=2)
        assert w.n_features == 2
        s = 4
        assert np.array_equal(w.inputs[s], frame.values[s:s + 3][:, [2, 0]])
        assert w.targets[s] == frame.values[s + 3 + 2 - 1, 1]
