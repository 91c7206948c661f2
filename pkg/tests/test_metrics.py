import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smdp import (
    CoinsParams,
    LearningSchedule,
    TrainConfig,
    aggregate_series,
    batch_metrics,
    build_coins_env,
    monte_carlo_curves,
)
from smdp.metrics import (
    MetricsSeries,
    read_metrics_csv,
    read_rewards_csv,
    write_metrics_csv,
    write_rewards_csv,
)
from smdp.qlearn import StartRule

from helpers import all_stay_env


class TestBatchMetrics:
    def test_worked_example(self):
        series = batch_metrics([1.0, 2.0, 3.0, 4.0], 2)
        assert series.avg.tolist() == [1.5, 3.5]
        assert series.min.tolist() == [1.0, 3.0]
        assert series.max.tolist() == [2.0, 4.0]

    def test_constant_rewards_collapse(self):
        series = batch_metrics([2.5] * 10, 5)
        assert (series.avg == 2.5).all()
        assert (series.min == 2.5).all()
        assert (series.max == 2.5).all()

    def test_trailing_partial_batch_dropped(self):
        series = batch_metrics(np.arange(101.0), 50)
        assert len(series) == 2
        assert series.max.tolist() == [49.0, 99.0]

    def test_empty_input_gives_empty_series(self):
        series = batch_metrics([], 50)
        assert len(series) == 0

    def test_batch_size_validated(self):
        with pytest.raises(ValueError):
            batch_metrics([1.0], 0)

    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=60),
        st.integers(1, 10),
    )
    @settings(max_examples=150)
    def test_avg_between_min_and_max(self, rewards, b):
        series = batch_metrics(rewards, b)
        assert len(series) == len(rewards) // b
        assert (series.min <= series.avg + 1e-12).all()
        assert (series.avg <= series.max + 1e-12).all()
        # independent slice oracle
        for k in range(len(series)):
            chunk = rewards[k * b:(k + 1) * b]
            assert series.min[k] == min(chunk)
            assert series.max[k] == max(chunk)


class TestAggregation:
    def test_identical_replications_have_zero_ci(self):
        s = batch_metrics([1.0, 2.0, 3.0, 4.0], 2)
        agg = aggregate_series([s, MetricsSeries(2, s.avg.copy(), s.min.copy(), s.max.copy())])
        assert (agg.avg_ci95 == 0.0).all()
        assert (agg.min_ci95 == 0.0).all()
        assert (agg.max_ci95 == 0.0).all()

    def test_single_replication_has_no_ci(self):
        agg = aggregate_series([batch_metrics([1.0, 2.0], 1)])
        assert agg.avg_ci95 is None and agg.min_ci95 is None and agg.max_ci95 is None
        assert agg.replications == 1

    def test_ci_formula(self):
        a = MetricsSeries(1, np.array([0.0]), np.array([0.0]), np.array([0.0]))
        b = MetricsSeries(1, np.array([1.0]), np.array([1.0]), np.array([1.0]))
        agg = aggregate_series([a, b])
        expected = 1.96 * np.std([0.0, 1.0], ddof=1) / np.sqrt(2)
        assert agg.avg_ci95[0] == pytest.approx(expected, abs=1e-15)
        assert agg.avg_mean[0] == 0.5

    def test_mismatched_batch_counts_rejected(self):
        with pytest.raises(ValueError, match="batch count"):
            aggregate_series([batch_metrics([1.0, 2.0], 1), batch_metrics([1.0], 1)])


class TestMonteCarloCurves:
    def test_deterministic_env_has_exactly_zero_ci(self):
        env = all_stay_env(4, rewards=[[1.0], [-1.0]], terminal=[[0.0], [0.0]])
        cfg = TrainConfig(
            episodes=40, schedule=LearningSchedule.constant(0.3),
            start_state=StartRule.fixed(0), seed=3,
        )
        agg = monte_carlo_curves(env, cfg, replications=5, batch_size=10)
        assert (agg.avg_ci95 == 0.0).all()
        assert (agg.avg_mean == 4.0).all()

    def test_replications_use_distinct_seeds(self, coins_small):
        cfg = TrainConfig(
            episodes=60, schedule=LearningSchedule.constant(0.3),
            epsilon=0.1, seed=12,
        )
        agg = monte_carlo_curves(coins_small, cfg, replications=4, batch_size=20)
        assert agg.replications == 4
        assert (agg.avg_ci95 > 0.0).any()

    def test_learning_curves_trend_upward(self):
        # aggregated first-to-last batch improvement holds in >= 9 of 10
        # independent meta-repetitions
        env = build_coins_env(CoinsParams(p=(0.2, 0.8), t_cheat=3, r_cheat=-10.0, horizon=6))
        wins = 0
        for meta in range(10):
            cfg = TrainConfig(
                episodes=600, schedule=LearningSchedule.constant(0.3),
                epsilon=0.1, seed=1000 + meta,
            )
            agg = monte_carlo_curves(env, cfg, replications=10, batch_size=50)
            if agg.avg_mean[-1] >= agg.avg_mean[0]:
                wins += 1
        assert wins >= 9


class TestCsvRoundTrips:
    def test_rewards_round_trip_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        rewards = rng.normal(size=37) * 17.3
        p1 = tmp_path / "r1.csv"
        p2 = tmp_path / "r2.csv"
        write_rewards_csv(p1, rewards, meta={"seed": 5, "tool_version": "x"})
        values, meta = read_rewards_csv(p1)
        assert np.array_equal(values, rewards)
        write_rewards_csv(p2, values, meta=meta)
        assert p1.read_bytes() == p2.read_bytes()

    def test_metrics_round_trip_bytes(self, tmp_path, coins_small):
        cfg = TrainConfig(
            episodes=80, schedule=LearningSchedule.constant(0.3), epsilon=0.2, seed=4,
        )
        agg = monte_carlo_curves(coins_small, cfg, replications=3, batch_size=20)
        p1 = tmp_path / "m1.csv"
        p2 = tmp_path / "m2.csv"
        meta = {"batch_size": 20, "replications": 3}
        write_metrics_csv(p1, agg, meta=meta)
        parsed, meta2 = read_metrics_csv(p1)
        assert np.array_equal(parsed.avg_mean, agg.avg_mean)
        assert np.array_equal(parsed.avg_ci95, agg.avg_ci95)
        write_metrics_csv(p2, parsed, meta=meta2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_metrics_without_ci_round_trip(self, tmp_path):
        agg = aggregate_series([batch_metrics([1.0, 2.0, 3.0], 1)])
        path = tmp_path / "m.csv"
        write_metrics_csv(path, agg)
        parsed, _ = read_metrics_csv(path)
        assert parsed.avg_ci95 is None
        assert parsed.avg_mean.tolist() == [1.0, 2.0, 3.0]

    def test_malformed_rows_report_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("episode,total_reward\n0,1.5\n1,oops\n")
        with pytest.raises(ValueError, match="line 3"):
            read_rewards_csv(path)

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n0,1\n")
        with pytest.raises(ValueError, match="header"):
            read_rewards_csv(path)
