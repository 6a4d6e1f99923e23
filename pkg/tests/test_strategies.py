"""
Tests for bidding strategies, spread climatology and the day-by-day backtest.
"""

from datetime import date

import numpy as np
import pandas as pd
import pytest

from heftreplay import (
    BiddingStrategy,
    CompetitionWindow,
    ConfigError,
    InsufficientDataError,
    InvalidInputError,
    NotFittedError,
    QuantileForecast,
    SpreadEstimate,
    StrategyConfig,
    TeamSeries,
    create_strategy,
    generate_bids,
)
from heftreplay.market import settle_revenue_array
from heftreplay.strategies import (
    ExpectedOptimalStrategy,
    LearnedBidStrategy,
    LinearBidRegressor,
    MedianBidStrategy,
    bid_expected_optimal,
    bid_learned,
    bid_median,
    build_optimal_bid_dataset,
    climatological_spread,
    external_spread,
    information_cutoff,
    slot_climatology,
    submission_deadline,
)

from .conftest import WINDOW_START, perfect_frame, synthetic_market, team_frame, window_actuals

LADDER = tuple(float(v) for v in range(100, 1000, 100))
UTC_WINDOW = CompetitionWindow(start=date(2024, 1, 1), end=date(2024, 1, 14), timezone="UTC")


def _flat(value: float) -> QuantileForecast:
    return QuantileForecast(None, (value,) * 9)


def _spread(value: float) -> SpreadEstimate:
    return SpreadEstimate(period=None, mean_spread=value)


class TestSimpleBidders:
    """Test the median and expected-optimal bidders."""

    def test_median_examples(self):
        """Test median bids and clipping."""
        assert bid_median(_flat(500.0)) == 500.0
        assert bid_median(_flat(2000.0)) == 1800.0
        assert bid_median(QuantileForecast(None, (-5, -4, -3, -2, -1, 0, 1, 2, 3))) == 0.0

    def test_expected_optimal_examples(self):
        """Test the shift away from expected production."""
        forecast = QuantileForecast(None, LADDER)
        assert bid_expected_optimal(forecast, _spread(14.0)) == pytest.approx(400.0)
        assert bid_expected_optimal(forecast, _spread(-28.0)) == pytest.approx(700.0)
        assert bid_expected_optimal(forecast, _spread(0.0)) == pytest.approx(500.0)

    def test_expected_optimal_clipped(self):
        """Test bids stay within the configured bounds."""
        strategy = ExpectedOptimalStrategy(StrategyConfig(kind="expected_optimal", bid_cap=600.0))
        assert strategy.bid(QuantileForecast(None, LADDER), _spread(-280.0)) == 600.0
        assert strategy.bid(QuantileForecast(None, LADDER), _spread(280.0)) == 0.0

    def test_expected_optimal_needs_spread(self):
        """Test a missing spread is an error."""
        with pytest.raises(InvalidInputError):
            ExpectedOptimalStrategy().bid(QuantileForecast(None, LADDER))

    def test_median_mean_method(self):
        """Test the median stand-in for expected production."""
        skewed = QuantileForecast(None, (100, 200, 300, 400, 500, 600, 700, 800, 1900))
        strategy = ExpectedOptimalStrategy(StrategyConfig(kind="expected_optimal", mean_method="median"))
        assert strategy.bid(skewed, _spread(0.0)) == 500.0
        assert ExpectedOptimalStrategy().bid(skewed, _spread(0.0)) > 500.0

    def test_factory(self):
        """Test strategies are created by kind and satisfy the protocol."""
        for kind, cls in (("median", MedianBidStrategy), ("expected_optimal", ExpectedOptimalStrategy),
                          ("learned", LearnedBidStrategy)):
            strategy = create_strategy(StrategyConfig(kind=kind, name=f"my_{kind}"))
            assert isinstance(strategy, cls)
            assert isinstance(strategy, BiddingStrategy)
            assert strategy.name == f"my_{kind}"
        with pytest.raises(ConfigError):
            StrategyConfig(kind="oracle")


class TestDeadlines:
    """Test the information calendar."""

    def test_deadline(self):
        """Test bids for D are due 09:20 UTC on D-1."""
        assert submission_deadline(date(2024, 2, 20)) == pd.Timestamp("2024-02-19 09:20", tz="UTC")

    def test_lagged_cutoff(self):
        """Test the publication lag moves the cutoff back."""
        assert information_cutoff(date(2024, 2, 20), 7) == pd.Timestamp("2024-02-12 09:20", tz="UTC")


class TestSpreadClimatology:
    """Test slot-mean spread estimates."""

    @staticmethod
    def _history(spread_by_slot, days: int = 30) -> pd.DataFrame:
        periods = pd.date_range("2024-01-01", periods=48 * days, freq="30min", tz="UTC")
        slots = np.asarray(periods.hour * 2 + periods.minute // 30)
        spread = np.array([spread_by_slot(s) for s in slots], dtype=float)
        return pd.DataFrame({"da_price": 50.0, "ss_price": 50.0 + spread}, index=periods)

    def test_constant(self):
        """Test a constant spread is recovered."""
        history = self._history(lambda s: 3.0)
        estimate = climatological_spread(history, pd.Timestamp("2024-01-31 12:00", tz="UTC"))
        assert estimate.mean_spread == pytest.approx(3.0)
        assert estimate.source == "climatology"

    def test_slots_separated(self):
        """Test slots do not bleed into each other."""
        history = self._history(lambda s: {0: 10.0, 1: -10.0}.get(s, 0.0))
        assert climatological_spread(history, pd.Timestamp("2024-01-31 00:00", tz="UTC")).mean_spread == 10.0
        assert climatological_spread(history, pd.Timestamp("2024-01-31 00:30", tz="UTC")).mean_spread == -10.0
        assert climatological_spread(history, pd.Timestamp("2024-01-31 01:00", tz="UTC")).mean_spread == 0.0

    def test_against_loop_oracle(self):
        """Test slot means against an explicit loop over the trailing window."""
        rng = np.random.default_rng(5)
        periods = pd.date_range("2024-01-01", periods=48 * 40, freq="30min", tz="UTC")
        spread = rng.normal(0, 10, len(periods))
        history = pd.DataFrame({"da_price": 40.0, "ss_price": 40.0 + spread}, index=periods)
        cutoff = pd.Timestamp("2024-02-05 09:20", tz="UTC")
        table = slot_climatology(history, cutoff, window_days=28, min_obs=7)
        for slot in (0, 17, 47):
            values = [s for p, s in zip(periods, spread)
                      if p.hour * 2 + p.minute // 30 == slot
                      and p + pd.Timedelta(minutes=30) <= cutoff
                      and p >= cutoff - pd.Timedelta(days=28)]
            assert table.loc[slot] == pytest.approx(np.mean(values))

    def test_insufficient_history(self):
        """Test a short history raises."""
        history = self._history(lambda s: 1.0, days=3)
        with pytest.raises(InsufficientDataError):
            climatological_spread(history, pd.Timestamp("2024-01-04 12:00", tz="UTC"), min_obs=7)

    def test_future_invisible(self):
        """Test periods after the target do not enter its estimate."""
        history = self._history(lambda s: 1.0)
        target = pd.Timestamp("2024-01-20 12:00", tz="UTC")
        history.loc[history.index >= target, "ss_price"] += 1000.0
        assert climatological_spread(history, target).mean_spread == pytest.approx(1.0)

    def test_external(self):
        """Test externally supplied spreads."""
        period = pd.Timestamp("2024-01-01 00:00", tz="UTC")
        spreads = pd.Series([4.0], index=[period])
        assert external_spread(spreads, period).mean_spread == 4.0
        with pytest.raises(InsufficientDataError):
            external_spread(spreads, period + pd.Timedelta(minutes=30))


class TestLearnedBidder:
    """Test the optimal-bid dataset and the regression bidder."""

    @staticmethod
    def _inputs(n: int = 200, seed: int = 0):
        rng = np.random.default_rng(seed)
        periods = pd.date_range("2024-01-01", periods=n, freq="30min", tz="UTC")
        production = pd.Series(rng.uniform(100, 900, n), index=periods)
        da = rng.uniform(30, 90, n)
        spread = rng.normal(0, 10, n)
        prices = pd.DataFrame({"da_price": da, "ss_price": da + spread}, index=periods)
        forecasts = pd.DataFrame({"q50": production.to_numpy()}, index=periods)
        return forecasts, prices, production, pd.Series(spread, index=periods)

    def test_dataset_target(self):
        """Test the target is the realised optimal bid."""
        period = pd.Timestamp("2024-01-01", tz="UTC")
        prices = pd.DataFrame({"da_price": [50.0], "ss_price": [64.0]}, index=[period])
        dataset = build_optimal_bid_dataset(pd.DataFrame({"q50": [100.0]}, index=[period]), prices,
                                            pd.Series([100.0], index=[period]),
                                            spread_clim=pd.Series([0.0], index=[period]))
        assert dataset.target.iloc[0] == pytest.approx(0.0)

    def test_dataset_drops_incomplete(self):
        """Test rows missing an input are dropped and counted."""
        forecasts, prices, production, spread = self._inputs(50)
        production = production.drop(production.index[3])
        dataset = build_optimal_bid_dataset(forecasts, prices, production, spread_clim=spread)
        assert len(dataset) == 49
        assert dataset.dropped == 1

    def test_regressor_recovers_linear_rule(self):
        """Test x_opt = q50 - spread / 2k is learned exactly with perfect features."""
        forecasts, prices, production, spread = self._inputs()
        dataset = build_optimal_bid_dataset(forecasts, prices, production, spread_clim=spread)
        regressor = LinearBidRegressor().fit(dataset.features(("q50", "spread_clim")), dataset.target)
        assert regressor.coef_[0] == pytest.approx(1.0, abs=1e-6)
        assert regressor.coef_[1] == pytest.approx(-1.0 / 0.14, abs=1e-6)
        assert regressor.intercept_ == pytest.approx(0.0, abs=1e-4)

    def test_zero_spread_target_is_production(self):
        """Test a zero-spread market learns the identity."""
        forecasts, prices, production, _ = self._inputs()
        prices["ss_price"] = prices["da_price"]
        dataset = build_optimal_bid_dataset(forecasts, prices, production,
                                            spread_clim=pd.Series(0.0, index=production.index))
        assert np.allclose(dataset.target.to_numpy(), production.to_numpy())
        regressor = LinearBidRegressor().fit(dataset.features(("q50",)), dataset.target)
        assert regressor.coef_[0] == pytest.approx(1.0)

    def test_unfitted(self):
        """Test predicting before fitting fails."""
        with pytest.raises(NotFittedError):
            LinearBidRegressor().predict([[1.0, 2.0]])

    def test_learned_bid_clipped(self):
        """Test learned bids respect the bounds."""
        regressor = LinearBidRegressor()
        regressor.intercept_, regressor.coef_ = 0.0, np.array([10.0])
        assert bid_learned(regressor, [500.0]) == 1800.0
        assert bid_learned(regressor, [-1.0]) == 0.0

    def test_feature_vector(self):
        """Test features come from the forecast, the period and the spread."""
        strategy = LearnedBidStrategy(StrategyConfig(kind="learned"))
        period = pd.Timestamp("2024-01-01 13:30", tz="UTC")
        vector = strategy.feature_vector(QuantileForecast(period, LADDER), SpreadEstimate(period, 5.0))
        assert list(vector) == [500.0, 27.0, 5.0]
        with pytest.raises(InvalidInputError):
            strategy.feature_vector(QuantileForecast(period, LADDER))


class TestGenerateBids:
    """Test the day-by-day backtest."""

    def test_median_bids_bounded(self, alpha, market):
        """Test median backtest bids equal the clipped forecast median."""
        _, prices = market
        result = generate_bids(MedianBidStrategy(), alpha, prices, window=UTC_WINDOW)
        assert len(result.bids) == 14 * 48
        assert np.allclose(result.bids.to_numpy(), alpha.median.clip(0, 1800).to_numpy())
        assert result.fallback_periods == 0

    def test_expected_optimal_bounded(self, alpha, market):
        """Test every bid lies within the bid bounds."""
        production, prices = market
        config = StrategyConfig(kind="expected_optimal", bid_cap=800.0)
        result = generate_bids(ExpectedOptimalStrategy(config), alpha, prices, production["total_mwh"], UTC_WINDOW)
        assert (result.bids >= 0.0).all() and (result.bids <= 800.0).all()

    def test_learned_falls_back_without_history(self, alpha, market):
        """Test too little training data gives median bids for the day."""
        production, prices = market
        config = StrategyConfig(kind="learned", min_training_rows=10_000)
        result = generate_bids(LearnedBidStrategy(config), alpha, prices, production["total_mwh"], UTC_WINDOW)
        assert result.fallback_days == 14
        assert np.allclose(result.bids.to_numpy(), alpha.median.clip(0, 1800).to_numpy())

    def test_dominance_with_known_spread(self, market):
        """Test expected-optimal beats median bidding when the spread is known."""
        production, prices = market
        actuals = window_actuals(production)
        rng = np.random.default_rng(9)
        # symmetric quantiles centred on the truth, so E[y] equals production
        offsets = np.linspace(-80.0, 80.0, 9)
        frame = pd.DataFrame(actuals.to_numpy()[:, None] + offsets[None, :] * rng.uniform(0.5, 1.5, (len(actuals), 1)),
                             index=actuals.index, columns=[f"q{i}0" for i in range(1, 10)])
        frame["bid"] = frame["q50"]
        team = TeamSeries(name="symmetric", frame=frame)
        spreads = prices["ss_price"] - prices["da_price"]

        config = StrategyConfig(kind="expected_optimal", spread_source="external")
        optimal = generate_bids(ExpectedOptimalStrategy(config), team, prices, window=UTC_WINDOW,
                                external_spreads=spreads).bids
        median = generate_bids(MedianBidStrategy(), team, prices, window=UTC_WINDOW).bids

        p = prices.loc[actuals.index]
        y = actuals.to_numpy()
        opt_rev = settle_revenue_array(optimal.to_numpy(), y, p["da_price"].to_numpy(), p["ss_price"].to_numpy())
        med_rev = settle_revenue_array(median.to_numpy(), y, p["da_price"].to_numpy(), p["ss_price"].to_numpy())
        assert np.all(opt_rev >= med_rev - 1e-9 * np.abs(med_rev))
        assert opt_rev.sum() > med_rev.sum()

    def test_no_lookahead(self):
        """Test bids up to day D do not change when data after D's deadline is perturbed."""
        production, prices = synthetic_market(seed=21)
        actuals = production["total_mwh"]
        history_start = WINDOW_START - pd.Timedelta(days=14)
        forecast_periods = actuals[actuals.index >= history_start]
        team = TeamSeries(name="src", frame=team_frame(forecast_periods, 25.0, seed=5))

        configs = [
            StrategyConfig(kind="expected_optimal", price_lag_days=1, climatology_window_days=7,
                           min_climatology_obs=3),
            StrategyConfig(kind="learned", price_lag_days=1, production_lag_days=1, climatology_window_days=7,
                           min_climatology_obs=3, min_training_rows=48),
        ]
        target_day = date(2024, 1, 6)
        deadline = submission_deadline(target_day)
        rng = np.random.default_rng(99)

        perturbed_prices = prices.copy()
        late = perturbed_prices.index >= deadline
        perturbed_prices.loc[late, "ss_price"] += rng.normal(0, 500, int(late.sum()))
        perturbed_actuals = actuals.copy()
        perturbed_actuals[actuals.index >= deadline] *= 3.0
        next_day = pd.Timestamp("2024-01-07", tz="UTC")
        perturbed_frame = team.frame.copy()
        perturbed_frame.loc[perturbed_frame.index >= next_day, "q50"] += 400.0
        perturbed_team = TeamSeries(name="src", frame=perturbed_frame)

        for config in configs:
            before = generate_bids(create_strategy(config), team, prices, actuals, UTC_WINDOW).bids
            after = generate_bids(create_strategy(config), perturbed_team, perturbed_prices,
                                  perturbed_actuals, UTC_WINDOW).bids
            visible = before.index < next_day
            assert np.array_equal(before[visible].to_numpy(), after[visible].to_numpy())
            assert not np.array_equal(before[~visible].to_numpy(), after[~visible].to_numpy())

    def test_perfect_forecast_median_is_production(self, market):
        """Test median bids on a perfect forecast equal production."""
        production, prices = market
        actuals = window_actuals(production)
        team = TeamSeries(name="perfect", frame=perfect_frame(actuals))
        bids = generate_bids(MedianBidStrategy(), team, prices, window=UTC_WINDOW).bids
        assert np.allclose(bids.to_numpy(), actuals.to_numpy())

    def test_learned_trains_on_external_spreads(self, market):
        """Test a learned bidder using external spreads is trained on the same spreads it bids with."""
        production, prices = market
        actuals = production["total_mwh"]
        team = TeamSeries(name="perfect", frame=perfect_frame(actuals))
        spreads = prices["ss_price"] - prices["da_price"]
        config = StrategyConfig(kind="learned", spread_source="external", price_lag_days=1,
                                production_lag_days=1, min_training_rows=48)
        result = generate_bids(LearnedBidStrategy(config), team, prices, actuals, UTC_WINDOW,
                               external_spreads=spreads)
        assert result.fallback_periods == 0
        # x_opt is linear in (q50, spread), so exact features reproduce it
        in_window = result.bids.index
        expected = np.clip(actuals[in_window] - spreads[in_window] / (2 * config.k), 0.0, 1800.0)
        np.testing.assert_allclose(result.bids.to_numpy(), expected.to_numpy(), atol=1e-6)

    def test_learned_external_without_spreads(self, market):
        """Test a learned bidder configured for external spreads fails without them."""
        production, prices = market
        actuals = production["total_mwh"]
        team = TeamSeries(name="perfect", frame=perfect_frame(actuals))
        config = StrategyConfig(kind="learned", spread_source="external", min_training_rows=48)
        with pytest.raises(InsufficientDataError):
            generate_bids(LearnedBidStrategy(config), team, prices, actuals, UTC_WINDOW)
