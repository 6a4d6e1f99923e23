"""
Tests for market settlement.
"""

import numpy as np
import pytest

from heftreplay import (
    InvalidCoefficientError,
    InvalidInputError,
    MarketImpactCoefficient,
    MarketPrices,
    TradePosition,
    effective_imbalance_price,
    max_revenue,
    optimal_bid,
    price_spread,
    settle_revenue,
)
from heftreplay.market import max_revenue_array, optimal_bid_array, settle_revenue_array


class TestSettlement:
    """Test single-period revenue."""

    def test_revenue_example(self):
        """Test the worked long-imbalance example."""
        prices = MarketPrices(period=None, da_price=50.0, ss_price=60.0)
        position = TradePosition(period=None, bid=90.0, production=100.0)
        assert effective_imbalance_price(prices, position) == pytest.approx(59.3)
        assert settle_revenue(prices, position, 0.07) == pytest.approx(5093.0)

    def test_zero_spread_identity(self):
        """Test revenue equals y * da at the optimum when prices coincide."""
        prices = MarketPrices(period=None, da_price=42.0, ss_price=42.0)
        assert optimal_bid(300.0, prices) == 300.0
        position = TradePosition(period=None, bid=300.0, production=300.0)
        assert settle_revenue(prices, position) == 300.0 * 42.0

    def test_negative_prices_allowed(self):
        """Test negative prices settle normally."""
        prices = MarketPrices(period=None, da_price=-10.0, ss_price=-20.0)
        assert price_spread(prices) == -10.0
        position = TradePosition(period=None, bid=0.0, production=10.0)
        assert settle_revenue(prices, position) == pytest.approx(10.0 * (-20.0 - 0.7))

    def test_invalid_k(self):
        """Test non-positive coefficients are rejected."""
        prices = MarketPrices(period=None, da_price=50.0, ss_price=60.0)
        position = TradePosition(period=None, bid=90.0, production=100.0)
        with pytest.raises(InvalidCoefficientError):
            settle_revenue(prices, position, 0.0)
        with pytest.raises(InvalidCoefficientError):
            MarketImpactCoefficient(-0.07)

    def test_invalid_inputs(self):
        """Test negative volumes and non-finite prices are rejected."""
        with pytest.raises(InvalidInputError):
            TradePosition(period=None, bid=-1.0, production=10.0)
        with pytest.raises(InvalidInputError):
            MarketPrices(period=None, da_price=float("nan"), ss_price=1.0)
        with pytest.raises(InvalidInputError):
            settle_revenue_array(np.array([1.0, np.inf]), 1.0, 1.0, 1.0)

    def test_bid_cap(self):
        """Test bids above the portfolio capacity are rejected and the cap itself is allowed."""
        assert TradePosition(period=None, bid=1800.0, production=10.0).imbalance == -1790.0
        with pytest.raises(InvalidInputError):
            TradePosition(period=None, bid=1800.5, production=10.0)
        with pytest.raises(InvalidInputError):
            TradePosition(period=None, bid=950.0, production=10.0, bid_cap=900.0)


class TestOptimalBid:
    """Test the closed-form optimum."""

    def test_short_spread_example(self):
        """Test a 14 GBP spread moves the optimal bid to zero."""
        prices = MarketPrices(period=None, da_price=50.0, ss_price=64.0)
        assert optimal_bid(100.0, prices, 0.07) == pytest.approx(0.0)
        assert max_revenue(100.0, prices, 0.07) == pytest.approx(5700.0)

    def test_optimum_beats_grid(self):
        """Test the closed form against a dense bid grid on random markets."""
        rng = np.random.default_rng(11)
        n = 10_000
        y = rng.uniform(0, 1800, n)
        da = rng.uniform(-50, 300, n)
        ss = da + rng.normal(0, 30, n)
        k = rng.uniform(0.01, 0.5, n)

        x_opt = optimal_bid_array(y, da, ss, k[0])
        best = max_revenue_array(y, da, ss, k[0])
        assert np.allclose(settle_revenue_array(x_opt, y, da, ss, k[0]), best, rtol=1e-9, atol=1e-6)

        for j in range(0, n, 500):
            prices = MarketPrices(period=None, da_price=da[j], ss_price=ss[j])
            xo = optimal_bid(y[j], prices, k[j])
            grid = xo + np.linspace(-100, 100, 51)
            revenues = settle_revenue_array(grid, y[j], da[j], ss[j], k[j])
            best_j = max_revenue(y[j], prices, k[j])
            assert revenues.max() <= best_j + 1e-9 * max(1.0, abs(best_j))
            assert np.argmax(revenues) == 25

    @pytest.mark.parametrize("k", [0.01, 0.07, 0.2, 0.5])
    def test_optimum_beats_grid_per_k(self, k):
        """Test no bid on a grid around the optimum earns more, 2500 random markets per k."""
        rng = np.random.default_rng(int(k * 1000))
        n = 2500
        y = rng.uniform(0, 1800, n)[:, None]
        da = rng.uniform(-50, 300, n)[:, None]
        ss = da + rng.normal(0, 30, (n, 1))
        x_opt = optimal_bid_array(y, da, ss, k)
        grid = x_opt + np.linspace(-50.0, 50.0, 41)[None, :]
        revenues = settle_revenue_array(grid, y, da, ss, k)
        best = max_revenue_array(y, da, ss, k)
        assert (revenues <= best + 1e-9 * np.maximum(1.0, np.abs(best))).all()
        assert (np.argmax(revenues, axis=1) == 20).all()
        # revenue falls by k * d^2 at distance d from the optimum
        np.testing.assert_allclose(best - revenues, k * (grid - x_opt) ** 2, rtol=1e-6, atol=1e-4)

    def test_price_taker_limit(self):
        """Test a vanishing k recovers the price-taker revenue and pushes bids to the bounds."""
        y, da = 400.0, 50.0
        for ss, bound in ((58.0, 0.0), (42.0, 1800.0)):
            distances = []
            for k in (1e-1, 1e-2, 1e-3, 1e-4, 1e-6):
                prices = MarketPrices(period=None, da_price=da, ss_price=ss)
                distances.append(abs(optimal_bid(y, prices, k) - y))
                taker = 250.0 * da + (y - 250.0) * ss
                realised = settle_revenue(prices, TradePosition(None, 250.0, y), k)
                assert realised - taker == pytest.approx(-k * (y - 250.0) ** 2)
            assert distances == sorted(distances)
            assert np.clip(optimal_bid(y, MarketPrices(None, da, ss), 1e-6), 0.0, 1800.0) == bound
        prices = MarketPrices(period=None, da_price=da, ss_price=58.0)
        taker = 250.0 * da + 150.0 * 58.0
        assert settle_revenue(prices, TradePosition(None, 250.0, y), 1e-9) == pytest.approx(taker, abs=1e-4)

    def test_symmetry_in_deviation(self):
        """Test revenue drops equally on both sides of the optimum."""
        prices = MarketPrices(period=None, da_price=55.0, ss_price=47.0)
        xo = optimal_bid(400.0, prices)
        up = settle_revenue(prices, TradePosition(None, xo + 30.0, 400.0))
        down = settle_revenue(prices, TradePosition(None, xo - 30.0, 400.0))
        assert up == pytest.approx(down)
        assert max_revenue(400.0, prices) - up == pytest.approx(0.07 * 30.0 ** 2)
