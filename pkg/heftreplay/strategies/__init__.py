# heftreplay bidding strategies

from ..config import StrategyConfig
from ..exceptions import ConfigError
from ..utils import information_cutoff, submission_deadline
from .backtest import StrategyBids, generate_bids
from .base import BaseBiddingStrategy
from .expected import ExpectedOptimalStrategy, bid_expected_optimal
from .learned import (
    LearnedBidStrategy,
    LinearBidRegressor,
    OptimalBidDataset,
    bid_learned,
    build_optimal_bid_dataset,
)
from .median import MedianBidStrategy, bid_median
from .spread import climatological_spread, external_spread, slot_climatology, spread_climatology_for_periods

STRATEGIES = {
    "median": MedianBidStrategy,
    "expected_optimal": ExpectedOptimalStrategy,
    "learned": LearnedBidStrategy,
}


def create_strategy(config: StrategyConfig, **kwargs) -> BaseBiddingStrategy:
    """Factory method to create a strategy from its config"""
    try:
        return STRATEGIES[config.kind](config, **kwargs)
    except KeyError:
        raise ConfigError(f"Unknown strategy: {config.kind}")


__all__ = [
    "BaseBiddingStrategy",
    "ExpectedOptimalStrategy",
    "LearnedBidStrategy",
    "LinearBidRegressor",
    "MedianBidStrategy",
    "OptimalBidDataset",
    "STRATEGIES",
    "StrategyBids",
    "bid_expected_optimal",
    "bid_learned",
    "bid_median",
    "build_optimal_bid_dataset",
    "climatological_spread",
    "create_strategy",
    "external_spread",
    "generate_bids",
    "information_cutoff",
    "slot_climatology",
    "spread_climatology_for_periods",
    "submission_deadline",
]
