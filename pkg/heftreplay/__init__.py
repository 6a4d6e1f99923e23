"""
heftreplay - HEFTcom Forecasting and Trading Replay
===================================================

Offline backtest engine for a hybrid wind + solar forecasting and day-ahead
trading competition: settlement, pinball scoring, quantile combination,
bidding strategies, trading analytics and leaderboards.
"""

# Core Interfaces
from .interfaces import (
    QUANTILE_LEVELS,
    QUANTILE_COLUMNS,
    MarketPrices,
    TradePosition,
    MarketImpactCoefficient,
    QuantileForecast,
    SpreadEstimate,
    TeamSeries,
    BiddingStrategy,
)

# Errors
from .exceptions import (
    HeftReplayError,
    InvalidInputError,
    InvalidLevelError,
    InvalidCoefficientError,
    EmptyEvaluationError,
    FitError,
    ShapeError,
    PreconditionError,
    InsufficientDataError,
    NotFittedError,
    DataError,
    LoadError,
    AlignmentError,
    DuplicateTeamError,
    ConfigError,
    OutputError,
)

# Configuration
from .config import (
    RunConfig,
    CompetitionWindow,
    SchemaMapping,
    AggregationConfig,
    StrategyConfig,
    LeaderboardRules,
    AnalyticsConfig,
    DEFAULT_CONFIG,
    SYNTHETIC_CONFIG,
)

# Market & Scoring
from .market import (
    effective_imbalance_price,
    settle_revenue,
    price_spread,
    optimal_bid,
    max_revenue,
)
from .scoring import PinballResult, pinball_loss, score_series, expanding_pinball, reliability_diagram

# Quantile combination
from .quantcomb import (
    sort_quantiles,
    clip_to_capacity,
    quantile_mean,
    fit_quantile_regression,
    predict_meta,
    aggregate_hybrid,
)

# Strategies, analytics, leaderboard
from .strategies import create_strategy, generate_bids
from .analytics import TradeStats, SkillValueFit, trade_stats, skill_value_regression
from .leaderboard import TeamRecord, LeaderboardRow, fill_missing, build_leaderboard

# Orchestration
from .orchestrator import ReplayOrchestrator
from .core import HeftReplay

__version__ = "0.2.0"

__all__ = [
    # Core Classes
    "HeftReplay",
    "ReplayOrchestrator",

    # Interfaces
    "QUANTILE_LEVELS",
    "QUANTILE_COLUMNS",
    "MarketPrices",
    "TradePosition",
    "MarketImpactCoefficient",
    "QuantileForecast",
    "SpreadEstimate",
    "TeamSeries",
    "BiddingStrategy",

    # Errors
    "HeftReplayError",
    "InvalidInputError",
    "InvalidLevelError",
    "InvalidCoefficientError",
    "EmptyEvaluationError",
    "FitError",
    "ShapeError",
    "PreconditionError",
    "InsufficientDataError",
    "NotFittedError",
    "DataError",
    "LoadError",
    "AlignmentError",
    "DuplicateTeamError",
    "ConfigError",
    "OutputError",

    # Config
    "RunConfig",
    "CompetitionWindow",
    "SchemaMapping",
    "AggregationConfig",
    "StrategyConfig",
    "LeaderboardRules",
    "AnalyticsConfig",
    "DEFAULT_CONFIG",
    "SYNTHETIC_CONFIG",

    # Operations
    "effective_imbalance_price",
    "settle_revenue",
    "price_spread",
    "optimal_bid",
    "max_revenue",
    "PinballResult",
    "pinball_loss",
    "score_series",
    "expanding_pinball",
    "reliability_diagram",
    "sort_quantiles",
    "clip_to_capacity",
    "quantile_mean",
    "fit_quantile_regression",
    "predict_meta",
    "aggregate_hybrid",
    "create_strategy",
    "generate_bids",
    "TradeStats",
    "SkillValueFit",
    "trade_stats",
    "skill_value_regression",
    "TeamRecord",
    "LeaderboardRow",
    "fill_missing",
    "build_leaderboard",
]
