"""
Core domain types and protocols for heftreplay.
Kept in one module so market, scoring, strategies and leaderboard can share
them without circular imports.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
import pandas as pd

from .exceptions import InvalidCoefficientError, InvalidInputError

QUANTILE_LEVELS: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
QUANTILE_COLUMNS: Tuple[str, ...] = tuple(f"q{int(round(a * 100))}" for a in QUANTILE_LEVELS)

DEFAULT_IMPACT = 0.07
# portfolio capacity, the largest admissible bid (MWh per half-hour)
DEFAULT_BID_CAP = 1800.0
PERIOD_INDEX_NAME = "period_start_utc"


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if value is None or not math.isfinite(float(value)):
            raise InvalidInputError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class MarketPrices:
    """Day-ahead price and single system price for one settlement period (GBP/MWh)"""
    period: Optional[pd.Timestamp]
    da_price: float
    ss_price: float

    def __post_init__(self):
        # negative prices are legal, only non-finite values are rejected
        _require_finite(da_price=self.da_price, ss_price=self.ss_price)

    @property
    def spread(self) -> float:
        return self.ss_price - self.da_price


@dataclass(frozen=True)
class TradePosition:
    """Volume sold day-ahead (bid) and realised production for one period (MWh)"""
    period: Optional[pd.Timestamp]
    bid: float
    production: float
    bid_cap: float = DEFAULT_BID_CAP

    def __post_init__(self):
        _require_finite(bid=self.bid, production=self.production)
        if not 0 <= self.bid <= self.bid_cap:
            raise InvalidInputError(f"bid must lie in [0, {self.bid_cap}], got {self.bid}")
        if self.production < 0:
            raise InvalidInputError(f"production must be >= 0, got {self.production}")

    @property
    def imbalance(self) -> float:
        return self.production - self.bid


@dataclass(frozen=True)
class MarketImpactCoefficient:
    """Price-maker slope of the imbalance price, GBP/MWh per MWh of imbalance"""
    k: float = DEFAULT_IMPACT

    def __post_init__(self):
        if not math.isfinite(self.k) or self.k <= 0:
            raise InvalidCoefficientError(f"market impact coefficient must be > 0, got {self.k}")

    def __float__(self) -> float:
        return float(self.k)


def as_impact(k) -> float:
    """Accept a float or a MarketImpactCoefficient and return the validated slope"""
    if isinstance(k, MarketImpactCoefficient):
        return k.k
    return MarketImpactCoefficient(float(k)).k


@dataclass(frozen=True)
class QuantileForecast:
    """Nine quantiles q10..q90 of production for one settlement period (MWh)"""
    period: Optional[pd.Timestamp]
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) != len(QUANTILE_LEVELS):
            raise InvalidInputError(
                f"expected {len(QUANTILE_LEVELS)} quantile values, got {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError(f"quantile values must be finite: {values}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, q: Dict[float, float], period: Optional[pd.Timestamp] = None) -> 'QuantileForecast':
        missing = [a for a in QUANTILE_LEVELS if a not in q]
        if missing:
            raise InvalidInputError(f"missing quantile levels: {missing}")
        return cls(period=period, values=tuple(q[a] for a in QUANTILE_LEVELS))

    @property
    def q(self) -> Dict[float, float]:
        return dict(zip(QUANTILE_LEVELS, self.values))

    @property
    def median(self) -> float:
        return self.values[QUANTILE_LEVELS.index(0.5)]

    @property
    def is_monotone(self) -> bool:
        return all(b >= a for a, b in zip(self.values, self.values[1:]))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_dict(self) -> Dict[str, float]:
        return dict(zip(QUANTILE_COLUMNS, self.values))


@dataclass(frozen=True)
class SpreadEstimate:
    """Expected price spread (ss - da) for one delivery period"""
    period: Optional[pd.Timestamp]
    mean_spread: float
    source: str = "climatology"

    def __post_init__(self):
        _require_finite(mean_spread=self.mean_spread)
        if self.source not in ("climatology", "external"):
            raise InvalidInputError(f"unknown spread source: {self.source}")


@dataclass
class TeamSeries:
    """
    A team's per-period quantile forecasts and bids over the competition window.

    frame is indexed by UTC period start and carries q10..q90, bid and a
    boolean `filled` flag marking periods taken from the benchmark.
    """
    name: str
    frame: pd.DataFrame = field(default_factory=lambda: empty_submission_frame())

    def __post_init__(self):
        missing = [c for c in (*QUANTILE_COLUMNS, "bid") if c not in self.frame.columns]
        if missing:
            raise InvalidInputError(f"team {self.name}: missing columns {missing}")
        frame = self.frame.copy()
        if "filled" not in frame.columns:
            frame["filled"] = False
        frame["filled"] = frame["filled"].astype(bool)
        frame.index = ensure_utc_index(frame.index)
        self.frame = frame.sort_index()[[*QUANTILE_COLUMNS, "bid", "filled"]]

    @classmethod
    def from_forecasts(cls, name: str, forecasts: Iterable[QuantileForecast],
                       bids: Sequence[float]) -> 'TeamSeries':
        forecasts = list(forecasts)
        if len(forecasts) != len(bids):
            raise InvalidInputError("forecasts and bids must have the same length")
        index = pd.DatetimeIndex([f.period for f in forecasts])
        frame = pd.DataFrame([f.values for f in forecasts], index=index, columns=list(QUANTILE_COLUMNS))
        frame["bid"] = list(bids)
        return cls(name=name, frame=frame)

    @property
    def periods(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def quantiles(self) -> pd.DataFrame:
        return self.frame[list(QUANTILE_COLUMNS)]

    @property
    def bids(self) -> pd.Series:
        return self.frame["bid"]

    @property
    def median(self) -> pd.Series:
        return self.frame["q50"]

    @property
    def filled(self) -> pd.Series:
        return self.frame["filled"]

    def forecasts(self) -> List[QuantileForecast]:
        return [QuantileForecast(period=p, values=tuple(row))
                for p, row in zip(self.frame.index, self.quantiles.to_numpy())]

    def with_bids(self, bids: pd.Series, name: Optional[str] = None) -> 'TeamSeries':
        """Copy of this series with bids replaced (periods without a new bid are dropped)"""
        frame = self.frame.loc[self.frame.index.intersection(bids.index)].copy()
        frame["bid"] = bids.reindex(frame.index).to_numpy()
        return TeamSeries(name=name or self.name, frame=frame)

    def __len__(self) -> int:
        return len(self.frame)


def ensure_utc_index(index) -> pd.DatetimeIndex:
    index = pd.DatetimeIndex(index)
    if index.tz is None:
        index = index.tz_localize("UTC")
    else:
        index = index.tz_convert("UTC")
    return index.rename(PERIOD_INDEX_NAME)


def empty_submission_frame() -> pd.DataFrame:
    index = pd.DatetimeIndex([], tz="UTC", name=PERIOD_INDEX_NAME)
    return pd.DataFrame({c: pd.Series(dtype=float) for c in (*QUANTILE_COLUMNS, "bid")}, index=index)


@runtime_checkable
class BiddingStrategy(Protocol):
    """Protocol for day-ahead bidding strategies"""

    @property
    def name(self) -> str:
        """Name used in backtest output"""
        ...

    @property
    def needs_spread(self) -> bool:
        """Whether bid() consumes a spread estimate"""
        ...

    def bid(self, forecast: QuantileForecast, spread: Optional[SpreadEstimate] = None,
            features: Optional[Dict[str, float]] = None) -> float:
        """Bid volume (MWh) for one delivery period"""
        ...
