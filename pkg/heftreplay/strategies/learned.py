"""
Learned bidder: regress the realised optimal bid on forecast and price features.

Targets come from market.optimal_bid_array on realised production and prices;
features are the forecast median, the UTC slot of day and the slot spread
climatology known at the submission deadline.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from .base import BaseBiddingStrategy
from .spread import spread_climatology_for_periods
from ..exceptions import FitError, InvalidInputError, NotFittedError
from ..interfaces import DEFAULT_IMPACT, QuantileForecast, SpreadEstimate, TeamSeries, ensure_utc_index
from ..market import optimal_bid_array
from ..utils import slot_of_day

logger = logging.getLogger(__name__)

FEATURE_COLUMNS = ("q50", "slot", "spread_clim")


@dataclass
class OptimalBidDataset:
    """Training table: one row per aligned period, features plus target x_opt"""
    frame: pd.DataFrame
    dropped: int = 0

    @property
    def target(self) -> pd.Series:
        return self.frame["x_opt"]

    def features(self, columns: Sequence[str] = FEATURE_COLUMNS) -> pd.DataFrame:
        return self.frame[list(columns)]

    def before(self, cutoff: pd.Timestamp) -> 'OptimalBidDataset':
        """Rows realised (period fully elapsed) by cutoff"""
        end = self.frame.index + pd.Timedelta(minutes=30)
        return OptimalBidDataset(self.frame[end <= cutoff], self.dropped)

    def __len__(self) -> int:
        return len(self.frame)


def build_optimal_bid_dataset(forecasts, prices: pd.DataFrame, actuals: pd.Series,
                              k: float = DEFAULT_IMPACT, spread_clim: Optional[pd.Series] = None,
                              window_days: int = 28, min_obs: int = 7, lag_days: int = 7,
                              tz: str = "Europe/London") -> OptimalBidDataset:
    """
    Join forecasts, prices and actuals; rows missing any input are dropped and
    counted. spread_clim is the spread feature: any per-period estimate (an
    external spread file, say). When not given it is the slot climatology per
    market day from prices visible at that day's information cutoff.
    """
    median = forecasts.median if isinstance(forecasts, TeamSeries) else forecasts["q50"]
    median = median.copy()
    median.index = ensure_utc_index(median.index)
    prices = prices.copy()
    prices.index = ensure_utc_index(prices.index)
    actuals = actuals.copy()
    actuals.index = ensure_utc_index(actuals.index)

    index = median.index.union(prices.index).union(actuals.index)
    frame = pd.DataFrame({
        "q50": median.reindex(index),
        "da_price": prices["da_price"].reindex(index),
        "ss_price": prices["ss_price"].reindex(index),
        "production": actuals.reindex(index),
    })
    # only periods with a forecast can become training rows
    frame = frame.loc[median.index]
    if spread_clim is None:
        spread_clim = spread_climatology_for_periods(prices, frame.index, window_days, min_obs, lag_days, tz)
    else:
        spread_clim = spread_clim.copy()
        spread_clim.index = ensure_utc_index(spread_clim.index)
    frame["spread_clim"] = spread_clim.reindex(frame.index).to_numpy(dtype=float)
    frame["slot"] = slot_of_day(frame.index).astype(float)

    complete = frame.notna().all(axis=1)
    dropped = int((~complete).sum())
    frame = frame[complete].copy()
    if dropped:
        logger.debug(f"Dropped {dropped} periods with missing inputs from the optimal-bid dataset")
    frame["x_opt"] = optimal_bid_array(frame["production"].to_numpy(), frame["da_price"].to_numpy(),
                                       frame["ss_price"].to_numpy(), k) if len(frame) else []
    return OptimalBidDataset(frame=frame, dropped=dropped)


class LinearBidRegressor:
    """Ordinary least squares with an intercept"""

    def __init__(self):
        self.intercept_: Optional[float] = None
        self.coef_: Optional[np.ndarray] = None
        self.columns: Optional[tuple] = None

    @property
    def is_fitted(self) -> bool:
        return self.coef_ is not None

    def fit(self, features, target) -> 'LinearBidRegressor':
        x = np.asarray(features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(target, dtype=float).ravel()
        if len(x) != len(y) or len(y) == 0:
            raise FitError(f"cannot fit on {len(x)} feature rows and {len(y)} targets")
        design = np.column_stack([np.ones(len(y)), x])
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.columns = tuple(features.columns) if isinstance(features, pd.DataFrame) else None
        return self

    def predict(self, features) -> np.ndarray:
        if not self.is_fitted:
            raise NotFittedError("regressor has not been fitted")
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if x.shape[1] != len(self.coef_):
            raise InvalidInputError(f"expected {len(self.coef_)} features, got {x.shape[1]}")
        return self.intercept_ + x @ self.coef_


class LearnedBidStrategy(BaseBiddingStrategy):
    """Predict the optimal bid directly from features"""

    kind = "learned"

    def __init__(self, config=None, regressor: Optional[LinearBidRegressor] = None, **kwargs):
        super().__init__(config, **kwargs)
        self.regressor = regressor or LinearBidRegressor()

    @property
    def needs_spread(self) -> bool:
        return "spread_clim" in self.config.feature_columns

    @property
    def needs_training(self) -> bool:
        return True

    def fit(self, dataset: OptimalBidDataset) -> 'LearnedBidStrategy':
        self.regressor.fit(dataset.features(self.config.feature_columns), dataset.target)
        return self

    def feature_vector(self, forecast: QuantileForecast, spread: Optional[SpreadEstimate] = None,
                       features: Optional[Dict[str, float]] = None) -> np.ndarray:
        values: Dict[str, float] = {"q50": forecast.median}
        if forecast.period is not None:
            values["slot"] = float(slot_of_day([forecast.period])[0])
        if spread is not None:
            values["spread_clim"] = spread.mean_spread
        values.update(features or {})
        missing = [c for c in self.config.feature_columns if c not in values]
        if missing:
            raise InvalidInputError(f"{self.name}: missing features {missing}")
        return np.array([values[c] for c in self.config.feature_columns], dtype=float)

    def bid(self, forecast: QuantileForecast, spread: Optional[SpreadEstimate] = None,
            features: Optional[Dict[str, float]] = None) -> float:
        x = self.feature_vector(forecast, spread, features)
        return self.clip(float(self.regressor.predict(x)[0]))


def bid_learned(regressor: LinearBidRegressor, features, config=None) -> float:
    """Clipped prediction for one feature vector"""
    strategy = LearnedBidStrategy(config, regressor=regressor)
    return strategy.clip(float(regressor.predict(np.asarray(features, dtype=float))[0]))
