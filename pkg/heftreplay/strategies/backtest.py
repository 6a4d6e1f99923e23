"""
Day-by-day strategy backtest.

Each market day's bids are computed from that day's forecasts plus prices and
production realised by the day's information cutoff (the 09:20 UTC deadline
on D-1 minus the publication lag). Nothing after the cutoff is read.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import pandas as pd

from .base import BaseBiddingStrategy
from .learned import build_optimal_bid_dataset
from .spread import slot_climatology
from ..config import CompetitionWindow
from ..exceptions import InsufficientDataError
from ..interfaces import QUANTILE_COLUMNS, QuantileForecast, SpreadEstimate, TeamSeries, ensure_utc_index
from ..utils import information_cutoff, market_day_periods, slot_of_day

logger = logging.getLogger(__name__)


@dataclass
class StrategyBids:
    """Backtest output for one strategy"""
    name: str
    bids: pd.Series
    fallback_periods: int = 0
    fallback_days: int = 0

    def to_dict(self):
        return {
            "strategy": self.name,
            "periods": int(len(self.bids)),
            "fallback_periods": self.fallback_periods,
            "fallback_days": self.fallback_days,
        }


def _quantile_frame(forecasts: Union[TeamSeries, pd.DataFrame]) -> pd.DataFrame:
    frame = forecasts.quantiles if isinstance(forecasts, TeamSeries) else forecasts[list(QUANTILE_COLUMNS)]
    frame = frame.copy()
    frame.index = ensure_utc_index(frame.index)
    return frame[~frame.index.duplicated(keep="last")].sort_index()


def _day_spreads(strategy: BaseBiddingStrategy, prices: pd.DataFrame, periods: pd.DatetimeIndex,
                 day, external_spreads: Optional[pd.Series]) -> pd.Series:
    config = strategy.config
    if config.spread_source == "external":
        if external_spreads is None:
            raise InsufficientDataError(f"{strategy.name}: external spread source configured but none supplied")
        return external_spreads.reindex(periods)
    cutoff = information_cutoff(day, config.price_lag_days)
    table = slot_climatology(prices, cutoff, config.climatology_window_days, config.min_climatology_obs)
    return pd.Series(pd.Series(slot_of_day(periods)).map(table).to_numpy(dtype=float), index=periods)


def generate_bids(strategy: BaseBiddingStrategy, forecasts: Union[TeamSeries, pd.DataFrame],
                  prices: pd.DataFrame, actuals: Optional[pd.Series] = None,
                  window: Optional[CompetitionWindow] = None,
                  external_spreads: Optional[pd.Series] = None) -> StrategyBids:
    """
    Backtest a strategy over the window. Periods whose spread estimate or
    training set is unavailable are bid at the clipped median and counted as
    fallbacks.
    """
    window = window or CompetitionWindow()
    config = strategy.config
    quantiles = _quantile_frame(forecasts)
    prices = prices.copy()
    prices.index = ensure_utc_index(prices.index)
    if external_spreads is not None:
        external_spreads = external_spreads.copy()
        external_spreads.index = ensure_utc_index(external_spreads.index)

    dataset = None
    if strategy.needs_training:
        if actuals is None:
            raise InsufficientDataError(f"{strategy.name} needs realised production to train")
        # train on the same spread source the bids are made with
        training_spreads = None
        if strategy.needs_spread and config.spread_source == "external":
            if external_spreads is None:
                raise InsufficientDataError(f"{strategy.name}: external spread source configured but none supplied")
            training_spreads = external_spreads
        dataset = build_optimal_bid_dataset(
            quantiles, prices, actuals, k=config.k, spread_clim=training_spreads,
            window_days=config.climatology_window_days, min_obs=config.min_climatology_obs,
            lag_days=config.price_lag_days, tz=window.timezone)

    bids = []
    fallback_periods = 0
    fallback_days = 0
    for day in window.market_days():
        periods = market_day_periods(day, window.timezone).intersection(quantiles.index)
        if len(periods) == 0:
            continue
        day_quantiles = quantiles.loc[periods].to_numpy()
        forecasts_today = [QuantileForecast(period=p, values=tuple(row)) for p, row in zip(periods, day_quantiles)]

        usable = True
        if dataset is not None:
            cutoff = min(information_cutoff(day, config.price_lag_days),
                         information_cutoff(day, config.production_lag_days))
            training = dataset.before(cutoff)
            if len(training) < config.min_training_rows:
                logger.debug(f"{strategy.name}: {len(training)} training rows for {day}, using median bids")
                usable = False
            else:
                strategy.fit(training)

        spreads = None
        if usable and strategy.needs_spread:
            spreads = _day_spreads(strategy, prices, periods, day, external_spreads)

        day_bids = []
        day_fallbacks = 0
        for forecast in forecasts_today:
            spread = None
            if spreads is not None:
                value = spreads.loc[forecast.period]
                if np.isfinite(value):
                    spread = SpreadEstimate(forecast.period, float(value),
                                            "external" if config.spread_source == "external" else "climatology")
            if not usable or (strategy.needs_spread and spread is None):
                day_bids.append(strategy.clip(forecast.median))
                day_fallbacks += 1
            else:
                day_bids.append(strategy.bid(forecast, spread))
        bids.append(pd.Series(day_bids, index=periods))
        if day_fallbacks:
            fallback_periods += day_fallbacks
            fallback_days += 1

    if fallback_periods:
        logger.warning(f"{strategy.name}: median fallback for {fallback_periods} periods on {fallback_days} days")
    series = pd.concat(bids) if bids else pd.Series(dtype=float)
    series.index = ensure_utc_index(series.index)
    return StrategyBids(name=strategy.name, bids=series.rename(strategy.name).astype(float),
                        fallback_periods=fallback_periods, fallback_days=fallback_days)
