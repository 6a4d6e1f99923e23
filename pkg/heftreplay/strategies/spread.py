"""
Price-spread climatology.

The imbalance-minus-day-ahead spread is strongly patterned by time of day,
so the estimate is a trailing mean per settlement slot.
"""

import logging
from typing import Optional

import numpy as np
import pandas as pd

from ..exceptions import InsufficientDataError, InvalidInputError
from ..interfaces import SpreadEstimate, ensure_utc_index
from ..utils import information_cutoff, market_day_of, settled_by, slot_of_day

logger = logging.getLogger(__name__)


def _spread_series(history: pd.DataFrame) -> pd.Series:
    missing = [c for c in ("da_price", "ss_price") if c not in history.columns]
    if missing:
        raise InvalidInputError(f"price history is missing columns {missing}")
    spread = (history["ss_price"] - history["da_price"]).astype(float)
    spread.index = ensure_utc_index(history.index)
    return spread.dropna()


def slot_climatology(history: pd.DataFrame, cutoff: pd.Timestamp, window_days: int = 28,
                     min_obs: int = 7) -> pd.Series:
    """
    Mean spread per UTC slot over periods settled in [cutoff - window_days, cutoff].
    Slots with fewer than min_obs observations are absent from the result.
    """
    spread = _spread_series(history)
    visible = settled_by(spread.index, cutoff) & \
        np.asarray(spread.index >= cutoff - pd.Timedelta(days=window_days))
    spread = spread[visible]
    if spread.empty:
        return pd.Series(dtype=float, name="spread_clim")
    stats = spread.groupby(slot_of_day(spread.index)).agg(["mean", "count"])
    return stats.loc[stats["count"] >= min_obs, "mean"].rename("spread_clim")


def climatological_spread(history: pd.DataFrame, target_period, window_days: int = 28,
                          min_obs: int = 7, cutoff: Optional[pd.Timestamp] = None) -> SpreadEstimate:
    """Slot-mean spread for target_period from history strictly before it (or before cutoff)"""
    target = ensure_utc_index([target_period])[0]
    cutoff = min(cutoff, target) if cutoff is not None else target
    table = slot_climatology(history, cutoff, window_days, min_obs)
    slot = int(slot_of_day([target])[0])
    if slot not in table.index:
        raise InsufficientDataError(
            f"fewer than {min_obs} slot-{slot} spread observations in the {window_days} days before {cutoff}")
    return SpreadEstimate(period=target, mean_spread=float(table.loc[slot]), source="climatology")


def spread_climatology_for_periods(history: pd.DataFrame, periods, window_days: int = 28,
                                   min_obs: int = 7, lag_days: int = 7,
                                   tz: str = "Europe/London") -> pd.Series:
    """
    Leak-free climatology feature for arbitrary periods: each period sees only
    prices settled by the information cutoff of its own market day. NaN where
    a slot has too little history.
    """
    index = ensure_utc_index(periods)
    result = pd.Series(np.nan, index=index, name="spread_clim")
    if len(index) == 0:
        return result
    days = market_day_of(index, tz)
    slots = slot_of_day(index)
    for day in days.unique():
        mask = np.asarray(days == day)
        table = slot_climatology(history, information_cutoff(day.date(), lag_days), window_days, min_obs)
        result.iloc[np.flatnonzero(mask)] = pd.Series(slots[mask]).map(table).to_numpy(dtype=float)
    return result


def external_spread(spreads: pd.Series, period) -> SpreadEstimate:
    """Spread supplied from outside (perfect-information oracle runs)"""
    spreads = spreads.copy()
    spreads.index = ensure_utc_index(spreads.index)
    target = ensure_utc_index([period])[0]
    if target not in spreads.index or not np.isfinite(spreads.loc[target]):
        raise InsufficientDataError(f"no external spread for {target}")
    return SpreadEstimate(period=target, mean_spread=float(spreads.loc[target]), source="external")
