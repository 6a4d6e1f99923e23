"""
Median bidder: sell the forecast median day-ahead.
"""

from typing import Dict, Optional

from .base import BaseBiddingStrategy
from ..interfaces import QuantileForecast, SpreadEstimate


class MedianBidStrategy(BaseBiddingStrategy):
    """x = q50, clipped to the bid bounds"""

    kind = "median"

    def bid(self, forecast: QuantileForecast, spread: Optional[SpreadEstimate] = None,
            features: Optional[Dict[str, float]] = None) -> float:
        return self.clip(forecast.median)


def bid_median(forecast: QuantileForecast, config=None) -> float:
    return MedianBidStrategy(config).bid(forecast)
