"""
Expected-revenue-maximising bidder.

Expected revenue is quadratic in the bid, so its maximiser is
E[y] - E[spread] / (2k).
"""

import logging
from typing import Dict, Optional

from .base import BaseBiddingStrategy
from ..exceptions import InvalidInputError
from ..interfaces import QuantileForecast, SpreadEstimate
from ..quantcomb import quantile_mean

logger = logging.getLogger(__name__)


class ExpectedOptimalStrategy(BaseBiddingStrategy):

    kind = "expected_optimal"

    @property
    def needs_spread(self) -> bool:
        return True

    def expected_production(self, forecast: QuantileForecast) -> float:
        if self.config.mean_method == "median":
            return forecast.median
        return quantile_mean(forecast)

    def bid(self, forecast: QuantileForecast, spread: Optional[SpreadEstimate] = None,
            features: Optional[Dict[str, float]] = None) -> float:
        if spread is None:
            raise InvalidInputError(f"{self.name} needs a spread estimate")
        volume = self.expected_production(forecast) - spread.mean_spread / (2.0 * self.config.k)
        return self.clip(volume)


def bid_expected_optimal(forecast: QuantileForecast, spread: SpreadEstimate, config=None) -> float:
    return ExpectedOptimalStrategy(config).bid(forecast, spread)
