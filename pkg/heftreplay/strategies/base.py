"""
Base class for day-ahead bidding strategies.
"""

from abc import ABC, abstractmethod
from typing import Dict, Optional

import numpy as np

from ..config import StrategyConfig
from ..interfaces import QuantileForecast, SpreadEstimate


class BaseBiddingStrategy(ABC):
    """Base class for all bidding strategies"""

    def __init__(self, config: Optional[StrategyConfig] = None, **kwargs):
        self.config = config or StrategyConfig(kind=self.kind)
        self.options = kwargs

    kind: str = "median"

    @property
    def name(self) -> str:
        return self.config.name or self.kind

    @property
    def needs_spread(self) -> bool:
        return False

    @property
    def needs_training(self) -> bool:
        return False

    def clip(self, volume: float) -> float:
        """Clip a volume to [bid_floor, bid_cap]"""
        return float(np.clip(volume, self.config.bid_floor, self.config.bid_cap))

    @abstractmethod
    def bid(self, forecast: QuantileForecast, spread: Optional[SpreadEstimate] = None,
            features: Optional[Dict[str, float]] = None) -> float:
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"
