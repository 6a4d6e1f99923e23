"""
Market settlement model.

Revenue for one half-hour is the day-ahead sale plus the imbalance settled at
an effective imbalance price that moves against the participant's own
imbalance:

    R = x * da + (y - x) * (ss - k * (y - x))

Volumes are MWh per settlement period, prices GBP/MWh, revenue GBP.
"""

import logging
from typing import Union

import numpy as np

from .exceptions import InvalidCoefficientError, InvalidInputError
from .interfaces import DEFAULT_IMPACT, MarketImpactCoefficient, MarketPrices, TradePosition, as_impact

logger = logging.getLogger(__name__)

ImpactLike = Union[float, MarketImpactCoefficient]
ArrayLike = Union[float, np.ndarray]


def _finite_arrays(**arrays) -> tuple:
    out = []
    for name, value in arrays.items():
        arr = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(f"{name} contains non-finite values")
        out.append(arr)
    return tuple(out)


def _positive_k(k: ImpactLike) -> float:
    try:
        return as_impact(k)
    except (TypeError, ValueError) as e:
        if isinstance(e, InvalidCoefficientError):
            raise
        raise InvalidCoefficientError(f"invalid market impact coefficient: {k!r}") from e


# --- Vectorised forms ---

def effective_imbalance_price_array(bid: ArrayLike, production: ArrayLike, ss_price: ArrayLike,
                                    k: ImpactLike = DEFAULT_IMPACT) -> np.ndarray:
    k = _positive_k(k)
    x, y, ss = _finite_arrays(bid=bid, production=production, ss_price=ss_price)
    return ss - k * (y - x)


def settle_revenue_array(bid: ArrayLike, production: ArrayLike, da_price: ArrayLike,
                         ss_price: ArrayLike, k: ImpactLike = DEFAULT_IMPACT) -> np.ndarray:
    k = _positive_k(k)
    x, y, da, ss = _finite_arrays(bid=bid, production=production, da_price=da_price, ss_price=ss_price)
    imbalance = y - x
    return x * da + imbalance * (ss - k * imbalance)


def optimal_bid_array(production: ArrayLike, da_price: ArrayLike, ss_price: ArrayLike,
                      k: ImpactLike = DEFAULT_IMPACT) -> np.ndarray:
    k = _positive_k(k)
    y, da, ss = _finite_arrays(production=production, da_price=da_price, ss_price=ss_price)
    return y - (ss - da) / (2.0 * k)


def max_revenue_array(production: ArrayLike, da_price: ArrayLike, ss_price: ArrayLike,
                      k: ImpactLike = DEFAULT_IMPACT) -> np.ndarray:
    """Revenue at the unclipped optimal bid, via the closed form y*da + spread^2/(4k)"""
    k = _positive_k(k)
    y, da, ss = _finite_arrays(production=production, da_price=da_price, ss_price=ss_price)
    spread = ss - da
    return y * da + spread * spread / (4.0 * k)


# --- Single-period operations ---

def effective_imbalance_price(prices: MarketPrices, position: TradePosition,
                              k: ImpactLike = DEFAULT_IMPACT) -> float:
    return float(effective_imbalance_price_array(position.bid, position.production, prices.ss_price, k))


def settle_revenue(prices: MarketPrices, position: TradePosition,
                   k: ImpactLike = DEFAULT_IMPACT) -> float:
    return float(settle_revenue_array(position.bid, position.production,
                                      prices.da_price, prices.ss_price, k))


def price_spread(prices: MarketPrices) -> float:
    return prices.ss_price - prices.da_price


def optimal_bid(production: float, prices: MarketPrices, k: ImpactLike = DEFAULT_IMPACT) -> float:
    """
    Bid maximising realised revenue, y - (ss - da) / (2k).
    Not clipped to any bid bounds: clipping belongs to the strategies.
    """
    return float(optimal_bid_array(production, prices.da_price, prices.ss_price, k))


def max_revenue(production: float, prices: MarketPrices, k: ImpactLike = DEFAULT_IMPACT) -> float:
    return float(max_revenue_array(production, prices.da_price, prices.ss_price, k))
