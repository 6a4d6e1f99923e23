"""
Probabilistic forecast evaluation.
Pinball loss averaged over the nine quantile levels and over periods,
day/night stratification, expanding averages and reliability diagrams.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .config import CompetitionWindow
from .exceptions import EmptyEvaluationError, InvalidInputError, InvalidLevelError
from .interfaces import QUANTILE_COLUMNS, QUANTILE_LEVELS, QuantileForecast, TeamSeries, ensure_utc_index

logger = logging.getLogger(__name__)

DAYTIME_START_HOUR = 8
DAYTIME_END_HOUR = 20

ForecastsLike = Union[TeamSeries, pd.DataFrame, Sequence[QuantileForecast]]


@dataclass
class PinballResult:
    """Pinball scores for one forecast series (MWh)"""
    per_period: pd.Series
    overall: float
    daytime: Optional[float]
    overnight: Optional[float]
    excluded: int = 0
    inclusion: pd.Series = field(default_factory=lambda: pd.Series(dtype=bool))

    @property
    def periods(self) -> int:
        return int(len(self.per_period))

    def to_dict(self):
        return {
            "overall": self.overall,
            "daytime": self.daytime,
            "overnight": self.overnight,
            "periods": self.periods,
            "excluded": self.excluded,
        }


def pinball_loss(y, q_alpha, alpha: float):
    """Quantile score: (y - q) * alpha above the quantile, (q - y) * (1 - alpha) below"""
    if not 0.0 < alpha < 1.0:
        raise InvalidLevelError(f"quantile level must lie in (0, 1), got {alpha}")
    y = np.asarray(y, dtype=float)
    q = np.asarray(q_alpha, dtype=float)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(q))):
        raise InvalidInputError("pinball_loss needs finite inputs")
    loss = np.where(y >= q, (y - q) * alpha, (q - y) * (1.0 - alpha))
    return float(loss) if loss.ndim == 0 else loss


def pinball_frame(quantiles: np.ndarray, actuals: np.ndarray) -> np.ndarray:
    """Per-period pinball averaged over the nine levels; quantiles has shape (n, 9)"""
    q = np.asarray(quantiles, dtype=float)
    y = np.asarray(actuals, dtype=float)
    if q.ndim != 2 or q.shape[1] != len(QUANTILE_LEVELS):
        raise InvalidInputError(f"quantiles must have shape (n, {len(QUANTILE_LEVELS)}), got {q.shape}")
    levels = np.asarray(QUANTILE_LEVELS)
    diff = y[:, None] - q
    loss = np.where(diff >= 0, diff * levels, -diff * (1.0 - levels))
    return loss.mean(axis=1)


def is_daytime(periods) -> np.ndarray:
    """Daytime means the period starts at or after 08:00 and before 20:00 UTC"""
    index = ensure_utc_index(periods)
    return np.asarray((index.hour >= DAYTIME_START_HOUR) & (index.hour < DAYTIME_END_HOUR))


def as_quantile_frame(forecasts: ForecastsLike) -> pd.DataFrame:
    if isinstance(forecasts, TeamSeries):
        return forecasts.quantiles
    if isinstance(forecasts, pd.DataFrame):
        frame = forecasts[list(QUANTILE_COLUMNS)].copy()
        frame.index = ensure_utc_index(frame.index)
        return frame
    forecasts = list(forecasts)
    index = ensure_utc_index([f.period for f in forecasts])
    return pd.DataFrame([f.values for f in forecasts], index=index, columns=list(QUANTILE_COLUMNS))


def _evaluation_set(forecasts: ForecastsLike, actuals: pd.Series,
                    window: Optional[CompetitionWindow],
                    excluded_periods: Optional[Iterable] = None):
    frame = as_quantile_frame(forecasts)
    # set semantics over period ids: later duplicates win, order is irrelevant
    frame = frame[~frame.index.duplicated(keep="last")].sort_index()
    actuals = actuals.copy()
    actuals.index = ensure_utc_index(actuals.index)
    actuals = actuals[~actuals.index.duplicated(keep="last")].dropna()

    if window is not None:
        frame = frame[window.contains(frame.index)]
    if excluded_periods is not None:
        drop = ensure_utc_index(list(excluded_periods))
        frame = frame[~frame.index.isin(drop)]

    inclusion = pd.Series(frame.index.isin(actuals.index), index=frame.index, name="included")
    evaluated = frame[inclusion.to_numpy()]
    return evaluated, actuals.reindex(evaluated.index), inclusion


def score_series(forecasts: ForecastsLike, actuals: pd.Series,
                 window: Optional[CompetitionWindow] = None,
                 excluded_periods: Optional[Iterable] = None) -> PinballResult:
    """
    Score a quantile forecast series against actual production.
    Periods without an actual are excluded from every mean and counted.
    """
    evaluated, y, inclusion = _evaluation_set(forecasts, actuals, window, excluded_periods)
    if evaluated.empty:
        raise EmptyEvaluationError("no periods with both a forecast and an actual")

    excluded = int((~inclusion).sum())
    if excluded:
        logger.warning(f"{excluded} forecast periods have no actual and were excluded")

    scores = pd.Series(pinball_frame(evaluated.to_numpy(), y.to_numpy()),
                       index=evaluated.index, name="pinball")
    day = is_daytime(scores.index)

    def _mean(values: pd.Series) -> Optional[float]:
        return float(values.mean()) if len(values) else None

    return PinballResult(
        per_period=scores,
        overall=float(scores.mean()),
        daytime=_mean(scores[day]),
        overnight=_mean(scores[~day]),
        excluded=excluded,
        inclusion=inclusion,
    )


def expanding_pinball(per_period: Union[pd.Series, Sequence[float]]) -> pd.Series:
    """Element n is the mean of the first n per-period scores (chronological input)"""
    scores = per_period if isinstance(per_period, pd.Series) else pd.Series(list(per_period), dtype=float)
    if scores.empty:
        return scores.astype(float)
    return scores.expanding().mean().rename("expanding_pinball")


def reliability_diagram(forecasts: ForecastsLike, actuals: pd.Series,
                        window: Optional[CompetitionWindow] = None,
                        split_day_night: bool = False) -> pd.DataFrame:
    """
    Empirical coverage P(y <= q_alpha) for each level.
    Columns: `all`, plus `daytime` and `overnight` when split_day_night is set.
    Ties count as covered.
    """
    evaluated, y, _ = _evaluation_set(forecasts, actuals, window)
    if evaluated.empty:
        raise EmptyEvaluationError("reliability diagram over an empty window")

    covered = evaluated.to_numpy() >= y.to_numpy()[:, None]
    result = pd.DataFrame(index=pd.Index(QUANTILE_LEVELS, name="level"))
    result["all"] = covered.mean(axis=0)
    if split_day_night:
        day = is_daytime(evaluated.index)
        for name, mask in (("daytime", day), ("overnight", ~day)):
            if mask.any():
                result[name] = covered[mask].mean(axis=0)
            else:
                logger.warning(f"no {name} periods in the evaluation window")
                result[name] = np.nan
    return result
