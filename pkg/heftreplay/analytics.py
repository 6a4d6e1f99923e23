"""
Trading and skill analytics.

Revenue series, opportunity cost and capture ratio against the theoretical
maximum, risk statistics, bid-direction statistics, strategic bid histograms
and the regression of trading revenue on forecast skill.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import date
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .config import CompetitionWindow
from .exceptions import EmptyEvaluationError, FitError
from .interfaces import DEFAULT_IMPACT, QUANTILE_COLUMNS, TeamSeries, ensure_utc_index
from .market import max_revenue_array, settle_revenue_array
from .scoring import pinball_frame
from .utils import market_day_of, slot_of_day

logger = logging.getLogger(__name__)


# --- Aligned trade table ---

@dataclass
class TradeFrame:
    """Per-period bids, forecasts, prices, production and settled revenue for one team"""
    team: str
    frame: pd.DataFrame
    excluded: int = 0

    @property
    def revenue(self) -> pd.Series:
        return self.frame["revenue"]

    @property
    def total_revenue(self) -> float:
        return float(self.frame["revenue"].sum())


def trade_frame(team: TeamSeries, prices: pd.DataFrame, actuals: pd.Series,
                k: float = DEFAULT_IMPACT, window: Optional[CompetitionWindow] = None) -> TradeFrame:
    """Join a team's submissions with prices and actuals; periods missing any input are excluded"""
    submissions = team.frame[~team.frame.index.duplicated(keep="last")]
    if window is not None:
        submissions = submissions[window.contains(submissions.index)]
    prices = prices[["da_price", "ss_price"]].copy()
    prices.index = ensure_utc_index(prices.index)
    actuals = actuals.copy()
    actuals.index = ensure_utc_index(actuals.index)

    frame = submissions[[*QUANTILE_COLUMNS, "bid"]].join(prices, how="left")
    frame["production"] = actuals.reindex(frame.index).to_numpy(dtype=float)
    complete = frame.notna().all(axis=1)
    excluded = int((~complete).sum())
    if excluded:
        logger.warning(f"{team.name}: {excluded} periods without prices or actuals excluded from trading")
    frame = frame[complete].copy()
    if frame.empty:
        frame["spread"] = frame["revenue"] = frame["max_revenue"] = pd.Series(dtype=float)
        return TradeFrame(team=team.name, frame=frame, excluded=excluded)

    x, y = frame["bid"].to_numpy(), frame["production"].to_numpy()
    da, ss = frame["da_price"].to_numpy(), frame["ss_price"].to_numpy()
    frame["spread"] = ss - da
    frame["revenue"] = settle_revenue_array(x, y, da, ss, k)
    frame["max_revenue"] = max_revenue_array(y, da, ss, k)
    return TradeFrame(team=team.name, frame=frame, excluded=excluded)


def revenue_series(team: TeamSeries, prices: pd.DataFrame, actuals: pd.Series,
                   k: float = DEFAULT_IMPACT, window: Optional[CompetitionWindow] = None) -> pd.Series:
    """Per-period revenue (GBP); the total is the trading-track score"""
    return trade_frame(team, prices, actuals, k, window).revenue.rename("revenue_gbp")


def opportunity_cost(team: TeamSeries, prices: pd.DataFrame, actuals: pd.Series,
                     k: float = DEFAULT_IMPACT, volume_epsilon: float = 1e-6,
                     window: Optional[CompetitionWindow] = None) -> pd.DataFrame:
    """
    (max revenue - revenue) / bid volume per period in GBP/MWh, paired with the
    period's pinball score. Periods with bid <= volume_epsilon are absent.
    """
    frame = trade_frame(team, prices, actuals, k, window).frame
    frame = frame[frame["bid"] > volume_epsilon]
    result = pd.DataFrame(index=frame.index)
    if frame.empty:
        result["opportunity_cost"] = result["pinball"] = pd.Series(dtype=float)
        return result
    # max_revenue is the true maximum; clip rounding noise
    cost = (frame["max_revenue"] - frame["revenue"]) / frame["bid"]
    result["opportunity_cost"] = cost.clip(lower=0.0)
    result["pinball"] = pinball_frame(frame[list(QUANTILE_COLUMNS)].to_numpy(), frame["production"].to_numpy())
    return result


def bin_opportunity_cost(costs: pd.DataFrame, bin_edges: Sequence[float] = (0.0, 10.0, 20.0, 40.0, 80.0, 160.0)
                         ) -> pd.DataFrame:
    """Opportunity-cost distribution per pinball bin; the last bin is open-ended"""
    edges = list(bin_edges) + [np.inf]
    rows = []
    for left, right in zip(edges[:-1], edges[1:]):
        values = costs.loc[(costs["pinball"] >= left) & (costs["pinball"] < right), "opportunity_cost"]
        rows.append({
            "pinball_low": left,
            "pinball_high": right,
            "count": int(len(values)),
            "q25": float(values.quantile(0.25)) if len(values) else np.nan,
            "median": float(values.median()) if len(values) else np.nan,
            "q75": float(values.quantile(0.75)) if len(values) else np.nan,
        })
    return pd.DataFrame(rows)


def capture_ratio(team: TeamSeries, prices: pd.DataFrame, actuals: pd.Series,
                  k: float = DEFAULT_IMPACT, window: Optional[CompetitionWindow] = None) -> pd.Series:
    """Median of revenue / max revenue per UTC slot of day, over periods with max revenue > 0"""
    frame = trade_frame(team, prices, actuals, k, window).frame
    frame = frame[frame["max_revenue"] > 0]
    if frame.empty:
        return pd.Series(dtype=float, name="capture_ratio")
    ratio = frame["revenue"] / frame["max_revenue"]
    result = ratio.groupby(slot_of_day(ratio.index)).median()
    result.index.name = "slot"
    return result.rename("capture_ratio")


# --- Risk statistics ---

@dataclass
class TradeStats:
    """Per-period trading statistics; sharpe and sortino are None when undefined"""
    win_rate: float
    relative_bid_volume: Optional[float]
    trade_vwap: Optional[float]
    production_vwap: Optional[float]
    sharpe: Optional[float]
    sortino: Optional[float]
    var5: float
    es5: float
    periods: int = 0
    total_revenue: float = 0.0

    @property
    def sharpe_defined(self) -> bool:
        return self.sharpe is not None

    @property
    def sortino_defined(self) -> bool:
        return self.sortino is not None

    def to_dict(self) -> Dict[str, Optional[float]]:
        d = asdict(self)
        d["sharpe_defined"] = self.sharpe_defined
        d["sortino_defined"] = self.sortino_defined
        return d


def risk_statistics(revenues, var_level: float = 0.05) -> Dict[str, Optional[float]]:
    """
    Sharpe (mean / sample sd), Sortino (mean / sample sd of negative revenues),
    VaR (linearly interpolated empirical quantile) and ES (mean strictly below VaR).
    """
    r = np.asarray(revenues, dtype=float)
    if r.size == 0:
        raise EmptyEvaluationError("no revenues to summarise")
    mean = float(r.mean())
    sd = float(r.std(ddof=1)) if r.size > 1 else 0.0
    sharpe = mean / sd if sd > 0 else None

    negative = r[r < 0]
    downside = float(negative.std(ddof=1)) if negative.size >= 2 else 0.0
    sortino = mean / downside if downside > 0 else None

    var = float(np.quantile(r, var_level))
    tail = r[r < var]
    es = float(tail.mean()) if tail.size else var
    return {"sharpe": sharpe, "sortino": sortino, "var": var, "es": es}


def trade_stats_from_frame(frame: pd.DataFrame, var_level: float = 0.05,
                           volume_epsilon: float = 1e-6) -> TradeStats:
    if frame.empty:
        raise EmptyEvaluationError("trade statistics over an empty period set")
    revenue = frame["revenue"].to_numpy(dtype=float)
    bids = frame["bid"].to_numpy(dtype=float)
    production = frame["production"].to_numpy(dtype=float)
    traded = bids.sum()
    produced = production.sum()
    risk = risk_statistics(revenue, var_level)
    return TradeStats(
        win_rate=float(np.mean(revenue > 0)),
        relative_bid_volume=float(traded / produced) if produced > volume_epsilon else None,
        trade_vwap=float((bids * frame["da_price"].to_numpy()).sum() / traded) if traded > volume_epsilon else None,
        production_vwap=float(revenue.sum() / produced) if produced > volume_epsilon else None,
        sharpe=risk["sharpe"],
        sortino=risk["sortino"],
        var5=risk["var"],
        es5=risk["es"],
        periods=int(len(revenue)),
        total_revenue=float(revenue.sum()),
    )


def trade_stats(team: TeamSeries, prices: pd.DataFrame, actuals: pd.Series,
                k: float = DEFAULT_IMPACT, var_level: float = 0.05,
                window: Optional[CompetitionWindow] = None) -> TradeStats:
    return trade_stats_from_frame(trade_frame(team, prices, actuals, k, window).frame, var_level)


# --- Direction statistics ---

@dataclass
class DirectionStats:
    """
    Fractions over decidable periods only; None when no period is decidable.

    correct_bid_direction: bid moved away from q50 the way the spread rewards
    (below q50 for a positive spread). imbalance_opposite_spread: the traded
    position x - y has the opposite sign to the spread, as x_opt always does.
    """
    correct_bid_direction: Optional[float]
    imbalance_opposite_spread: Optional[float]
    bid_decidable: int = 0
    imbalance_decidable: int = 0

    def to_dict(self):
        return asdict(self)


def direction_stats_from_frame(frame: pd.DataFrame) -> DirectionStats:
    spread_sign = np.sign(frame["spread"].to_numpy(dtype=float))
    deviation_sign = np.sign((frame["q50"] - frame["bid"]).to_numpy(dtype=float))
    position_sign = np.sign((frame["bid"] - frame["production"]).to_numpy(dtype=float))

    bid_mask = (spread_sign != 0) & (deviation_sign != 0)
    imb_mask = (spread_sign != 0) & (position_sign != 0)

    def _fraction(hits: np.ndarray, mask: np.ndarray) -> Optional[float]:
        return float(hits[mask].mean()) if mask.any() else None

    return DirectionStats(
        correct_bid_direction=_fraction(deviation_sign == spread_sign, bid_mask),
        imbalance_opposite_spread=_fraction(position_sign == -spread_sign, imb_mask),
        bid_decidable=int(bid_mask.sum()),
        imbalance_decidable=int(imb_mask.sum()),
    )


def direction_stats(team: TeamSeries, prices: pd.DataFrame, actuals: pd.Series,
                    window: Optional[CompetitionWindow] = None) -> DirectionStats:
    return direction_stats_from_frame(trade_frame(team, prices, actuals, window=window).frame)


def strategic_bid_histogram(team: TeamSeries, bin_width: float = 25.0,
                            value_range: float = 500.0) -> pd.DataFrame:
    """
    Counts of q50 - bid in fixed-width bins centred on zero, covering
    [-value_range, value_range]. Deviations beyond the range land in the end bins.
    """
    half = bin_width / 2.0
    n_side = int(math.ceil(value_range / bin_width))
    edges = np.arange(-n_side, n_side + 2) * bin_width - half
    deviation = (team.median - team.bids).dropna().to_numpy(dtype=float)
    clipped = np.clip(deviation, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    outside = int(np.sum((deviation < edges[0]) | (deviation > edges[-1])))
    if outside:
        logger.debug(f"{team.name}: {outside} bid deviations beyond +/-{value_range} MWh folded into end bins")
    return pd.DataFrame({"bin_low": edges[:-1], "bin_high": edges[1:], "count": counts.astype(int)})


# --- Revenue benchmarks ---

def revenue_bounds(prices: pd.DataFrame, actuals: pd.Series, k: float = DEFAULT_IMPACT,
                   window: Optional[CompetitionWindow] = None) -> Dict[str, float]:
    """
    Revenue of bidding the realised production (a perfect deterministic
    forecast) and of bidding x_opt in every period (perfect decisions).
    """
    prices = prices[["da_price", "ss_price"]].copy()
    prices.index = ensure_utc_index(prices.index)
    actuals = actuals.copy()
    actuals.index = ensure_utc_index(actuals.index)
    frame = prices.join(actuals.rename("production"), how="inner").dropna()
    if window is not None:
        frame = frame[window.contains(frame.index)]
    y, da, ss = frame["production"].to_numpy(), frame["da_price"].to_numpy(), frame["ss_price"].to_numpy()
    return {
        "perfect_forecast": float(settle_revenue_array(y, y, da, ss, k).sum()),
        "perfect_decision": float(max_revenue_array(y, da, ss, k).sum()),
        "periods": int(len(frame)),
    }


def median_bid_uplift(team: TeamSeries, prices: pd.DataFrame, actuals: pd.Series,
                      k: float = DEFAULT_IMPACT, bid_floor: float = 0.0, bid_cap: float = 1800.0,
                      window: Optional[CompetitionWindow] = None) -> Dict[str, float]:
    """Team revenue minus the revenue of bidding its own clipped q50, total and per MWh produced"""
    frame = trade_frame(team, prices, actuals, k, window).frame
    if frame.empty:
        raise EmptyEvaluationError(f"{team.name}: no tradable periods")
    median_bids = frame["q50"].clip(bid_floor, bid_cap).to_numpy()
    baseline = settle_revenue_array(median_bids, frame["production"].to_numpy(),
                                    frame["da_price"].to_numpy(), frame["ss_price"].to_numpy(), k)
    revenue = float(frame["revenue"].sum())
    uplift = revenue - float(baseline.sum())
    produced = float(frame["production"].sum())
    return {
        "revenue": revenue,
        "median_bid_revenue": float(baseline.sum()),
        "uplift": uplift,
        "uplift_per_mwh": uplift / produced if produced > 0 else float("nan"),
    }


def risk_reward(frames: Mapping[str, pd.DataFrame], exclude_first_days: int = 7,
                var_level: float = 0.05, start: Optional[date] = None,
                tz: str = "Europe/London") -> pd.DataFrame:
    """Per team (VaR, production VWAP) after dropping the first market days"""
    rows = []
    for name in sorted(frames):
        frame = frames[name]
        if frame.empty:
            continue
        days = market_day_of(frame.index, tz)
        first = pd.Timestamp(start) if start is not None else days.min()
        kept = frame[np.asarray(days >= first + pd.Timedelta(days=exclude_first_days))]
        if kept.empty:
            continue
        s = trade_stats_from_frame(kept, var_level)
        rows.append({"team": name, "var5": s.var5, "production_vwap": s.production_vwap})
    return pd.DataFrame(rows, columns=["team", "var5", "production_vwap"])


def relative_cumulative_revenue(revenues: Mapping[str, pd.Series], top_n: int = 10,
                                tz: str = "Europe/London") -> pd.DataFrame:
    """Daily cumulative revenue of each team minus the mean of the top_n teams by total revenue"""
    daily = {}
    for name in sorted(revenues):
        series = revenues[name]
        days = market_day_of(series.index, tz)
        daily[name] = series.groupby(days).sum()
    if not daily:
        return pd.DataFrame(columns=["market_day", "team", "relative_cumulative_revenue"])
    table = pd.DataFrame(daily).sort_index().fillna(0.0).cumsum()
    totals = table.iloc[-1].sort_values(ascending=False, kind="mergesort")
    top = list(totals.index[:top_n])
    relative = table.sub(table[top].mean(axis=1), axis=0)
    relative.index.name = "market_day"
    long = relative.reset_index().melt(id_vars="market_day", var_name="team",
                                       value_name="relative_cumulative_revenue")
    long["market_day"] = pd.to_datetime(long["market_day"]).dt.strftime("%Y-%m-%d")
    return long


# --- Skill vs value ---

@dataclass
class SkillValueFit:
    """OLS of revenue (GBP m) on pinball (MWh) across teams"""
    slope: float
    intercept: float
    ci95: Tuple[float, float]
    excluded: List[str] = field(default_factory=list)
    n: int = 0
    r_value: float = float("nan")

    def to_dict(self):
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "ci95_low": self.ci95[0],
            "ci95_high": self.ci95[1],
            "n": self.n,
            "r_value": self.r_value,
            "excluded": ";".join(self.excluded),
        }


def skill_value_regression(rows: Iterable, pinball_threshold: float = 31.0,
                           outlier_exclusions: Sequence[str] = ()) -> SkillValueFit:
    """
    rows carry `team`, `pinball` (MWh) and `revenue` (GBP m), e.g. leaderboard rows.
    Teams at or above the threshold and named outliers are left out of the fit.
    """
    included, excluded = [], []
    for row in rows:
        pinball, revenue = float(row.pinball), float(row.revenue)
        if row.team in outlier_exclusions or not np.isfinite(pinball) or pinball >= pinball_threshold:
            excluded.append(row.team)
        else:
            included.append((pinball, revenue))
    if len(included) < 3:
        raise FitError(f"skill-value regression needs at least 3 teams, got {len(included)}")

    x, y = np.array(included).T
    if np.ptp(x) == 0:
        raise FitError("skill-value regression needs distinct pinball scores")
    fit = stats.linregress(x, y)
    half_width = stats.t.ppf(0.975, len(x) - 2) * fit.stderr
    return SkillValueFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        ci95=(float(fit.slope - half_width), float(fit.slope + half_width)),
        excluded=sorted(excluded),
        n=len(x),
        r_value=float(fit.rvalue),
    )
