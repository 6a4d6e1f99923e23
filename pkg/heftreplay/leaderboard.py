"""
Competition leaderboards.

Missed market days are filled from the benchmark (forecasts and bids), every
team is scored on both tracks, and eligible teams are ranked per track and on
the sum of their two ranks.
"""

import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .analytics import trade_frame
from .config import CompetitionWindow, LeaderboardRules
from .exceptions import DataError, DuplicateTeamError, InvalidInputError
from .interfaces import DEFAULT_IMPACT, TeamSeries
from .scoring import score_series
from .utils import market_day_of, market_day_periods, write_table

logger = logging.getLogger(__name__)

PORTFOLIO_CAP_MWH = 1800.0

LEADERBOARD_UNITS = {
    "team": "-",
    "pinball_mwh": "MWh",
    "revenue_gbp_m": "GBP million",
    "forecasting_rank": "rank",
    "trading_rank": "rank",
    "combined_rank": "rank",
    "report": "flag",
    "missed_submissions": "days",
    "student": "flag",
    "eligible": "flag",
    "organiser": "flag",
    "pinball_tie": "flag",
    "revenue_tie": "flag",
    "filled_periods": "periods",
    "sanitised_periods": "periods",
}


@dataclass
class TeamRecord:
    """A team's submissions plus the metadata the eligibility rules need"""
    name: str
    series: TeamSeries
    missed_submissions: Optional[int] = None
    report_submitted: bool = True
    student: bool = False
    organiser: bool = False

    def __post_init__(self):
        if self.missed_submissions is not None and self.missed_submissions < 0:
            raise InvalidInputError(f"{self.name}: missed_submissions must be >= 0")


@dataclass
class LeaderboardRow:
    team: str
    pinball: float
    revenue: float
    forecast_rank: Optional[int] = None
    trading_rank: Optional[int] = None
    combined_rank: Optional[int] = None
    eligible: bool = False
    missed_submissions: int = 0
    report_submitted: bool = True
    student: bool = False
    organiser: bool = False
    pinball_tie: bool = False
    revenue_tie: bool = False
    filled_periods: int = 0
    sanitised_periods: int = 0

    def to_dict(self):
        return asdict(self)


def fill_missing(team: Union[TeamRecord, TeamSeries], benchmark: TeamSeries,
                 window: Optional[CompetitionWindow] = None) -> TeamSeries:
    """
    Take forecasts and bids from the benchmark for every market day on which
    the team submitted nothing. Filled periods carry filled=True.
    """
    series = team.series if isinstance(team, TeamRecord) else team
    window = window or CompetitionWindow()
    own = series.frame
    own_days = set(market_day_of(own.index, window.timezone).date) if len(own) else set()

    pieces = [own]
    for day in window.market_days():
        if day in own_days:
            continue
        periods = market_day_periods(day, window.timezone)
        missing = periods.difference(benchmark.frame.index)
        if len(missing):
            raise DataError(f"benchmark has no submission for {len(missing)} periods of {day}, "
                            f"needed to fill {series.name}")
        filled = benchmark.frame.loc[periods].copy()
        filled["filled"] = True
        pieces.append(filled)

    if len(pieces) == 1:
        return series
    frame = pd.concat(pieces)
    logger.info(f"{series.name}: filled {len(pieces) - 1} missed market days from the benchmark")
    return TeamSeries(name=series.name, frame=frame)


def filled_days(series: TeamSeries, tz: str = "Europe/London") -> int:
    if not series.filled.any():
        return 0
    return int(market_day_of(series.periods[series.filled.to_numpy()], tz).nunique())


def sanitize_forecasts(series: TeamSeries, bound: float = PORTFOLIO_CAP_MWH,
                       tolerance: float = 1e-6) -> pd.DatetimeIndex:
    """Periods whose quantiles lie outside [-tolerance, bound + tolerance]"""
    q = series.quantiles.to_numpy(dtype=float)
    bad = ~np.isfinite(q).all(axis=1) | (q > bound + tolerance).any(axis=1) | (q < -tolerance).any(axis=1)
    return series.periods[bad]


def score_team(record: TeamRecord, prices: pd.DataFrame, actuals: pd.Series,
               k: float = DEFAULT_IMPACT, rules: Optional[LeaderboardRules] = None,
               benchmark: Optional[TeamSeries] = None,
               window: Optional[CompetitionWindow] = None) -> LeaderboardRow:
    """Unranked leaderboard row for one team"""
    rules = rules or LeaderboardRules()
    window = window or CompetitionWindow()
    series = record.series
    if benchmark is not None and record.name != rules.benchmark_team:
        series = fill_missing(series, benchmark, window)
    missed = record.missed_submissions if record.missed_submissions is not None \
        else filled_days(series, window.timezone)

    excluded = None
    if record.name in rules.sanitize_teams:
        bound = rules.sanitize_bound if rules.sanitize_bound is not None else PORTFOLIO_CAP_MWH
        excluded = sanitize_forecasts(series, bound)
        logger.warning(f"{record.name}: {len(excluded)} implausible periods excluded from pinball")

    result = score_series(series, actuals, window=window, excluded_periods=excluded)
    revenue = trade_frame(series, prices, actuals, k, window).total_revenue / 1e6
    organiser = record.organiser or record.name in rules.organiser_teams
    eligible = (not organiser
                and (record.report_submitted or not rules.require_report)
                and missed <= rules.max_missed)
    return LeaderboardRow(
        team=record.name,
        pinball=result.overall,
        revenue=revenue,
        eligible=eligible,
        missed_submissions=int(missed),
        report_submitted=record.report_submitted,
        student=record.student,
        organiser=organiser,
        filled_periods=int(series.filled.sum()),
        sanitised_periods=0 if excluded is None else int(len(excluded)),
    )


def _track_ranks(rows: List[LeaderboardRow], attr: str, descending: bool) -> Dict[str, int]:
    # exact ties fall back to team-name order and are flagged by the caller
    ordered = sorted(rows, key=lambda r: (-getattr(r, attr) if descending else getattr(r, attr), r.team))
    return {r.team: i + 1 for i, r in enumerate(ordered)}


def _tied(rows: List[LeaderboardRow], attr: str) -> set:
    counts = pd.Series([getattr(r, attr) for r in rows]).value_counts()
    values = set(counts[counts > 1].index)
    return {r.team for r in rows if getattr(r, attr) in values}


def rank_rows(rows: Sequence[LeaderboardRow]) -> List[LeaderboardRow]:
    """
    Assign ranks among eligible rows: pinball ascending, revenue descending,
    then the rank sum ascending with ties going to the better forecaster.
    Output is ordered by pinball.
    """
    names = [r.team for r in rows]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateTeamError(f"duplicate team names: {dupes}")

    eligible = [r for r in rows if r.eligible]
    forecast = _track_ranks(eligible, "pinball", descending=False)
    trading = _track_ranks(eligible, "revenue", descending=True)
    combined_order = sorted(eligible, key=lambda r: (forecast[r.team] + trading[r.team], forecast[r.team]))
    combined = {r.team: i + 1 for i, r in enumerate(combined_order)}
    pinball_ties = _tied(eligible, "pinball")
    revenue_ties = _tied(eligible, "revenue")

    ranked = []
    for row in rows:
        if row.eligible:
            row = replace(row, forecast_rank=forecast[row.team], trading_rank=trading[row.team],
                          combined_rank=combined[row.team], pinball_tie=row.team in pinball_ties,
                          revenue_tie=row.team in revenue_ties)
        else:
            row = replace(row, forecast_rank=None, trading_rank=None, combined_rank=None)
        ranked.append(row)
    if pinball_ties or revenue_ties:
        logger.warning(f"exact score ties resolved by team name: {sorted(pinball_ties | revenue_ties)}")
    return sorted(ranked, key=lambda r: (r.pinball, r.team))


def build_leaderboard(teams: Sequence[TeamRecord], prices: pd.DataFrame, actuals: pd.Series,
                      k: float = DEFAULT_IMPACT, rules: Optional[LeaderboardRules] = None,
                      benchmark: Optional[TeamSeries] = None,
                      window: Optional[CompetitionWindow] = None) -> List[LeaderboardRow]:
    names = [t.name for t in teams]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateTeamError(f"duplicate team names: {dupes}")
    rows = [score_team(t, prices, actuals, k, rules, benchmark, window) for t in teams]
    return rank_rows(rows)


def leaderboard_frame(rows: Iterable[LeaderboardRow]) -> pd.DataFrame:
    records = [{
        "team": r.team,
        "pinball_mwh": r.pinball,
        "revenue_gbp_m": r.revenue,
        "forecasting_rank": r.forecast_rank,
        "trading_rank": r.trading_rank,
        "combined_rank": r.combined_rank,
        "report": int(r.report_submitted),
        "missed_submissions": r.missed_submissions,
        "student": int(r.student),
        "eligible": int(r.eligible),
        "organiser": int(r.organiser),
        "pinball_tie": int(r.pinball_tie),
        "revenue_tie": int(r.revenue_tie),
        "filled_periods": r.filled_periods,
        "sanitised_periods": r.sanitised_periods,
    } for r in rows]
    frame = pd.DataFrame(records, columns=list(LEADERBOARD_UNITS))
    for col in ("forecasting_rank", "trading_rank", "combined_rank"):
        frame[col] = frame[col].astype("Int64")
    return frame


def write_leaderboard(rows: Iterable[LeaderboardRow], path: Union[str, Path], config_hash: str) -> Path:
    return write_table(leaderboard_frame(rows), path, "leaderboard", LEADERBOARD_UNITS, config_hash)


def _rank_text(rank: Optional[int]) -> str:
    return "-" if rank is None else str(rank)


def format_leaderboard(rows: Iterable[LeaderboardRow]) -> str:
    """Plain-text leaderboard: pinball and revenue at two decimals"""
    lines = [f"{'Team':<24} {'Pinball':>8} {'Rev £m':>8} {'F':>3} {'T':>3} {'C':>3} {'Missed':>6}"]
    for r in rows:
        lines.append(f"{r.team:<24} {r.pinball:>8.2f} {r.revenue:>8.2f} {_rank_text(r.forecast_rank):>3} "
                     f"{_rank_text(r.trading_rank):>3} {_rank_text(r.combined_rank):>3} {r.missed_submissions:>6}")
    return "\n".join(lines)
