"""
Replay Orchestrator.
Fans per-team and per-strategy work out to worker threads and collects the
results in sorted name order.
"""

import asyncio
import logging
from typing import Callable, Dict, List, Optional

import pandas as pd

from .analytics import TradeFrame, trade_frame
from .config import AggregationConfig, RunConfig
from .interfaces import TeamSeries
from .leaderboard import LeaderboardRow, TeamRecord, fill_missing, rank_rows, sanitize_forecasts, score_team
from .quantcomb import QuantileRegressionModel, combine_hybrid_frame, fit_meta_models
from .scoring import PinballResult, score_series
from .strategies import StrategyBids, create_strategy, generate_bids

logger = logging.getLogger(__name__)


class ReplayOrchestrator:
    def __init__(self, config: RunConfig, prices: pd.DataFrame, actuals: pd.Series,
                 external_spreads: Optional[pd.Series] = None):
        self.config = config
        self.prices = prices
        self.actuals = actuals
        self.external_spreads = external_spreads

    async def _gather(self, jobs: Dict[str, Callable]) -> Dict[str, object]:
        names = sorted(jobs)
        results = await asyncio.gather(*(asyncio.to_thread(jobs[name]) for name in names))
        return dict(zip(names, results))

    def fill_teams(self, teams: Dict[str, TeamSeries]) -> Dict[str, TeamSeries]:
        """Benchmark-fill every team's missed market days (when a benchmark is present)"""
        rules = self.config.leaderboard
        benchmark = teams.get(rules.benchmark_team)
        if benchmark is None:
            logger.warning(f"No {rules.benchmark_team} submissions; missed days are left unfilled")
            return dict(teams)
        return {name: series if name == rules.benchmark_team else fill_missing(series, benchmark, self.config.window)
                for name, series in teams.items()}

    async def score_teams(self, teams: Dict[str, TeamSeries]) -> Dict[str, PinballResult]:
        rules = self.config.leaderboard
        bound = rules.sanitize_bound if rules.sanitize_bound is not None else self.config.bid_cap

        def job(series: TeamSeries):
            excluded = sanitize_forecasts(series, bound) if series.name in rules.sanitize_teams else None
            return lambda: score_series(series, self.actuals, window=self.config.window, excluded_periods=excluded)

        results = await self._gather({name: job(series) for name, series in teams.items()})
        logger.info(f"Scored {len(results)} teams")
        return results

    async def trade_teams(self, teams: Dict[str, TeamSeries]) -> Dict[str, TradeFrame]:
        def job(series: TeamSeries):
            return lambda: trade_frame(series, self.prices, self.actuals, self.config.k, self.config.window)

        results = await self._gather({name: job(series) for name, series in teams.items()})
        logger.info(f"Settled {len(results)} teams")
        return results

    async def leaderboard_rows(self, records: List[TeamRecord],
                               benchmark: Optional[TeamSeries] = None) -> List[LeaderboardRow]:
        def job(record: TeamRecord):
            return lambda: score_team(record, self.prices, self.actuals, self.config.k,
                                      self.config.leaderboard, benchmark, self.config.window)

        rows = await self._gather({r.name: job(r) for r in records})
        return rank_rows([rows[name] for name in sorted(rows)])

    async def backtest_strategies(self, forecasts: TeamSeries) -> Dict[str, StrategyBids]:
        def job(strategy):
            return lambda: generate_bids(strategy, forecasts, self.prices, self.actuals,
                                         self.config.window, self.external_spreads)

        strategies = [create_strategy(c) for c in self.config.strategy_configs()]
        results = await self._gather({s.name: job(s) for s in strategies})
        logger.info(f"Backtested {len(results)} strategies on {forecasts.name} forecasts")
        return results

    def trade_frame_for(self, series: TeamSeries) -> TradeFrame:
        return trade_frame(series, self.prices, self.actuals, self.config.k, self.config.window)

    async def fit_meta_models(self, training: Dict[str, tuple]) -> Dict[str, Dict[float, QuantileRegressionModel]]:
        """training maps target -> (base frames, realised target series); one job per target"""
        def job(bases: List[pd.DataFrame], target: pd.Series):
            return lambda: fit_meta_models(bases, target)

        results = await self._gather({name: job(*pair) for name, pair in training.items()})
        logger.info(f"Fitted meta-models for {', '.join(results)}")
        return results

    async def combine_forecasts(self, wind_bases: List[pd.DataFrame], solar_bases: List[pd.DataFrame],
                                models: Dict[str, Dict[float, QuantileRegressionModel]],
                                aggregation: AggregationConfig,
                                wind_capacity: Optional[pd.Series] = None,
                                solar_capacity: Optional[pd.Series] = None) -> pd.DataFrame:
        return await asyncio.to_thread(combine_hybrid_frame, wind_bases, solar_bases, models["wind"],
                                       models["solar"], aggregation, wind_capacity, solar_capacity)
