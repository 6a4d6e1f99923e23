"""
heftreplay - HEFTcom competition replay
=======================================
Backtest engine for the Hybrid Energy Forecasting and Trading Competition:
pinball scoring, day-ahead settlement with a price-maker imbalance price,
bidding strategies, trading analytics and leaderboard reconstruction.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .analytics import (
    bin_opportunity_cost,
    capture_ratio,
    direction_stats_from_frame,
    median_bid_uplift,
    opportunity_cost,
    relative_cumulative_revenue,
    revenue_bounds,
    risk_reward,
    skill_value_regression,
    strategic_bid_histogram,
    trade_stats_from_frame,
)
from .config import BASE_TARGETS, RunConfig
from .exceptions import EmptyEvaluationError, FitError, InvalidInputError, OutputError
from .ingest import ReplayData, load_dataset
from .interfaces import TeamSeries
from .leaderboard import TeamRecord, format_leaderboard, write_leaderboard
from .orchestrator import ReplayOrchestrator
from .quantcomb import aggregate_hybrid_frame, save_models
from .scoring import expanding_pinball, reliability_diagram, score_series
from .utils import market_day_of, write_table

logger = logging.getLogger(__name__)

SCORE_OUTPUTS = ("pinball_scores.csv", "reliability.csv", "expanding_pinball.csv", "inclusion_mask.csv")
TRADE_OUTPUTS = ("revenue_totals.csv", "revenue_series.csv", "trade_stats.csv", "revenue_bounds.csv",
                 "median_uplift.csv")
LEADERBOARD_OUTPUTS = ("leaderboard.csv", "skill_value.csv")
STRATEGY_OUTPUTS = ("strategy_comparison.csv", "strategy_bids.csv")
COMBINE_OUTPUTS = ("combined_forecasts.csv", "combined_scores.csv", "meta_models_wind.txt", "meta_models_solar.txt")
VALIDATION_OUTPUTS = ("validation_report.json",)

PERIOD_UNITS = {"team": "-", "period_start_utc": "UTC"}


class HeftReplay:
    """Facade over loading, orchestration and table writing for one run configuration"""

    def __init__(self, config: RunConfig, data: Optional[ReplayData] = None):
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.config_hash = config.config_hash()
        self._data = data
        self._orchestrator: Optional[ReplayOrchestrator] = None

    # --- Data ---

    @property
    def data(self) -> ReplayData:
        if self._data is None:
            self._data = load_dataset(self.config)
        return self._data

    @property
    def orchestrator(self) -> ReplayOrchestrator:
        if self._orchestrator is None:
            self._orchestrator = ReplayOrchestrator(self.config, self.data.prices, self.data.actuals,
                                                    self.data.external_spreads)
        return self._orchestrator

    def teams(self) -> Dict[str, TeamSeries]:
        """Benchmark-filled submissions of the selected teams"""
        every = self.data.team_series()
        filled = self.orchestrator.fill_teams(every)
        if self.config.teams is not None:
            filled = {n: s for n, s in filled.items() if n in self.config.teams}
        if not filled:
            raise InvalidInputError("no team submissions to evaluate")
        return filled

    def _write(self, frame: pd.DataFrame, name: str, table: str, units: Dict[str, str]) -> Path:
        return write_table(frame, self.out_dir / name, table, units, self.config_hash)

    def _check_outputs(self, names) -> List[Path]:
        paths = [self.out_dir / n for n in names]
        missing = [str(p) for p in paths if not p.exists()]
        if missing:
            raise OutputError(f"declared outputs missing: {missing}")
        return paths

    # --- Commands ---

    async def score(self) -> List[Path]:
        """Pinball scores, reliability diagrams and expanding pinball per team"""
        teams = self.teams()
        results = await self.orchestrator.score_teams(teams)

        scores, reliability, expanding, mask = [], [], [], []
        for name, result in results.items():
            scores.append({"team": name, "pinball_mwh": result.overall, "daytime_mwh": result.daytime,
                           "overnight_mwh": result.overnight, "periods": result.periods,
                           "excluded_periods": result.excluded})
            diagram = reliability_diagram(teams[name], self.data.actuals, self.config.window, split_day_night=True)
            for level, row in diagram.iterrows():
                reliability.append({"team": name, "level": level, "coverage_all": row["all"],
                                    "coverage_daytime": row["daytime"], "coverage_overnight": row["overnight"]})
            curve = expanding_pinball(result.per_period)
            expanding.append(pd.DataFrame({"team": name, "period_start_utc": curve.index,
                                           "expanding_pinball_mwh": curve.to_numpy()}))
            missing = result.inclusion[~result.inclusion]
            mask.append(pd.DataFrame({"team": name, "period_start_utc": missing.index, "reason": "missing actual"}))

        self._write(pd.DataFrame(scores), "pinball_scores.csv", "pinball_scores",
                    {"team": "-", "pinball_mwh": "MWh", "daytime_mwh": "MWh", "overnight_mwh": "MWh",
                     "periods": "periods", "excluded_periods": "periods"})
        self._write(pd.DataFrame(reliability), "reliability.csv", "reliability",
                    {"team": "-", "level": "probability", "coverage_all": "fraction",
                     "coverage_daytime": "fraction", "coverage_overnight": "fraction"})
        self._write(pd.concat(expanding, ignore_index=True), "expanding_pinball.csv", "expanding_pinball",
                    {**PERIOD_UNITS, "expanding_pinball_mwh": "MWh"})
        self._write(pd.concat(mask, ignore_index=True), "inclusion_mask.csv", "inclusion_mask",
                    {**PERIOD_UNITS, "reason": "-"})
        return self._check_outputs(SCORE_OUTPUTS)

    async def trade(self) -> List[Path]:
        """Revenue, trading statistics and analytics tables per team"""
        teams = self.teams()
        frames = await self.orchestrator.trade_teams(teams)
        analytics = self.config.analytics
        k = self.config.k
        prices, actuals, window = self.data.prices, self.data.actuals, self.config.window
        declared = list(TRADE_OUTPUTS)

        totals, series, stats, uplift = [], [], [], []
        for name, tf in frames.items():
            totals.append({"team": name, "revenue_gbp": tf.total_revenue, "revenue_gbp_m": tf.total_revenue / 1e6,
                           "periods": len(tf.frame), "excluded_periods": tf.excluded})
            series.append(pd.DataFrame({"team": name, "period_start_utc": tf.frame.index,
                                        "revenue_gbp": tf.revenue.to_numpy()}))
            if tf.frame.empty:
                continue
            stats.append({"team": name, **trade_stats_from_frame(tf.frame, analytics.var_level,
                                                                 analytics.volume_epsilon).to_dict()})
            uplift.append({"team": name, **median_bid_uplift(teams[name], prices, actuals, k,
                                                             self.config.bid_floor, self.config.bid_cap, window)})

        self._write(pd.DataFrame(totals), "revenue_totals.csv", "revenue_totals",
                    {"team": "-", "revenue_gbp": "GBP", "revenue_gbp_m": "GBP million",
                     "periods": "periods", "excluded_periods": "periods"})
        self._write(pd.concat(series, ignore_index=True), "revenue_series.csv", "revenue_series",
                    {**PERIOD_UNITS, "revenue_gbp": "GBP"})
        self._write(pd.DataFrame(stats), "trade_stats.csv", "trade_stats",
                    {"team": "-", "win_rate": "fraction", "relative_bid_volume": "ratio",
                     "trade_vwap": "GBP/MWh", "production_vwap": "GBP/MWh", "sharpe": "ratio",
                     "sortino": "ratio", "var5": "GBP", "es5": "GBP", "periods": "periods",
                     "total_revenue": "GBP", "sharpe_defined": "flag", "sortino_defined": "flag"})
        bounds = revenue_bounds(prices, actuals, k, window)
        self._write(pd.DataFrame([{"bound": b, "revenue_gbp": bounds[b], "revenue_gbp_m": bounds[b] / 1e6}
                                  for b in ("perfect_forecast", "perfect_decision")]),
                    "revenue_bounds.csv", "revenue_bounds",
                    {"bound": "-", "revenue_gbp": "GBP", "revenue_gbp_m": "GBP million"})
        self._write(pd.DataFrame(uplift), "median_uplift.csv", "median_uplift",
                    {"team": "-", "revenue": "GBP", "median_bid_revenue": "GBP", "uplift": "GBP",
                     "uplift_per_mwh": "GBP/MWh"})

        if analytics.opportunity_cost:
            binned = []
            for name in frames:
                costs = opportunity_cost(teams[name], prices, actuals, k, analytics.volume_epsilon, window)
                table = bin_opportunity_cost(costs, analytics.opportunity_bin_edges)
                table.insert(0, "team", name)
                binned.append(table)
            self._write(pd.concat(binned, ignore_index=True), "opportunity_cost.csv", "opportunity_cost",
                        {"team": "-", "pinball_low": "MWh", "pinball_high": "MWh", "count": "periods",
                         "q25": "GBP/MWh", "median": "GBP/MWh", "q75": "GBP/MWh"})
            declared.append("opportunity_cost.csv")
        if analytics.capture_ratio:
            rows = []
            for name in frames:
                ratio = capture_ratio(teams[name], prices, actuals, k, window)
                rows.append(pd.DataFrame({"team": name, "slot": ratio.index, "capture_ratio": ratio.to_numpy()}))
            self._write(pd.concat(rows, ignore_index=True), "capture_ratio.csv", "capture_ratio",
                        {"team": "-", "slot": "UTC half-hour of day", "capture_ratio": "ratio"})
            declared.append("capture_ratio.csv")
        if analytics.bid_histogram:
            rows = []
            for name in frames:
                hist = strategic_bid_histogram(teams[name], analytics.histogram_bin_width, analytics.histogram_range)
                hist.insert(0, "team", name)
                rows.append(hist)
            self._write(pd.concat(rows, ignore_index=True), "bid_histogram.csv", "bid_histogram",
                        {"team": "-", "bin_low": "MWh", "bin_high": "MWh", "count": "periods"})
            declared.append("bid_histogram.csv")
        if analytics.risk_reward:
            table = risk_reward({n: tf.frame for n, tf in frames.items()}, analytics.exclude_first_days,
                                analytics.var_level, window.start, window.timezone)
            self._write(table, "risk_reward.csv", "risk_reward",
                        {"team": "-", "var5": "GBP", "production_vwap": "GBP/MWh"})
            declared.append("risk_reward.csv")
        if analytics.rolling_revenue:
            table = relative_cumulative_revenue({n: tf.revenue for n, tf in frames.items()},
                                                analytics.rolling_top_n, window.timezone)
            self._write(table, "rolling_revenue.csv", "rolling_revenue",
                        {"market_day": "local date", "team": "-", "relative_cumulative_revenue": "GBP"})
            declared.append("rolling_revenue.csv")
        if analytics.direction_stats:
            rows = [{"team": n, **direction_stats_from_frame(tf.frame).to_dict()} for n, tf in frames.items()]
            self._write(pd.DataFrame(rows), "direction_stats.csv", "direction_stats",
                        {"team": "-", "correct_bid_direction": "fraction", "imbalance_opposite_spread": "fraction",
                         "bid_decidable": "periods", "imbalance_decidable": "periods"})
            declared.append("direction_stats.csv")
        return self._check_outputs(declared)

    def team_records(self) -> List[TeamRecord]:
        meta = self.data.teams
        records = []
        for name, series in self.data.team_series(self.config.teams).items():
            row = meta.loc[name] if name in meta.index else None
            missed = None
            if row is not None and not pd.isna(row["missed_submissions"]):
                missed = int(row["missed_submissions"])
            records.append(TeamRecord(
                name=name,
                series=series,
                missed_submissions=missed,
                report_submitted=bool(row["report"]) if row is not None else True,
                student=bool(row["student"]) if row is not None else False,
                organiser=bool(row["organiser"]) if row is not None else False,
            ))
        return records

    async def leaderboard(self) -> List[Path]:
        """Final leaderboard and the skill-value regression"""
        benchmark = self.data.team_series().get(self.config.leaderboard.benchmark_team)
        rows = await self.orchestrator.leaderboard_rows(self.team_records(), benchmark)
        write_leaderboard(rows, self.out_dir / "leaderboard.csv", self.config_hash)
        logger.info("Leaderboard:\n" + format_leaderboard(rows))

        analytics = self.config.analytics
        try:
            fit = skill_value_regression(rows, analytics.pinball_threshold, analytics.outlier_exclusions)
            skill = pd.DataFrame([fit.to_dict()])
        except FitError as e:
            logger.warning(f"Skill-value regression skipped: {e}")
            skill = pd.DataFrame([{"slope": np.nan, "intercept": np.nan, "ci95_low": np.nan,
                                   "ci95_high": np.nan, "n": 0, "r_value": np.nan, "excluded": ""}])
        self._write(skill, "skill_value.csv", "skill_value",
                    {"slope": "GBP million per MWh", "intercept": "GBP million", "ci95_low": "GBP million per MWh",
                     "ci95_high": "GBP million per MWh", "n": "teams", "r_value": "-", "excluded": "-"})
        return self._check_outputs(LEADERBOARD_OUTPUTS)

    async def strategy_backtest(self) -> List[Path]:
        """Replay every configured strategy on the source team's forecasts"""
        source = self.config.source_team
        teams = self.orchestrator.fill_teams(self.data.team_series())
        if source not in teams:
            raise InvalidInputError(f"source team {source!r} has no submissions")
        forecasts = teams[source]
        results = await self.orchestrator.backtest_strategies(forecasts)

        prices, actuals, k = self.data.prices, self.data.actuals, self.config.k
        baseline_team = forecasts.with_bids(forecasts.median.clip(self.config.bid_floor, self.config.bid_cap),
                                            name="median_baseline")
        baseline = self.orchestrator.trade_frame_for(baseline_team)

        rows, bids = [], []
        for name, result in results.items():
            tf = self.orchestrator.trade_frame_for(forecasts.with_bids(result.bids, name=name))
            common = tf.frame.index.intersection(baseline.frame.index)
            uplift = float(tf.revenue.loc[common].sum() - baseline.revenue.loc[common].sum())
            try:
                stats = trade_stats_from_frame(tf.frame, self.config.analytics.var_level).to_dict()
            except EmptyEvaluationError:
                stats = {}
            rows.append({"strategy": name, "revenue_gbp": tf.total_revenue, "uplift_vs_median_gbp": uplift,
                         **{key: stats.get(key) for key in ("win_rate", "relative_bid_volume", "sharpe",
                                                            "sortino", "var5", "es5")},
                         **{key: v for key, v in result.to_dict().items() if key != "strategy"}})
            bids.append(pd.DataFrame({"strategy": name, "period_start_utc": result.bids.index,
                                      "bid_mwh": result.bids.to_numpy()}))

        self._write(pd.DataFrame(rows), "strategy_comparison.csv", "strategy_comparison",
                    {"strategy": "-", "revenue_gbp": "GBP", "uplift_vs_median_gbp": "GBP", "win_rate": "fraction",
                     "relative_bid_volume": "ratio", "sharpe": "ratio", "sortino": "ratio", "var5": "GBP",
                     "es5": "GBP", "periods": "periods", "fallback_periods": "periods", "fallback_days": "days"})
        self._write(pd.concat(bids, ignore_index=True) if bids else pd.DataFrame(columns=["strategy", "period_start_utc", "bid_mwh"]),
                    "strategy_bids.csv", "strategy_bids",
                    {"strategy": "-", "period_start_utc": "UTC", "bid_mwh": "MWh"})
        logger.info(f"Baseline: median bids on {source} forecasts, revenue {baseline.total_revenue:,.0f} GBP")
        return self._check_outputs(STRATEGY_OUTPUTS)

    async def combine(self) -> List[Path]:
        """
        Fit per-level meta-models on base forecasts from before the window,
        then combine wind and solar base forecasts inside the window into one
        hybrid forecast (capacity clipping, meta-prediction, aggregation).
        """
        data, window = self.data, self.config.window
        missing = [t for t in BASE_TARGETS if f"{t}_mwh" not in data.production.columns]
        if missing:
            raise InvalidInputError(f"combine needs per-technology production, missing {missing}")
        bases = {t: data.base_frames(t) for t in BASE_TARGETS}
        for target, frames in bases.items():
            if not frames:
                raise InvalidInputError(f"no {target} base forecasts in {self.config.data_path('base_forecasts')}")

        history = market_day_of(data.production.index, window.timezone) < pd.Timestamp(window.start)
        training = {t: (list(bases[t].values()), data.production.loc[history, f"{t}_mwh"]) for t in BASE_TARGETS}
        models = await self.orchestrator.fit_meta_models(training)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        for target in BASE_TARGETS:
            save_models(models[target], self.out_dir / f"meta_models_{target}.txt")

        in_window = {t: [f[window.contains(f.index)] for f in bases[t].values()] for t in BASE_TARGETS}
        combined = await self.orchestrator.combine_forecasts(
            in_window["wind"], in_window["solar"], models, self.config.aggregation,
            data.capacity_for("wind"), data.capacity_for("solar"))
        out = combined.copy()
        out.insert(0, "period_start_utc", combined.index)
        self._write(out.reset_index(drop=True), "combined_forecasts.csv", "combined_forecasts",
                    {"period_start_utc": "UTC", **{c: "MWh" for c in combined.columns}})

        # level-wise sums of models that forecast both technologies, for comparison
        candidates = {"combined": combined}
        for name in sorted(set(bases["wind"]) & set(bases["solar"])):
            wind = bases["wind"][name][window.contains(bases["wind"][name].index)]
            solar = bases["solar"][name][window.contains(bases["solar"][name].index)]
            candidates[f"{name}_sum"] = aggregate_hybrid_frame(wind, solar)
        rows = []
        for name, frame in candidates.items():
            result = score_series(frame, data.actuals, window)
            rows.append({"forecast": name, "pinball_mwh": result.overall, "daytime_mwh": result.daytime,
                         "overnight_mwh": result.overnight, "periods": result.periods})
        self._write(pd.DataFrame(rows), "combined_scores.csv", "combined_scores",
                    {"forecast": "-", "pinball_mwh": "MWh", "daytime_mwh": "MWh", "overnight_mwh": "MWh",
                     "periods": "periods"})
        logger.info(f"Combined forecast pinball {rows[0]['pinball_mwh']:.2f} MWh "
                    f"(rho={self.config.aggregation.rho}, seed={self.config.aggregation.seed})")
        return self._check_outputs(COMBINE_OUTPUTS)

    async def validate_data(self) -> List[Path]:
        """Load every input and write the validation report"""
        self.config.validate()
        reports = self.data.reports
        path = self.out_dir / "validation_report.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"config_hash": self.config_hash, "reports": [r.to_dict() for r in reports]}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        for report in reports:
            logger.info(report.summary())
        return self._check_outputs(VALIDATION_OUTPUTS)
