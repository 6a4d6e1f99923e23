"""
Shared synthetic market fixtures.

Market days are plain UTC days starting 2024-01-01, matching SYNTHETIC_CONFIG.
Prices and production also cover a history of days before the window so that
spread climatologies and learned bidders have something to look at.
"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm

from heftreplay import QUANTILE_COLUMNS, QUANTILE_LEVELS, SYNTHETIC_CONFIG, TeamSeries
from heftreplay.ingest import write_series

WINDOW_START = pd.Timestamp("2024-01-01", tz="UTC")
WINDOW_DAYS = 14
HISTORY_DAYS = 14
Z = norm.ppf(QUANTILE_LEVELS)


def synthetic_market(days: int = WINDOW_DAYS, history_days: int = HISTORY_DAYS, seed: int = 7):
    """(production, prices) frames indexed by UTC period start"""
    rng = np.random.default_rng(seed)
    periods = pd.date_range(WINDOW_START - pd.Timedelta(days=history_days),
                            periods=48 * (days + history_days), freq="30min", tz="UTC",
                            name="period_start_utc")
    n = len(periods)
    hours = np.asarray(periods.hour + periods.minute / 60.0, dtype=float)
    solar = np.clip(300.0 * np.sin(np.pi * (hours - 6.0) / 12.0), 0.0, None)
    wind = rng.uniform(300.0, 700.0, n)
    da = 60.0 + 15.0 * np.sin(2 * np.pi * hours / 24.0) + rng.normal(0.0, 2.0, n)
    spread = 8.0 * np.cos(2 * np.pi * hours / 24.0) + rng.normal(0.0, 6.0, n)
    production = pd.DataFrame({"wind_mwh": wind, "solar_mwh": solar, "total_mwh": wind + solar}, index=periods)
    prices = pd.DataFrame({"da_price": da, "ss_price": da + spread}, index=periods)
    return production, prices


def team_frame(actuals: pd.Series, sd: float, seed: int, bid_offset: float = 0.0) -> pd.DataFrame:
    """Gaussian quantile forecasts around a noisy point forecast; bids at q50 - bid_offset"""
    rng = np.random.default_rng(seed)
    point = actuals.to_numpy() + rng.normal(0.0, sd, len(actuals))
    values = np.clip(point[:, None] + sd * Z[None, :], 0.0, None)
    frame = pd.DataFrame(values, index=actuals.index, columns=list(QUANTILE_COLUMNS))
    frame["bid"] = np.clip(frame["q50"] - bid_offset, 0.0, 1800.0)
    return frame


def perfect_frame(actuals: pd.Series) -> pd.DataFrame:
    """Every quantile and the bid equal the realised production"""
    frame = pd.DataFrame(np.repeat(actuals.to_numpy()[:, None], 9, axis=1), index=actuals.index,
                         columns=list(QUANTILE_COLUMNS))
    frame["bid"] = actuals.to_numpy()
    return frame


def window_actuals(production: pd.DataFrame, days: int = WINDOW_DAYS) -> pd.Series:
    end = WINDOW_START + pd.Timedelta(days=days)
    total = production["total_mwh"]
    return total[(total.index >= WINDOW_START) & (total.index < end)]


def write_archive(root: Path, perfect_source: bool = False) -> Path:
    """
    Write production, prices, submissions and teams files.

    Teams: alpha and beta submit every day, gamma only the first eight days
    (six missed), Benchmark is the organiser's reference.
    """
    root.mkdir(parents=True, exist_ok=True)
    production, prices = synthetic_market()
    actuals = window_actuals(production)

    teams = {
        "alpha": perfect_frame(actuals) if perfect_source else team_frame(actuals, 20.0, seed=1),
        "beta": team_frame(actuals, 40.0, seed=2, bid_offset=15.0),
        "gamma": team_frame(actuals, 30.0, seed=3).iloc[:8 * 48],
        "Benchmark": team_frame(actuals, 80.0, seed=4),
    }
    parts = []
    for name, frame in teams.items():
        part = frame.copy()
        part.insert(0, "team", name)
        parts.append(part)
    write_series(production, root / "production.csv")
    write_series(prices, root / "prices.csv")
    write_series(pd.concat(parts), root / "submissions.csv")
    pd.DataFrame({
        "team": ["alpha", "beta", "gamma", "Benchmark"],
        "report": ["yes", "yes", "yes", "no"],
        "student": ["no", "yes", "no", "no"],
        "organiser": ["no", "no", "no", "yes"],
    }).to_csv(root / "teams.csv", index=False)
    return root


def write_base_forecasts(root: Path, models=("m1", "m2"), wind_capacity: float = 650.0,
                         solar_capacity: float = 250.0, seed: int = 11) -> Path:
    """
    Write base_forecasts.csv and capacity.csv over history and window.

    Each base model is a noisy Gaussian forecast of one technology with
    independent jitter on every quantile, so meta-model designs stay full rank.
    """
    root.mkdir(parents=True, exist_ok=True)
    production, _ = synthetic_market()
    rng = np.random.default_rng(seed)
    parts = []
    for number, name in enumerate(models):
        for target, sd in (("wind", 40.0 + 10.0 * number), ("solar", 15.0 + 5.0 * number)):
            actual = production[f"{target}_mwh"].to_numpy()
            point = actual + rng.normal(0.0, sd, len(actual))
            values = point[:, None] + sd * Z[None, :] + rng.normal(0.0, 3.0, (len(actual), len(Z)))
            frame = pd.DataFrame(np.clip(np.sort(values, axis=1), 0.0, None), index=production.index,
                                 columns=list(QUANTILE_COLUMNS))
            frame.insert(0, "target", target)
            frame.insert(0, "model", name)
            parts.append(frame)
    write_series(pd.concat(parts), root / "base_forecasts.csv")
    capacity = pd.DataFrame({"wind_capacity_mwh": wind_capacity, "solar_capacity_mwh": solar_capacity},
                            index=production.index)
    write_series(capacity, root / "capacity.csv")
    return root


@pytest.fixture
def market():
    return synthetic_market()


@pytest.fixture
def window_production(market):
    production, _ = market
    return window_actuals(production)


@pytest.fixture
def alpha(window_production):
    return TeamSeries(name="alpha", frame=team_frame(window_production, 20.0, seed=1))


@pytest.fixture
def archive(tmp_path):
    return write_archive(tmp_path / "data")


@pytest.fixture
def synthetic_config(archive, tmp_path):
    return SYNTHETIC_CONFIG.with_overrides(data_dir=str(archive), out_dir=str(tmp_path / "out"))
