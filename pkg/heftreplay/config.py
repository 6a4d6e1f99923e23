"""
Configuration system for heftreplay.
Run configuration is a set of dataclasses loadable from YAML or JSON with one
section per concern (run, data, market, strategies, analytics, leaderboard,
aggregation).
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import ConfigError
from .interfaces import DEFAULT_IMPACT, QUANTILE_COLUMNS
from .utils import daterange, market_day_of, parse_window, stable_hash

try:
    import yaml
    HAS_YAML = True
except ImportError:
    HAS_YAML = False


# --- Competition calendar ---

@dataclass
class CompetitionWindow:
    """Inclusive range of market days; market days are local days in `timezone`"""
    start: date = date(2024, 2, 20)
    end: date = date(2024, 5, 19)
    timezone: str = "Europe/London"

    def __post_init__(self):
        if isinstance(self.start, str):
            self.start = date.fromisoformat(self.start)
        if isinstance(self.end, str):
            self.end = date.fromisoformat(self.end)
        if self.start > self.end:
            raise ConfigError(f"window start {self.start} is after end {self.end}")

    @classmethod
    def parse(cls, text: str, timezone: str = "Europe/London") -> 'CompetitionWindow':
        start, end = parse_window(text)
        return cls(start=start, end=end, timezone=timezone)

    def market_days(self) -> List[date]:
        return daterange(self.start, self.end)

    def contains(self, periods) -> np.ndarray:
        days = market_day_of(periods, self.timezone)
        return np.asarray((days >= pd.Timestamp(self.start)) & (days <= pd.Timestamp(self.end)))

    def to_dict(self) -> Dict[str, Any]:
        return {"start": self.start.isoformat(), "end": self.end.isoformat(), "timezone": self.timezone}


# --- Ingestion ---

CANONICAL_COLUMNS: Dict[str, Tuple[str, ...]] = {
    "production": ("wind_mwh", "solar_mwh", "total_mwh", "available_capacity_mwh"),
    "prices": ("da_price", "ss_price"),
    "submissions": ("team", "market_day", *QUANTILE_COLUMNS, "bid"),
    "capacity": ("wind_capacity_mwh", "solar_capacity_mwh"),
    "base_forecasts": ("model", "target", *QUANTILE_COLUMNS),
}

TEXT_COLUMNS = ("team", "market_day", "model", "target")
BASE_TARGETS = ("wind", "solar")


@dataclass
class SchemaMapping:
    """
    How one archive file maps onto a canonical series.

    columns maps canonical name -> source column; unmapped canonical columns are
    read under their own name. Unit scale factors are explicit, never guessed.
    """
    columns: Dict[str, str] = field(default_factory=dict)
    timestamp_column: str = "period_start_utc"
    timestamp_format: Optional[str] = None
    source_timezone: str = "UTC"
    scale: Dict[str, float] = field(default_factory=dict)

    def source(self, canonical: str) -> str:
        return self.columns.get(canonical, canonical)

    def factor(self, canonical: str) -> float:
        return float(self.scale.get(canonical, 1.0))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SchemaMapping':
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# --- Numerical components ---

@dataclass
class AggregationConfig:
    """Wind + solar quantile aggregation through a Gaussian copula"""
    rho: float = 1.0
    sample_count: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.sample_count < 1000:
            raise ConfigError(f"sample_count must be >= 1000, got {self.sample_count}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


STRATEGY_KINDS = ("median", "expected_optimal", "learned")


@dataclass
class StrategyConfig:
    """Bidding strategy settings"""
    kind: str = "median"
    name: Optional[str] = None
    k: float = DEFAULT_IMPACT
    bid_floor: float = 0.0
    bid_cap: float = 1800.0
    climatology_window_days: int = 28
    min_climatology_obs: int = 7
    price_lag_days: int = 7
    production_lag_days: int = 7
    mean_method: str = "interpolated"
    spread_source: str = "climatology"
    min_training_rows: int = 336
    feature_columns: Tuple[str, ...] = ("q50", "slot", "spread_clim")

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy kind: {self.kind}")
        if self.bid_floor > self.bid_cap:
            raise ConfigError(f"bid_floor {self.bid_floor} exceeds bid_cap {self.bid_cap}")
        if self.climatology_window_days < 1:
            raise ConfigError("climatology_window_days must be >= 1")
        if self.mean_method not in ("interpolated", "median"):
            raise ConfigError(f"unknown mean_method: {self.mean_method}")
        if self.spread_source not in ("climatology", "external"):
            raise ConfigError(f"unknown spread_source: {self.spread_source}")
        self.feature_columns = tuple(self.feature_columns)
        if self.name is None:
            self.name = self.kind

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["feature_columns"] = list(self.feature_columns)
        return d


@dataclass
class LeaderboardRules:
    """Eligibility and sanitising rules for the final leaderboard"""
    max_missed: int = 5
    require_report: bool = True
    benchmark_team: str = "Benchmark"
    organiser_teams: Tuple[str, ...] = ("Benchmark", "quantopia")
    sanitize_teams: Tuple[str, ...] = ()
    sanitize_bound: Optional[float] = None

    def __post_init__(self):
        self.organiser_teams = tuple(self.organiser_teams)
        self.sanitize_teams = tuple(self.sanitize_teams)
        if self.max_missed < 0:
            raise ConfigError("max_missed must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["organiser_teams"] = list(self.organiser_teams)
        d["sanitize_teams"] = list(self.sanitize_teams)
        return d


@dataclass
class AnalyticsConfig:
    """Which trading analytics to emit and their parameters"""
    opportunity_cost: bool = True
    capture_ratio: bool = True
    bid_histogram: bool = True
    risk_reward: bool = True
    rolling_revenue: bool = True
    direction_stats: bool = True
    var_level: float = 0.05
    volume_epsilon: float = 1e-6
    histogram_bin_width: float = 25.0
    histogram_range: float = 500.0
    opportunity_bin_edges: Tuple[float, ...] = (0.0, 10.0, 20.0, 40.0, 80.0, 160.0)
    exclude_first_days: int = 7
    rolling_top_n: int = 10
    pinball_threshold: float = 31.0
    outlier_exclusions: Tuple[str, ...] = ("LSEG Power Team",)

    def __post_init__(self):
        self.opportunity_bin_edges = tuple(float(e) for e in self.opportunity_bin_edges)
        self.outlier_exclusions = tuple(self.outlier_exclusions)
        if not 0.0 < self.var_level < 1.0:
            raise ConfigError(f"var_level must lie in (0, 1), got {self.var_level}")
        if self.histogram_bin_width <= 0:
            raise ConfigError("histogram_bin_width must be > 0")

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["opportunity_bin_edges"] = list(self.opportunity_bin_edges)
        d["outlier_exclusions"] = list(self.outlier_exclusions)
        return d


# --- Main Config ---

DEFAULT_FILES = {
    "production": "production.csv",
    "prices": "prices.csv",
    "submissions": "submissions.csv",
    "teams": "teams.csv",
    "capacity": "capacity.csv",
    "base_forecasts": "base_forecasts.csv",
}

OPTIONAL_KINDS = ("capacity", "base_forecasts")

SECTIONS = {
    "run": ("data_dir", "out_dir", "seed", "teams", "source_team"),
    "data": ("files", "mappings", "window", "external_spreads"),
    "market": ("k", "bid_floor", "bid_cap"),
}


@dataclass
class RunConfig:
    """
    Everything a reproducible run needs. Identical config + data + seed give
    byte-identical outputs.
    """
    data_dir: Union[str, Path] = "./data"
    out_dir: Union[str, Path] = "./heftreplay_output"
    # run-level seed; when set it replaces aggregation.seed
    seed: Optional[int] = None
    teams: Optional[List[str]] = None
    source_team: str = "SVK"

    files: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_FILES))
    mappings: Dict[str, SchemaMapping] = field(default_factory=dict)
    window: CompetitionWindow = field(default_factory=CompetitionWindow)
    external_spreads: Optional[str] = None

    k: float = DEFAULT_IMPACT
    bid_floor: float = 0.0
    bid_cap: float = 1800.0

    strategies: List[StrategyConfig] = field(default_factory=lambda: [
        StrategyConfig(kind="median"),
        StrategyConfig(kind="expected_optimal"),
        StrategyConfig(kind="learned"),
    ])
    analytics: AnalyticsConfig = field(default_factory=AnalyticsConfig)
    leaderboard: LeaderboardRules = field(default_factory=LeaderboardRules)
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)

    def __post_init__(self):
        if self.k <= 0:
            raise ConfigError(f"k must be > 0, got {self.k}")
        if self.bid_floor > self.bid_cap:
            raise ConfigError(f"bid_floor {self.bid_floor} exceeds bid_cap {self.bid_cap}")
        names = [s.name for s in self.strategies]
        if len(set(names)) != len(names):
            raise ConfigError(f"strategy names must be unique, got {names}")
        if self.seed is not None and self.seed != self.aggregation.seed:
            self.aggregation = replace(self.aggregation, seed=int(self.seed))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Create config from a sectioned (or flat) dictionary"""
        d: Dict[str, Any] = {}
        for section, keys in SECTIONS.items():
            block = data.get(section) or {}
            if not isinstance(block, dict):
                raise ConfigError(f"section {section!r} must be a mapping")
            d.update({k: v for k, v in block.items() if k in keys})
        known = {f.name for f in fields(cls)}
        d.update({k: v for k, v in data.items() if k in known and k not in ("analytics", "leaderboard", "aggregation", "strategies")})

        # Hydrate nested objects
        if isinstance(d.get("window"), dict):
            d["window"] = CompetitionWindow(**d["window"])
        elif isinstance(d.get("window"), str):
            d["window"] = CompetitionWindow.parse(d["window"])
        if "mappings" in d:
            d["mappings"] = {kind: m if isinstance(m, SchemaMapping) else SchemaMapping.from_dict(m)
                             for kind, m in (d["mappings"] or {}).items()}
        if "files" in d:
            files = dict(DEFAULT_FILES)
            files.update(d["files"] or {})
            d["files"] = files

        strategies = data.get("strategies")
        if isinstance(strategies, dict):
            d.setdefault("source_team", strategies.get("source_team", "SVK"))
            strategies = strategies.get("list")
        if strategies is not None:
            d["strategies"] = [s if isinstance(s, StrategyConfig) else StrategyConfig(**s) for s in strategies]
        if isinstance(data.get("analytics"), dict):
            d["analytics"] = AnalyticsConfig(**data["analytics"])
        if isinstance(data.get("leaderboard"), dict):
            d["leaderboard"] = LeaderboardRules(**data["leaderboard"])
        if isinstance(data.get("aggregation"), dict):
            d["aggregation"] = AggregationConfig(**data["aggregation"])

        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(f"invalid configuration: {e}") from e

    @classmethod
    def from_json(cls, json_str: str) -> 'RunConfig':
        return cls.from_dict(json.loads(json_str))

    @classmethod
    def from_yaml(cls, yaml_str: str) -> 'RunConfig':
        if not HAS_YAML:
            raise ImportError("PyYAML is required for YAML support")
        return cls.from_dict(yaml.safe_load(yaml_str) or {})

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RunConfig':
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".json":
            return cls.from_json(text)
        if path.suffix in (".yaml", ".yml"):
            return cls.from_yaml(text)
        raise ConfigError(f"Unsupported config format: {path.suffix}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run": {
                "data_dir": str(self.data_dir),
                "out_dir": str(self.out_dir),
                "seed": self.seed,
                "teams": list(self.teams) if self.teams is not None else None,
                "source_team": self.source_team,
            },
            "data": {
                "files": dict(self.files),
                "mappings": {kind: m.to_dict() for kind, m in self.mappings.items()},
                "window": self.window.to_dict(),
                "external_spreads": self.external_spreads,
            },
            "market": {"k": self.k, "bid_floor": self.bid_floor, "bid_cap": self.bid_cap},
            "strategies": [s.to_dict() for s in self.strategies],
            "analytics": self.analytics.to_dict(),
            "leaderboard": self.leaderboard.to_dict(),
            "aggregation": self.aggregation.to_dict(),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def config_hash(self) -> str:
        """Hash of everything that can change results (output location excluded)"""
        payload = self.to_dict()
        payload["run"] = {k: v for k, v in payload["run"].items() if k != "out_dir"}
        return stable_hash(payload)

    def with_overrides(self, data_dir=None, out_dir=None, window=None, k=None, seed=None,
                       teams=None, sanitize_probprofit: bool = False, rho=None) -> 'RunConfig':
        """Copy with command-line overrides applied (None leaves a value alone)"""
        changes: Dict[str, Any] = {}
        if data_dir is not None:
            changes["data_dir"] = data_dir
        if out_dir is not None:
            changes["out_dir"] = out_dir
        if window is not None:
            changes["window"] = window if isinstance(window, CompetitionWindow) else \
                CompetitionWindow.parse(window, timezone=self.window.timezone)
        if k is not None:
            changes["k"] = float(k)
        if seed is not None:
            changes["seed"] = int(seed)
        if rho is not None:
            changes["aggregation"] = replace(self.aggregation, rho=float(rho))
        if teams is not None:
            changes["teams"] = [t.strip() for t in teams.split(",")] if isinstance(teams, str) else list(teams)
        if sanitize_probprofit and "ProbProfit" not in self.leaderboard.sanitize_teams:
            changes["leaderboard"] = replace(
                self.leaderboard, sanitize_teams=self.leaderboard.sanitize_teams + ("ProbProfit",))
        return replace(self, **changes)

    def strategy_configs(self) -> List[StrategyConfig]:
        """Strategies with the run's market settings (k, bid bounds) applied"""
        return [replace(s, k=self.k, bid_floor=self.bid_floor, bid_cap=self.bid_cap) for s in self.strategies]

    def data_path(self, kind: str) -> Optional[Path]:
        name = self.files.get(kind)
        return Path(self.data_dir) / name if name else None

    def mapping(self, kind: str) -> SchemaMapping:
        return self.mappings.get(kind) or SchemaMapping()

    def validate(self, check_paths: bool = True) -> None:
        required = ("production", "prices", "submissions")
        if check_paths:
            for kind in required:
                path = self.data_path(kind)
                if path is None or not path.exists():
                    raise ConfigError(f"{kind} file not found: {path}")
            if self.external_spreads and not Path(self.external_spreads).exists():
                raise ConfigError(f"external spreads file not found: {self.external_spreads}")


# Predefined configurations
DEFAULT_CONFIG = RunConfig()

# Plain UTC market days for synthetic fixtures
SYNTHETIC_CONFIG = RunConfig(
    window=CompetitionWindow(start=date(2024, 1, 1), end=date(2024, 1, 14), timezone="UTC"),
    source_team="alpha",
    leaderboard=LeaderboardRules(organiser_teams=("Benchmark",)),
    analytics=AnalyticsConfig(exclude_first_days=0, outlier_exclusions=()),
)
