"""
Archive ingestion.

Delimited-text archive files are mapped onto canonical half-hourly series
indexed by UTC period start. Every load returns a ValidationReport describing
what was kept, dropped, deduplicated or clipped.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .config import (
    BASE_TARGETS,
    CANONICAL_COLUMNS,
    OPTIONAL_KINDS,
    TEXT_COLUMNS,
    CompetitionWindow,
    RunConfig,
    SchemaMapping,
)
from .exceptions import AlignmentError, InvalidInputError, LoadError
from .interfaces import PERIOD_INDEX_NAME, QUANTILE_COLUMNS, TeamSeries, ensure_utc_index
from .utils import market_day_of, market_day_periods  # noqa: F401  (re-exported calendar helpers)

logger = logging.getLogger(__name__)

KINDS = ("production", "prices", "submissions", "capacity", "base_forecasts")
TOTAL_TOLERANCE = 1e-6
MAX_LISTED_GAPS = 50

REQUIRED_COLUMNS: Dict[str, Tuple[str, ...]] = {
    "production": (),
    "prices": ("da_price", "ss_price"),
    "submissions": ("team", *QUANTILE_COLUMNS, "bid"),
    "capacity": ("wind_capacity_mwh", "solar_capacity_mwh"),
    "base_forecasts": ("model", "target", *QUANTILE_COLUMNS),
}

# kinds keyed by more than the period
ROW_KEYS: Dict[str, Tuple[str, ...]] = {
    "submissions": ("team",),
    "base_forecasts": ("model", "target"),
}


@dataclass
class ValidationReport:
    """Bookkeeping for one load"""
    kind: str
    path: str
    rows_in: int = 0
    rows_out: int = 0
    duplicates: int = 0
    invalid_rows: int = 0
    gaps: List[str] = field(default_factory=list)
    gap_count: int = 0
    clipped_bids: int = 0
    non_monotone: int = 0
    errors: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def summary(self) -> str:
        text = f"{self.kind}: {self.rows_out} rows"
        extras = [f"{n} {label}" for n, label in ((self.duplicates, "duplicates"),
                                                 (self.invalid_rows, "invalid rows"),
                                                 (self.gap_count, "gaps"),
                                                 (self.clipped_bids, "clipped bids"),
                                                 (self.non_monotone, "non-monotone forecasts")) if n]
        return text + (f" ({', '.join(extras)})" if extras else "")

    def to_dict(self):
        d = asdict(self)
        d["ok"] = self.ok
        return d

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _empty_canonical(kind: str) -> pd.DataFrame:
    index = pd.DatetimeIndex([], tz="UTC", name=PERIOD_INDEX_NAME)
    columns = [c for c in CANONICAL_COLUMNS[kind]]
    frame = pd.DataFrame({c: pd.Series(dtype=float) for c in columns}, index=index)
    for col in TEXT_COLUMNS:
        if col in frame.columns:
            frame[col] = frame[col].astype(object)
    return frame


def _parse_timestamps(raw: pd.Series, mapping: SchemaMapping, path: Path) -> pd.DatetimeIndex:
    if mapping.source_timezone == "UTC":
        parsed = pd.to_datetime(raw, format=mapping.timestamp_format, utc=True, errors="coerce")
    else:
        parsed = pd.to_datetime(raw, format=mapping.timestamp_format, errors="coerce")
    bad = parsed.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise LoadError(f"unparseable timestamp {raw.iloc[row]!r}", path=str(path), row=row + 2)
    index = pd.DatetimeIndex(parsed)
    if index.tz is None:
        try:
            index = index.tz_localize(mapping.source_timezone, ambiguous="infer", nonexistent="raise")
        except Exception as e:
            raise LoadError(f"cannot localise timestamps to {mapping.source_timezone}: {e}", path=str(path)) from e
    index = ensure_utc_index(index)
    misaligned = (index.minute % 30 != 0) | (index.second != 0) | (index.microsecond != 0)
    if misaligned.any():
        row = int(np.flatnonzero(misaligned)[0])
        raise LoadError(f"timestamp {raw.iloc[row]!r} is not a half-hour period start (mixed granularity)",
                        path=str(path), row=row + 2)
    return index


def load_series(path: Union[str, Path], mapping: Optional[SchemaMapping] = None, kind: str = "production",
                bid_cap: float = 1800.0, market_tz: str = "Europe/London"
                ) -> Tuple[pd.DataFrame, ValidationReport]:
    """
    Load one archive file as a canonical series.

    Timestamps are normalised to UTC half-hour starts and units scaled by the
    mapping's explicit factors. Duplicate periods keep the last row.
    """
    if kind not in KINDS:
        raise InvalidInputError(f"unknown series kind: {kind}")
    mapping = mapping or SchemaMapping()
    path = Path(path)
    report = ValidationReport(kind=kind, path=str(path))
    if not path.exists():
        raise LoadError("file not found", path=str(path))

    if path.stat().st_size == 0:
        logger.info(f"{path}: empty file")
        return _empty_canonical(kind), report
    try:
        raw = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        return _empty_canonical(kind), report
    except pd.errors.ParserError as e:
        raise LoadError(f"unreadable delimited text: {e}", path=str(path)) from e

    report.rows_in = len(raw)
    if mapping.timestamp_column not in raw.columns:
        raise LoadError(f"timestamp column {mapping.timestamp_column!r} not found", path=str(path))
    missing = [c for c in REQUIRED_COLUMNS[kind] if mapping.source(c) not in raw.columns]
    if missing:
        raise LoadError(f"unmapped required columns for {kind}: {missing}", path=str(path))
    if raw.empty:
        return _empty_canonical(kind), report

    index = _parse_timestamps(raw[mapping.timestamp_column], mapping, path)
    frame = pd.DataFrame(index=index)
    for canonical in CANONICAL_COLUMNS[kind]:
        source = mapping.source(canonical)
        if source not in raw.columns:
            continue
        if canonical in TEXT_COLUMNS:
            frame[canonical] = raw[source].astype(str).str.strip().to_numpy()
        else:
            values = pd.to_numeric(raw[source], errors="coerce").to_numpy(dtype=float)
            frame[canonical] = values * mapping.factor(canonical)

    if kind == "production":
        frame = _complete_production(frame, path)
    if kind == "submissions" and "market_day" not in frame.columns:
        frame["market_day"] = market_day_of(frame.index, market_tz).strftime("%Y-%m-%d")

    # optional production components may be blank
    optional = ("wind_mwh", "solar_mwh", "available_capacity_mwh") if kind == "production" else ()
    numeric = [c for c in frame.columns if c not in (*TEXT_COLUMNS, *optional)]
    invalid = ~np.isfinite(frame[numeric].to_numpy(dtype=float)).all(axis=1)
    if invalid.any():
        report.invalid_rows = int(invalid.sum())
        logger.warning(f"{path}: dropped {report.invalid_rows} rows with missing or non-finite values")
        frame = frame[~invalid]

    keys = [*ROW_KEYS.get(kind, ()), PERIOD_INDEX_NAME]
    keyed = frame.reset_index()
    dup = keyed.duplicated(subset=keys, keep="last")
    report.duplicates = int(dup.sum())
    if report.duplicates:
        logger.warning(f"{path}: {report.duplicates} duplicate periods resolved (last row wins)")
    frame = keyed[~dup.to_numpy()].sort_values(keys, kind="mergesort").set_index(PERIOD_INDEX_NAME)

    if kind == "submissions":
        report.clipped_bids = int(((frame["bid"] < 0) | (frame["bid"] > bid_cap)).sum())
        if report.clipped_bids:
            logger.warning(f"{path}: {report.clipped_bids} bids clipped to [0, {bid_cap}]")
        frame["bid"] = frame["bid"].clip(0.0, bid_cap)
    if kind == "base_forecasts":
        unknown = sorted(set(frame["target"]) - set(BASE_TARGETS))
        if unknown:
            raise LoadError(f"base forecast targets must be one of {list(BASE_TARGETS)}, got {unknown}",
                            path=str(path))
    if kind == "capacity":
        negative = (frame[list(CANONICAL_COLUMNS["capacity"])].to_numpy(dtype=float) < 0).any(axis=1)
        if negative.any():
            raise LoadError("negative available capacity", path=str(path))
    if kind in ROW_KEYS:
        q = frame[list(QUANTILE_COLUMNS)].to_numpy(dtype=float)
        report.non_monotone = int((np.diff(q, axis=1) < 0).any(axis=1).sum())
    elif len(frame):
        expected = pd.date_range(frame.index.min(), frame.index.max(), freq="30min")
        gaps = expected.difference(frame.index)
        report.gap_count = int(len(gaps))
        report.gaps = [p.strftime("%Y-%m-%dT%H:%M:%SZ") for p in gaps[:MAX_LISTED_GAPS]]
        if report.gap_count:
            logger.warning(f"{path}: {report.gap_count} missing half-hours")

    frame.index = ensure_utc_index(frame.index)
    report.rows_out = int(len(frame))
    logger.info(f"Loaded {report.summary()} from {path}")
    return frame, report


def _complete_production(frame: pd.DataFrame, path: Path) -> pd.DataFrame:
    has_parts = "wind_mwh" in frame.columns and "solar_mwh" in frame.columns
    if "total_mwh" not in frame.columns:
        if not has_parts:
            raise LoadError("production needs total_mwh or both wind_mwh and solar_mwh", path=str(path))
        frame["total_mwh"] = frame["wind_mwh"] + frame["solar_mwh"]
    elif has_parts:
        parts = (frame["wind_mwh"] + frame["solar_mwh"]).to_numpy()
        total = frame["total_mwh"].to_numpy()
        both = np.isfinite(parts) & np.isfinite(total)
        mismatch = both & (np.abs(parts - total) > TOTAL_TOLERANCE)
        if mismatch.any():
            row = int(np.flatnonzero(mismatch)[0])
            raise LoadError("total_mwh differs from wind_mwh + solar_mwh", path=str(path), row=row + 2)
    negative = (frame["total_mwh"] < 0).to_numpy()
    if negative.any():
        row = int(np.flatnonzero(negative)[0])
        raise LoadError("negative production", path=str(path), row=row + 2)
    return frame


def write_series(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Canonical on-disk form: UTF-8 CSV, header row, ISO-8601 UTC period starts"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = frame.copy()
    out.index = ensure_utc_index(out.index).strftime("%Y-%m-%dT%H:%M:%SZ")
    out.index.name = PERIOD_INDEX_NAME
    out.to_csv(path, lineterminator="\n")
    return path


def align(**series: Union[pd.Series, pd.DataFrame]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Inner-join named series on period. The mask covers the union of periods
    with `included` and a `reason` listing which inputs were missing.
    """
    if len(series) < 2:
        raise InvalidInputError("align needs at least two series")
    names = sorted(series)
    present = {}
    frames = []
    for name in names:
        item = series[name]
        frame = item.to_frame(name) if isinstance(item, pd.Series) else item.copy()
        frame.index = ensure_utc_index(frame.index)
        frame = frame[~frame.index.duplicated(keep="last")].dropna(how="all")
        present[name] = frame.index
        frames.append(frame)

    union = present[names[0]]
    for name in names[1:]:
        union = union.union(present[name])
    reasons = pd.Series("", index=union, dtype=object)
    for name in names:
        absent = ~union.isin(present[name])
        reasons[absent] = reasons[absent].map(lambda r, n=name: f"{r};missing {n}" if r else f"missing {n}")
    mask = pd.DataFrame({"included": reasons == "", "reason": reasons}, index=union)

    joined = pd.concat(frames, axis=1, join="inner").sort_index()
    if joined.empty:
        raise AlignmentError(f"no common periods across {names}")
    excluded = int((~mask["included"]).sum())
    if excluded:
        logger.info(f"Alignment excluded {excluded} of {len(union)} periods")
    return joined, mask


def load_team_metadata(path: Optional[Union[str, Path]]) -> pd.DataFrame:
    """
    Team flags: report, student, organiser, missed_submissions (blank means
    computed from benchmark-filled days). A missing file gives an empty table.
    """
    columns = ["report", "student", "organiser", "missed_submissions"]
    if path is None or not Path(path).exists():
        logger.warning(f"No team metadata at {path}; all teams treated as reporting non-students")
        return pd.DataFrame(columns=columns, index=pd.Index([], name="team"))
    raw = pd.read_csv(path, dtype=str).fillna("")
    if "team" not in raw.columns:
        raise LoadError("team metadata needs a team column", path=str(path))
    truthy = {"1", "true", "yes", "y", "t"}
    meta = pd.DataFrame(index=pd.Index(raw["team"].str.strip(), name="team"))
    for col, default in (("report", True), ("student", False), ("organiser", False)):
        if col in raw.columns:
            meta[col] = [v.strip().lower() in truthy if v.strip() else default for v in raw[col]]
        else:
            meta[col] = default
    if "missed_submissions" in raw.columns:
        missed = pd.to_numeric(raw["missed_submissions"].str.strip(), errors="coerce")
        meta["missed_submissions"] = pd.array(missed.to_numpy(), dtype="Int64")
    else:
        meta["missed_submissions"] = pd.array([pd.NA] * len(meta), dtype="Int64")
    if meta.index.duplicated().any():
        raise LoadError(f"duplicate teams in metadata: {sorted(set(meta.index[meta.index.duplicated()]))}",
                        path=str(path))
    return meta


def split_submissions(frame: pd.DataFrame) -> Dict[str, TeamSeries]:
    """One TeamSeries per team, keyed and ordered by team name"""
    teams = {}
    for name in sorted(frame["team"].unique()):
        part = frame[frame["team"] == name]
        teams[name] = TeamSeries(name=name, frame=part[[*QUANTILE_COLUMNS, "bid"]])
    return teams


@dataclass
class ReplayData:
    """Everything a run loads from the archive"""
    production: pd.DataFrame
    prices: pd.DataFrame
    submissions: pd.DataFrame
    teams: pd.DataFrame
    capacity: Optional[pd.DataFrame] = None
    base_forecasts: Optional[pd.DataFrame] = None
    external_spreads: Optional[pd.Series] = None
    reports: List[ValidationReport] = field(default_factory=list)

    @property
    def actuals(self) -> pd.Series:
        return self.production["total_mwh"].rename("production")

    def team_series(self, names: Optional[List[str]] = None) -> Dict[str, TeamSeries]:
        teams = split_submissions(self.submissions)
        if names is not None:
            unknown = sorted(set(names) - set(teams))
            if unknown:
                logger.warning(f"Requested teams without submissions: {unknown}")
            teams = {n: s for n, s in teams.items() if n in names}
        return teams

    def base_frames(self, target: str) -> Dict[str, pd.DataFrame]:
        """Quantile frames of every base model for one target, keyed and ordered by model name"""
        if self.base_forecasts is None or self.base_forecasts.empty:
            return {}
        part = self.base_forecasts[self.base_forecasts["target"] == target]
        return {name: part.loc[part["model"] == name, list(QUANTILE_COLUMNS)]
                for name in sorted(part["model"].unique())}

    def capacity_for(self, target: str) -> Optional[pd.Series]:
        if self.capacity is None or self.capacity.empty:
            return None
        return self.capacity[f"{target}_capacity_mwh"]


def load_dataset(config: RunConfig) -> ReplayData:
    """Load every configured archive file; raises LoadError on the first hard failure"""
    window: CompetitionWindow = config.window
    loaded = {}
    reports = []
    for kind in KINDS:
        path = config.data_path(kind)
        if path is None:
            continue
        if kind in OPTIONAL_KINDS and not path.exists():
            continue
        frame, report = load_series(path, config.mapping(kind), kind, config.bid_cap, window.timezone)
        loaded[kind] = frame
        reports.append(report)

    spreads = None
    if config.external_spreads:
        frame, report = load_series(config.external_spreads, config.mapping("prices"), "prices",
                                    config.bid_cap, window.timezone)
        spreads = (frame["ss_price"] - frame["da_price"]).rename("spread")
        report.kind = "external_spreads"
        reports.append(report)

    return ReplayData(
        production=loaded["production"],
        prices=loaded["prices"],
        submissions=loaded["submissions"],
        teams=load_team_metadata(config.data_path("teams")),
        capacity=loaded.get("capacity"),
        base_forecasts=loaded.get("base_forecasts"),
        external_spreads=spreads,
        reports=reports,
    )
