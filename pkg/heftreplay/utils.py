"""
Utility functions for heftreplay.
Market-day calendar helpers, stable hashing and the tidy-table writer.
"""

import hashlib
import json
import logging
from datetime import date, timedelta
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .interfaces import ensure_utc_index

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"
PERIODS_PER_DAY = 48


# --- Calendar ---

def market_day_periods(day: date, tz: str = "Europe/London") -> pd.DatetimeIndex:
    """
    UTC half-hour starts belonging to one market day.
    A local-time day has 46, 48 or 50 periods depending on DST transitions.
    """
    start = pd.Timestamp(day).tz_localize(tz).tz_convert("UTC")
    end = pd.Timestamp(day + timedelta(days=1)).tz_localize(tz).tz_convert("UTC")
    periods = pd.date_range(start, end, freq="30min", inclusive="left")
    return ensure_utc_index(periods)


def market_day_of(periods, tz: str = "Europe/London") -> pd.DatetimeIndex:
    """Local market day (as naive midnight timestamps) for each UTC period start"""
    local = ensure_utc_index(periods).tz_convert(tz)
    return local.tz_localize(None).normalize()


def slot_of_day(periods) -> np.ndarray:
    """Settlement slot 0..47 counted from 00:00 UTC"""
    index = ensure_utc_index(periods)
    return np.asarray(index.hour * 2 + index.minute // 30, dtype=int)


def submission_deadline(market_day: date) -> pd.Timestamp:
    """Bids for market day D are due at 09:20 UTC on D-1"""
    day = pd.Timestamp(market_day) - pd.Timedelta(days=1)
    return (day + pd.Timedelta(hours=9, minutes=20)).tz_localize("UTC")


def information_cutoff(market_day: date, lag_days: int = 0) -> pd.Timestamp:
    """Latest instant whose realised data a bid for market_day may use"""
    return submission_deadline(market_day) - pd.Timedelta(days=lag_days)


def settled_by(periods, cutoff: pd.Timestamp) -> np.ndarray:
    """Mask of half-hour periods that have fully elapsed at cutoff"""
    index = ensure_utc_index(periods)
    return np.asarray(index + pd.Timedelta(minutes=30) <= cutoff)


def daterange(start: date, end: date) -> List[date]:
    return [start + timedelta(days=i) for i in range((end - start).days + 1)]


# --- Hashing ---

def stable_hash(payload: Dict[str, Any], length: int = 12) -> str:
    """Short sha256 of a JSON-serialisable mapping, independent of key order"""
    text = json.dumps(payload, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:length]


# --- Tidy tables ---

def write_table(frame: pd.DataFrame, path: Union[str, Path], table: str,
                units: Dict[str, str], config_hash: str,
                index: bool = False) -> Path:
    """
    Write a tidy table as CSV preceded by `#` header lines naming the table,
    column units and the config hash. Output is byte-stable for equal input.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    unit_text = "; ".join(f"{col}={units[col]}" for col in sorted(units))
    header = [
        f"# table: {table}",
        f"# config_hash: {config_hash}",
        f"# units: {unit_text}",
    ]
    frame = frame.copy()
    for col in frame.columns:
        if pd.api.types.is_datetime64_any_dtype(frame[col]):
            frame[col] = frame[col].dt.strftime("%Y-%m-%dT%H:%M:%SZ")
    body = frame.to_csv(index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    path.write_text("\n".join(header) + "\n" + body, encoding="utf-8")
    logger.info(f"Wrote {table} ({len(frame)} rows) to {path}")
    return path


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    """Read a table written by write_table, skipping its header lines"""
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        skip = 0
        for line in f:
            if not line.startswith("#"):
                break
            skip += 1
    return pd.read_csv(path, skiprows=skip)


def table_metadata(path: Union[str, Path]) -> Dict[str, str]:
    meta: Dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(":")
            meta[key.strip()] = value.strip()
    return meta


def parse_window(text: Optional[str]):
    """Parse 'YYYY-MM-DD:YYYY-MM-DD' into a (start, end) pair of dates"""
    if not text:
        return None
    start, sep, end = text.partition(":")
    if not sep:
        raise ValueError(f"window must look like START:END, got {text!r}")
    return date.fromisoformat(start.strip()), date.fromisoformat(end.strip())
