"""
Quantile post-processing and combination.

Crossing repair, capacity clipping, linear quantile-regression meta-models
over base-model quantiles, and wind + solar aggregation with a Gaussian-copula
correlation adjustment.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.optimize import linprog
from scipy.stats import norm

from .config import AggregationConfig
from .exceptions import FitError, InvalidInputError, PreconditionError, ShapeError
from .interfaces import QUANTILE_COLUMNS, QUANTILE_LEVELS, QuantileForecast, ensure_utc_index
from .scoring import pinball_loss

logger = logging.getLogger(__name__)

MODEL_FORMAT_HEADER = "heftreplay-qr v1"
_LEVELS = np.asarray(QUANTILE_LEVELS)


# --- Repair and clipping ---

def sort_quantiles(forecast: QuantileForecast) -> QuantileForecast:
    """Rearrange crossing quantiles: sort values ascending and reassign by level"""
    return QuantileForecast(period=forecast.period, values=tuple(sorted(forecast.values)))


def sort_quantile_frame(frame: pd.DataFrame) -> pd.DataFrame:
    values = np.sort(frame[list(QUANTILE_COLUMNS)].to_numpy(dtype=float), axis=1)
    return pd.DataFrame(values, index=frame.index, columns=list(QUANTILE_COLUMNS))


def clip_to_capacity(forecast: QuantileForecast, available_capacity: float) -> QuantileForecast:
    if not math.isfinite(available_capacity) or available_capacity < 0:
        raise InvalidInputError(f"available capacity must be >= 0, got {available_capacity}")
    values = np.clip(forecast.as_array(), 0.0, available_capacity)
    return QuantileForecast(period=forecast.period, values=tuple(values))


def clip_frame(frame: pd.DataFrame, capacity: Union[float, pd.Series, None]) -> pd.DataFrame:
    """Clip every quantile column to [0, capacity]; a capacity series is aligned by period"""
    values = frame[list(QUANTILE_COLUMNS)].to_numpy(dtype=float)
    if capacity is None:
        upper = np.inf
    elif isinstance(capacity, pd.Series):
        cap = capacity.copy()
        cap.index = ensure_utc_index(cap.index)
        upper = cap.reindex(frame.index).fillna(np.inf).to_numpy(dtype=float)[:, None]
        if np.any(upper < 0):
            raise InvalidInputError("available capacity must be >= 0")
    else:
        if capacity < 0:
            raise InvalidInputError(f"available capacity must be >= 0, got {capacity}")
        upper = float(capacity)
    clipped = np.maximum(np.minimum(values, upper), 0.0)
    return pd.DataFrame(clipped, index=frame.index, columns=list(QUANTILE_COLUMNS))


# --- Distribution implied by nine quantiles ---

def quantile_function(values: Sequence[float]):
    """Inverse CDF: linear between the nine levels, flat beyond q10 and q90"""
    values = np.asarray(values, dtype=float)
    return lambda u: np.interp(u, _LEVELS, values)


def quantile_mean(forecast: Union[QuantileForecast, Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
    """
    Mean of the interpolated distribution: atoms of mass 0.1 at q10 and q90 and
    uniform mass 0.1 between neighbouring levels. Accepts one forecast or an (n, 9) array.
    """
    values = forecast.as_array() if isinstance(forecast, QuantileForecast) else np.asarray(forecast, dtype=float)
    weights = np.full(len(QUANTILE_LEVELS), 0.1)
    weights[0] = weights[-1] = 0.15
    result = values @ weights
    return float(result) if np.ndim(result) == 0 else result


# --- Linear quantile regression ---

@dataclass(frozen=True)
class QuantileRegressionOptions:
    method: str = "highs"
    rank_tol: Optional[float] = None


@dataclass(frozen=True)
class QuantileRegressionModel:
    """Linear quantile model: q_alpha = intercept + coefficients . x"""
    level: float
    intercept: float
    coefficients: tuple

    @property
    def arity(self) -> int:
        return len(self.coefficients)

    def predict(self, covariates) -> np.ndarray:
        x = np.atleast_2d(np.asarray(covariates, dtype=float))
        if x.shape[1] != self.arity:
            raise ShapeError(f"model at level {self.level} expects {self.arity} covariates, got {x.shape[1]}")
        return self.intercept + x @ np.asarray(self.coefficients, dtype=float)

    def loss(self, covariates, targets) -> float:
        """Mean pinball loss on a dataset"""
        return float(np.mean(pinball_loss(np.asarray(targets, dtype=float),
                                          self.predict(covariates), self.level)))


def fit_quantile_regression(covariates, targets, level: float,
                            options: Optional[QuantileRegressionOptions] = None) -> QuantileRegressionModel:
    """
    Minimise the empirical pinball loss at `level` exactly, as the linear programme

        min  level * sum(u) + (1 - level) * sum(v)
        s.t. b0 + X b + u - v = y,  u, v >= 0
    """
    options = options or QuantileRegressionOptions()
    if not 0.0 < level < 1.0:
        raise FitError(f"quantile level must lie in (0, 1), got {level}")
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(targets, dtype=float).ravel()
    n, p = x.shape
    if len(y) != n:
        raise FitError(f"{n} covariate rows but {len(y)} targets")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("covariates and targets must be finite")
    if n < p + 1:
        raise FitError(f"insufficient data: {n} observations for {p + 1} parameters")

    design = np.column_stack([np.ones(n), x])
    rank = np.linalg.matrix_rank(design, tol=options.rank_tol)
    if rank < p + 1:
        raise FitError(f"rank-deficient design: rank {rank} for {p + 1} parameters (intercept + {p} covariates)")

    eye = sparse.identity(n, format="csr")
    a_eq = sparse.hstack([sparse.csr_matrix(design), eye, -eye], format="csr")
    c = np.concatenate([np.zeros(p + 1), np.full(n, level), np.full(n, 1.0 - level)])
    bounds = [(None, None)] * (p + 1) + [(0, None)] * (2 * n)

    res = linprog(c, A_eq=a_eq, b_eq=y, bounds=bounds, method=options.method)
    if res.status != 0:
        raise FitError(f"quantile regression solver failed at level {level}: {res.message}")

    beta = res.x[:p + 1]
    logger.debug(f"Fitted level {level}: loss {res.fun / n:.6g} over {n} rows")
    return QuantileRegressionModel(level=level, intercept=float(beta[0]),
                                   coefficients=tuple(float(b) for b in beta[1:]))


def _stack_bases(base_frames: Sequence[Optional[pd.DataFrame]], index: pd.DatetimeIndex) -> np.ndarray:
    """(models, periods, 9) array with NaN where a base model is missing"""
    stacked = []
    for frame in base_frames:
        if frame is None:
            stacked.append(np.full((len(index), len(QUANTILE_LEVELS)), np.nan))
        else:
            f = frame[list(QUANTILE_COLUMNS)].copy()
            f.index = ensure_utc_index(f.index)
            stacked.append(f.reindex(index).to_numpy(dtype=float))
    return np.stack(stacked)


def _fill_stacked(stacked: np.ndarray) -> np.ndarray:
    """Replace rows of missing base models with the level-wise mean of the available ones"""
    missing = np.isnan(stacked).any(axis=2)
    if not missing.any():
        return stacked
    with np.errstate(invalid="ignore"):
        available = np.where(missing[:, :, None], np.nan, stacked)
        fill = np.nanmean(available, axis=0)
    filled = np.where(missing[:, :, None], fill[None, :, :], stacked)
    return filled


def fill_missing_base(bases: Sequence[Optional[QuantileForecast]]) -> List[QuantileForecast]:
    """Fill missing base-model forecasts with the level-wise mean of available models"""
    available = [b for b in bases if b is not None]
    if not available:
        raise InvalidInputError("no base model forecasts available")
    fill = np.mean([b.as_array() for b in available], axis=0)
    period = available[0].period
    return [b if b is not None else QuantileForecast(period=period, values=tuple(fill)) for b in bases]


def fit_meta_models(base_frames: Sequence[pd.DataFrame], target: pd.Series,
                    levels: Sequence[float] = QUANTILE_LEVELS,
                    options: Optional[QuantileRegressionOptions] = None) -> Dict[float, QuantileRegressionModel]:
    """One linear quantile regression per level, covariates = all base quantiles side by side"""
    target = target.copy()
    target.index = ensure_utc_index(target.index)
    stacked = _stack_bases(base_frames, target.index)
    x = np.concatenate(list(stacked), axis=1)
    y = target.to_numpy(dtype=float)
    keep = np.isfinite(x).all(axis=1) & np.isfinite(y)
    dropped = int((~keep).sum())
    if dropped:
        logger.warning(f"Dropped {dropped} training rows with missing base forecasts or targets")
    models = {}
    for level in levels:
        models[level] = fit_quantile_regression(x[keep], y[keep], level, options)
    logger.info(f"Fitted {len(models)} meta-models on {int(keep.sum())} rows, {x.shape[1]} covariates")
    return models


def _ordered_models(models: Union[Mapping[float, QuantileRegressionModel], Sequence[QuantileRegressionModel]]):
    if isinstance(models, Mapping):
        missing = [a for a in QUANTILE_LEVELS if a not in models]
        if missing:
            raise ShapeError(f"meta-models missing for levels {missing}")
        return [models[a] for a in QUANTILE_LEVELS]
    models = list(models)
    if len(models) != len(QUANTILE_LEVELS):
        raise ShapeError(f"expected {len(QUANTILE_LEVELS)} meta-models, got {len(models)}")
    return models


def predict_meta(models, base_quantiles, period: Optional[pd.Timestamp] = None) -> QuantileForecast:
    """
    Per-level linear prediction from a covariate vector (or a list of base
    forecasts, missing ones filled), then crossing repair and a floor at zero.
    """
    ordered = _ordered_models(models)
    if isinstance(base_quantiles, (list, tuple)) and base_quantiles and \
            any(b is None or isinstance(b, QuantileForecast) for b in base_quantiles):
        filled = fill_missing_base(base_quantiles)
        period = period if period is not None else filled[0].period
        x = np.concatenate([b.as_array() for b in filled])
    else:
        x = np.asarray(base_quantiles, dtype=float).ravel()
    for model in ordered:
        if model.arity != len(x):
            raise ShapeError(f"model at level {model.level} expects {model.arity} covariates, got {len(x)}")
    raw = np.array([float(m.predict(x)[0]) for m in ordered])
    values = np.maximum(np.sort(raw), 0.0)
    return QuantileForecast(period=period, values=tuple(values))


def predict_meta_frame(models, base_frames: Sequence[Optional[pd.DataFrame]],
                       index: Optional[pd.DatetimeIndex] = None) -> pd.DataFrame:
    """Vectorised predict_meta over periods; periods where every base model is missing are dropped"""
    ordered = _ordered_models(models)
    if index is None:
        present = [ensure_utc_index(f.index) for f in base_frames if f is not None]
        if not present:
            raise InvalidInputError("no base model frames supplied")
        index = present[0]
        for other in present[1:]:
            index = index.union(other)
    stacked = _fill_stacked(_stack_bases(base_frames, index))
    x = np.concatenate(list(stacked), axis=1)
    keep = np.isfinite(x).all(axis=1)
    coef = np.array([m.coefficients for m in ordered], dtype=float)
    if coef.shape[1] != x.shape[1]:
        raise ShapeError(f"meta-models expect {coef.shape[1]} covariates, got {x.shape[1]}")
    intercepts = np.array([m.intercept for m in ordered])
    raw = intercepts[None, :] + x[keep] @ coef.T
    values = np.maximum(np.sort(raw, axis=1), 0.0)
    return pd.DataFrame(values, index=index[keep], columns=list(QUANTILE_COLUMNS))


def save_models(models, path: Union[str, Path]) -> Path:
    path = Path(path)
    lines = [MODEL_FORMAT_HEADER]
    ordered = models.values() if isinstance(models, Mapping) else models
    for m in sorted(ordered, key=lambda m: m.level):
        lines.append(" ".join([repr(float(m.level)), repr(float(m.intercept))] +
                              [repr(float(c)) for c in m.coefficients]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_models(path: Union[str, Path]) -> Dict[float, QuantileRegressionModel]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != MODEL_FORMAT_HEADER:
        raise InvalidInputError(f"{path}: not a {MODEL_FORMAT_HEADER} model file")
    models = {}
    arity = None
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = [float(p) for p in line.split()]
        if len(parts) < 2:
            raise InvalidInputError(f"{path}:{number}: expected level and intercept")
        if arity is None:
            arity = len(parts) - 2
        elif len(parts) - 2 != arity:
            raise ShapeError(f"{path}:{number}: inconsistent covariate arity")
        models[parts[0]] = QuantileRegressionModel(level=parts[0], intercept=parts[1],
                                                   coefficients=tuple(parts[2:]))
    return models


# --- Wind + solar aggregation ---

def aggregate_hybrid(wind: QuantileForecast, solar: QuantileForecast,
                     config: Optional[AggregationConfig] = None) -> QuantileForecast:
    """
    Quantiles of wind + solar.

    rho = 1 (or a degenerate margin) is comonotonic addition, the level-wise
    sum. Otherwise margins are coupled through a Gaussian copula with
    correlation rho, sampled sample_count times with a fixed seed.
    """
    config = config or AggregationConfig()
    if not wind.is_monotone or not solar.is_monotone:
        raise PreconditionError("aggregate_hybrid needs monotone quantiles (apply sort_quantiles first)")
    w = wind.as_array()
    s = solar.as_array()
    period = wind.period if wind.period is not None else solar.period
    if config.rho == 1.0 or np.ptp(w) == 0.0 or np.ptp(s) == 0.0:
        return QuantileForecast(period=period, values=tuple(w + s))

    rng = np.random.default_rng(config.seed)
    z = rng.standard_normal((config.sample_count, 2))
    z_solar = config.rho * z[:, 0] + math.sqrt(1.0 - config.rho ** 2) * z[:, 1]
    total = quantile_function(w)(norm.cdf(z[:, 0])) + quantile_function(s)(norm.cdf(z_solar))
    return QuantileForecast(period=period, values=tuple(np.quantile(total, _LEVELS)))


def aggregate_hybrid_frame(wind: pd.DataFrame, solar: pd.DataFrame,
                           config: Optional[AggregationConfig] = None) -> pd.DataFrame:
    config = config or AggregationConfig()
    index = ensure_utc_index(wind.index).intersection(ensure_utc_index(solar.index))
    w = wind[list(QUANTILE_COLUMNS)].set_axis(ensure_utc_index(wind.index)).reindex(index).to_numpy(dtype=float)
    s = solar[list(QUANTILE_COLUMNS)].set_axis(ensure_utc_index(solar.index)).reindex(index).to_numpy(dtype=float)
    if config.rho == 1.0:
        return pd.DataFrame(w + s, index=index, columns=list(QUANTILE_COLUMNS))
    rows = [aggregate_hybrid(QuantileForecast(p, tuple(a)), QuantileForecast(p, tuple(b)), config).values
            for p, a, b in zip(index, w, s)]
    return pd.DataFrame(rows, index=index, columns=list(QUANTILE_COLUMNS))


def combine_hybrid_frame(wind_bases: Sequence[Optional[pd.DataFrame]],
                         solar_bases: Sequence[Optional[pd.DataFrame]],
                         wind_models, solar_models,
                         config: Optional[AggregationConfig] = None,
                         wind_capacity: Union[float, pd.Series, None] = None,
                         solar_capacity: Union[float, pd.Series, None] = None) -> pd.DataFrame:
    """
    Full combination pipeline: clip base quantiles to available capacity,
    meta-predict wind and solar separately, clip again, then aggregate.
    """
    wind_clipped = [clip_frame(f, wind_capacity) if f is not None else None for f in wind_bases]
    solar_clipped = [clip_frame(f, solar_capacity) if f is not None else None for f in solar_bases]
    wind = clip_frame(predict_meta_frame(wind_models, wind_clipped), wind_capacity)
    solar = clip_frame(predict_meta_frame(solar_models, solar_clipped), solar_capacity)
    return aggregate_hybrid_frame(wind, solar, config)
