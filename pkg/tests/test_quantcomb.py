"""
Tests for quantile repair, quantile regression and hybrid aggregation.
"""

import itertools

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm

from heftreplay import (
    QUANTILE_COLUMNS,
    QUANTILE_LEVELS,
    AggregationConfig,
    ConfigError,
    FitError,
    InvalidInputError,
    PreconditionError,
    QuantileForecast,
    ShapeError,
    aggregate_hybrid,
    clip_to_capacity,
    fit_quantile_regression,
    predict_meta,
    quantile_mean,
    sort_quantiles,
)
from heftreplay.quantcomb import (
    QuantileRegressionModel,
    aggregate_hybrid_frame,
    clip_frame,
    combine_hybrid_frame,
    fill_missing_base,
    fit_meta_models,
    load_models,
    predict_meta_frame,
    save_models,
)
from heftreplay.scoring import pinball_loss

LADDER = tuple(float(v) for v in range(100, 1000, 100))


def _identity_models(arity: int = 9, offset: int = 0):
    """Meta-models returning the covariate at each level's own position"""
    models = {}
    for i, level in enumerate(QUANTILE_LEVELS):
        coef = [0.0] * arity
        coef[offset + i] = 1.0
        models[level] = QuantileRegressionModel(level=level, intercept=0.0, coefficients=tuple(coef))
    return models


class TestRepairAndClip:
    """Test crossing repair and capacity clipping."""

    def test_sort_quantiles(self):
        """Test crossing quantiles are rearranged."""
        forecast = QuantileForecast(None, (5, 4, 3, 2, 1, 6, 7, 8, 9))
        repaired = sort_quantiles(forecast)
        assert repaired.values == (1, 2, 3, 4, 5, 6, 7, 8, 9)
        assert repaired.is_monotone
        assert not forecast.is_monotone

    def test_clip_to_capacity(self):
        """Test clipping to [0, capacity]."""
        forecast = QuantileForecast(None, (-10, 0, 50, 100, 150, 200, 250, 300, 350))
        clipped = clip_to_capacity(forecast, 200.0)
        assert clipped.values == (0, 0, 50, 100, 150, 200, 200, 200, 200)
        with pytest.raises(InvalidInputError):
            clip_to_capacity(forecast, -1.0)

    def test_clip_frame_with_series(self):
        """Test per-period capacity is aligned by period."""
        periods = pd.date_range("2024-01-01", periods=2, freq="30min", tz="UTC")
        frame = pd.DataFrame(np.tile(np.array(LADDER), (2, 1)), index=periods, columns=list(QUANTILE_COLUMNS))
        clipped = clip_frame(frame, pd.Series([250.0, 1000.0], index=periods))
        assert clipped.iloc[0].max() == 250.0
        assert clipped.iloc[1].max() == 900.0


class TestQuantileMean:
    """Test the mean of the interpolated distribution."""

    def test_constant(self):
        """Test a degenerate forecast has its value as mean."""
        assert quantile_mean(QuantileForecast(None, (7.0,) * 9)) == pytest.approx(7.0)

    def test_symmetric_ladder(self):
        """Test a symmetric ladder has its median as mean."""
        assert quantile_mean(QuantileForecast(None, LADDER)) == pytest.approx(500.0)

    def test_tail_weight(self):
        """Test the outer quantiles carry extra weight."""
        values = np.array(LADDER)
        values[-1] += 100.0
        assert quantile_mean(values) == pytest.approx(500.0 + 15.0)


class TestQuantileRegression:
    """Test the exact linear-programming fit."""

    def test_identity_recovered(self):
        """Test targets equal to the covariate give slope 1 and intercept 0."""
        x = np.linspace(0, 100, 40)
        model = fit_quantile_regression(x, x, 0.5)
        assert model.intercept == pytest.approx(0.0, abs=1e-6)
        assert model.coefficients[0] == pytest.approx(1.0, abs=1e-6)
        assert model.loss(x[:, None], x) == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("level", [0.1, 0.5, 0.9])
    def test_matches_vertex_enumeration(self, seed, level):
        """Test the LP optimum equals the best line through two data points."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, 10, 8)
        y = 3.0 + 2.0 * x + rng.standard_t(3, 8)
        model = fit_quantile_regression(x, y, level)
        lp_loss = float(np.sum(pinball_loss(y, model.predict(x[:, None]), level)))

        best = np.inf
        for i, j in itertools.combinations(range(len(x)), 2):
            slope = (y[j] - y[i]) / (x[j] - x[i])
            line = y[i] + slope * (x - x[i])
            best = min(best, float(np.sum(pinball_loss(y, line, level))))
        assert lp_loss == pytest.approx(best, rel=1e-6, abs=1e-8)

    def test_insufficient_data(self):
        """Test fewer observations than parameters fails."""
        with pytest.raises(FitError):
            fit_quantile_regression(np.ones((2, 2)), np.ones(2), 0.5)

    def test_rank_deficient(self):
        """Test duplicated covariate columns fail."""
        x = np.linspace(0, 1, 20)
        with pytest.raises(FitError):
            fit_quantile_regression(np.column_stack([x, 2 * x]), x, 0.5)

    def test_nested_covariates_never_worse(self):
        """Test adding covariates never raises the in-sample pinball loss."""
        rng = np.random.default_rng(4)
        n = 120
        x = rng.uniform(0, 100, (n, 4))
        y = 10.0 + x[:, 0] + 0.5 * x[:, 1] + rng.standard_t(3, n) * 8.0
        for level in (0.1, 0.5, 0.9):
            losses = [fit_quantile_regression(x[:, :p], y, level).loss(x[:, :p], y) for p in range(1, 5)]
            assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(losses, losses[1:]))

    def test_invalid_level(self):
        """Test levels outside (0, 1) fail."""
        with pytest.raises(FitError):
            fit_quantile_regression(np.arange(5.0), np.arange(5.0), 1.0)

    def test_fit_meta_models(self):
        """Test per-level meta-models over one base model reproduce it."""
        periods = pd.date_range("2024-01-01", periods=60, freq="30min", tz="UTC")
        rng = np.random.default_rng(0)
        base = np.sort(rng.uniform(0, 500, (60, 9)), axis=1)
        frame = pd.DataFrame(base, index=periods, columns=list(QUANTILE_COLUMNS))
        target = pd.Series(base[:, 4], index=periods)
        models = fit_meta_models([frame], target, levels=[0.5])
        assert models[0.5].loss(base, target.to_numpy()) == pytest.approx(0.0, abs=1e-6)


class TestPredictMeta:
    """Test meta-model prediction."""

    def test_sorted_and_floored(self):
        """Test predictions are non-crossing and non-negative."""
        models = {level: QuantileRegressionModel(level, intercept=50.0 - 100.0 * level, coefficients=(0.0,))
                  for level in QUANTILE_LEVELS}
        forecast = predict_meta(models, [1.0])
        assert forecast.is_monotone
        assert min(forecast.values) == 0.0

    def test_missing_base_filled(self):
        """Test a missing base model is replaced by the mean of the others."""
        a = QuantileForecast(None, LADDER)
        b = QuantileForecast(None, tuple(v + 100.0 for v in LADDER))
        filled = fill_missing_base([a, None, b])
        assert filled[1].values == tuple(v + 50.0 for v in LADDER)
        forecast = predict_meta(_identity_models(arity=27, offset=9), [a, None, b])
        assert forecast.values == filled[1].values

    def test_arity_mismatch(self):
        """Test a covariate vector of the wrong length fails."""
        with pytest.raises(ShapeError):
            predict_meta(_identity_models(), [1.0, 2.0])

    def test_frame_matches_single(self):
        """Test the vectorised path agrees with the single-period path."""
        periods = pd.date_range("2024-01-01", periods=3, freq="30min", tz="UTC")
        base = pd.DataFrame(np.tile(np.array(LADDER), (3, 1)), index=periods, columns=list(QUANTILE_COLUMNS))
        frame = predict_meta_frame(_identity_models(), [base])
        assert tuple(frame.iloc[0]) == predict_meta(_identity_models(), list(LADDER)).values

    def test_save_load(self, tmp_path):
        """Test persisted models predict identically."""
        models = _identity_models()
        loaded = load_models(save_models(models, tmp_path / "models.txt"))
        assert predict_meta(loaded, list(LADDER)).values == predict_meta(models, list(LADDER)).values

    def test_load_rejects_foreign_file(self, tmp_path):
        """Test a file without the format header is rejected."""
        path = tmp_path / "models.txt"
        path.write_text("0.5 1.0 2.0\n")
        with pytest.raises(InvalidInputError):
            load_models(path)


class TestAggregateHybrid:
    """Test wind + solar aggregation."""

    def test_comonotonic_sum(self):
        """Test rho = 1 is the level-wise sum."""
        wind = QuantileForecast(None, LADDER)
        solar = QuantileForecast(None, tuple(v / 10.0 for v in LADDER))
        total = aggregate_hybrid(wind, solar, AggregationConfig(rho=1.0))
        assert total.values == tuple(w + s for w, s in zip(wind.values, solar.values))

    def test_degenerate_margin(self):
        """Test a constant margin shifts the other exactly."""
        wind = QuantileForecast(None, LADDER)
        solar = QuantileForecast(None, (0.0,) * 9)
        total = aggregate_hybrid(wind, solar, AggregationConfig(rho=0.3))
        assert total.values == wind.values

    def test_independent_gaussian(self):
        """Test rho = 0 against the analytic sum of independent normals at the central levels."""
        sd = 20.0
        wind = QuantileForecast(None, tuple(300.0 + sd * norm.ppf(QUANTILE_LEVELS)))
        solar = QuantileForecast(None, tuple(100.0 + sd * norm.ppf(QUANTILE_LEVELS)))
        total = aggregate_hybrid(wind, solar, AggregationConfig(rho=0.0, sample_count=100_000, seed=0))
        analytic = dict(zip(QUANTILE_LEVELS, 400.0 + np.sqrt(2.0) * sd * norm.ppf(QUANTILE_LEVELS)))
        for level in (0.3, 0.4, 0.5, 0.6, 0.7):
            assert total.q[level] == pytest.approx(analytic[level], abs=2.0)

    @pytest.mark.parametrize("scale", [0.5, 1.0, 3.0])
    def test_independence_narrows_interval(self, scale):
        """Test the q10 to q90 width at rho = 0 is no wider than the comonotonic width."""
        wind = QuantileForecast(None, LADDER)
        solar = QuantileForecast(None, tuple(scale * (110.0 + 30.0 * z) for z in norm.ppf(QUANTILE_LEVELS)))
        widths = {}
        for rho in (1.0, 0.0, -0.5):
            total = aggregate_hybrid(wind, solar, AggregationConfig(rho=rho, sample_count=20_000, seed=2))
            widths[rho] = total.q[0.9] - total.q[0.1]
        assert widths[1.0] == pytest.approx((LADDER[-1] - LADDER[0]) + (solar.values[-1] - solar.values[0]))
        assert widths[0.0] <= widths[1.0]
        assert widths[-0.5] <= widths[0.0]

    def test_seeded(self):
        """Test equal seeds give identical aggregates."""
        wind = QuantileForecast(None, LADDER)
        solar = QuantileForecast(None, tuple(v / 2.0 for v in LADDER))
        config = AggregationConfig(rho=0.5, seed=3)
        assert aggregate_hybrid(wind, solar, config) == aggregate_hybrid(wind, solar, config)

    def test_non_monotone_rejected(self):
        """Test crossing inputs raise a precondition error."""
        wind = QuantileForecast(None, (5, 4, 3, 2, 1, 6, 7, 8, 9))
        with pytest.raises(PreconditionError):
            aggregate_hybrid(wind, QuantileForecast(None, LADDER), AggregationConfig(rho=0.0))

    def test_config_bounds(self):
        """Test rho and sample count are validated."""
        with pytest.raises(ConfigError):
            AggregationConfig(rho=1.5)
        with pytest.raises(ConfigError):
            AggregationConfig(sample_count=10)

    def test_combine_pipeline(self):
        """Test clip, meta-predict and sum with identity meta-models."""
        periods = pd.date_range("2024-01-01", periods=4, freq="30min", tz="UTC")
        wind = pd.DataFrame(np.tile(np.array(LADDER), (4, 1)), index=periods, columns=list(QUANTILE_COLUMNS))
        solar = wind / 10.0
        combined = combine_hybrid_frame([wind], [solar], _identity_models(), _identity_models(),
                                        AggregationConfig(rho=1.0), wind_capacity=600.0)
        expected = np.minimum(np.array(LADDER), 600.0) + np.array(LADDER) / 10.0
        assert np.allclose(combined.to_numpy(), np.tile(expected, (4, 1)))
        direct = aggregate_hybrid_frame(clip_frame(wind, 600.0), solar, AggregationConfig(rho=1.0))
        assert np.allclose(direct.to_numpy(), combined.to_numpy())
