import numpy as np
import pytest

from conftest import persistent_cov_series
from vinecast.errors import ConfigError
from vinecast.forecast_engine import (
    MarginLadder,
    PipelineConfig,
    TransformConfig,
    WindowConfig,
    bias_correct,
    derive_seed,
    inverse_s1,
    naive_forecast,
    run_backtest,
    select_structure,
    step_s1,
    step_s2_fit,
    step_s3_forecast,
    window_schedule,
)
from vinecast.margins.models import MarginSpec
from vinecast.matrix_core import CovMatrix, split_cov
from vinecast.vine_structure import build_cvine

MEAN_LADDER = MarginLadder.uniform(MarginSpec.parse("mean"))


def mean_pipeline(kind="pcv", dependence="independence", n_rep=10):
    return PipelineConfig(
        transform=TransformConfig(kind=kind),
        margins=MEAN_LADDER,
        dependence_mode=dependence,
        dependence_families="gaussian_only",
        n_replications=n_rep,
    )


class TestStepS1:
    def test_constant_identity_series_gives_zeros(self):
        series = [CovMatrix(np.eye(3), date_index=t) for t in range(5)]
        structure = build_cvine([1, 2, 3])
        comp, meta = step_s1(series, TransformConfig(kind="pcv"), structure)
        assert np.allclose(comp, 0.0)
        assert meta.component_ids[:3] == ("VAR:1", "VAR:2", "VAR:3")

    def test_single_day_hand_example(self):
        series = [CovMatrix([[4.0, 2.0], [2.0, 9.0]])]
        structure = build_cvine([1, 2])
        comp, meta = step_s1(series, TransformConfig(kind="pcv"), structure)
        want = [np.log(4.0), np.log(9.0), np.arctanh(1.0 / 3.0)]
        assert np.allclose(comp[0], want)
        assert meta.component_ids == ("VAR:1", "VAR:2", "PCOR:1,2")

    def test_cholesky_hand_example(self):
        series = [CovMatrix([[4.0, 2.0], [2.0, 3.0]])]
        comp, meta = step_s1(series, TransformConfig(kind="cholesky"))
        assert np.allclose(comp[0], [2.0, 1.0, np.sqrt(2.0)])
        assert meta.component_ids == ("CHOL:1,1", "CHOL:1,2", "CHOL:2,2")

    def test_component_order_variances_then_tree_order(self, rng):
        series = persistent_cov_series(10, 4, rng)
        structure = build_cvine([1, 2, 3, 4])
        comp, meta = step_s1(series, TransformConfig(kind="pcv"), structure)
        assert list(meta.component_ids[:4]) == [f"VAR:{i}" for i in range(1, 5)]
        assert meta.component_levels[:4] == (0, 0, 0, 0)
        assert meta.component_levels[4:] == (1, 1, 1, 2, 2, 3)

    @pytest.mark.parametrize("kind", ["pcv", "cholesky"])
    def test_roundtrip_both_paths(self, kind, rng):
        series = persistent_cov_series(40, 4, rng)
        cfg = TransformConfig(kind=kind)
        structure = None
        if kind == "pcv":
            structure = select_structure(series, cfg)
        comp, meta = step_s1(series, cfg, structure)
        for t, y in enumerate(series):
            back = inverse_s1(comp[t], meta)
            assert np.abs(back.values - y.values).max() < 1e-10

    def test_cholesky_respects_asset_order(self, rng):
        series = persistent_cov_series(5, 3, rng)
        cfg = TransformConfig(kind="cholesky", asset_order=(3, 1, 2))
        comp, meta = step_s1(series, cfg)
        assert meta.component_ids[0] == "CHOL:3,3"
        back = inverse_s1(comp[0], meta)
        assert np.abs(back.values - series[0].values).max() < 1e-10


class TestStepS2S3:
    def test_mean_margins_independence_deterministic(self, rng):
        series = persistent_cov_series(60, 3, rng)
        structure = select_structure(series, TransformConfig(kind="pcv"))
        comp, meta = step_s1(series, TransformConfig(kind="pcv"), structure)
        fitted = step_s2_fit(comp, meta, mean_pipeline(n_rep=1))
        rec_a = step_s3_forecast(fitted, 1, derive_seed(0, 0, 1))
        rec_b = step_s3_forecast(fitted, 500, derive_seed(1, 2, 3))
        assert np.array_equal(rec_a.predicted.values, rec_b.predicted.values)
        means = comp.mean(axis=0)
        assert np.abs(rec_a.predicted.values
                      - inverse_s1(means, meta).values).max() < 1e-12

    def test_seeded_forecast_reproducible(self, rng):
        series = persistent_cov_series(80, 3, rng)
        cfg = PipelineConfig(
            transform=TransformConfig(kind="pcv"),
            margins=MarginLadder.uniform(MarginSpec.parse("har")),
            dependence_mode="full", dependence_families="gaussian_only",
            n_replications=25)
        structure = select_structure(series, cfg.transform)
        comp, meta = step_s1(series, cfg.transform, structure)
        fitted = step_s2_fit(comp, meta, cfg, align_tail=50)
        a = step_s3_forecast(fitted, 25, derive_seed(5, 1, 1))
        b = step_s3_forecast(fitted, 25, derive_seed(5, 1, 1))
        c = step_s3_forecast(fitted, 25, derive_seed(5, 1, 2))
        assert np.array_equal(a.predicted.values, b.predicted.values)
        assert not np.array_equal(a.predicted.values, c.predicted.values)

    def test_monte_carlo_convergence(self, rng):
        # replication means settle within ~3 standard errors
        series = persistent_cov_series(90, 3, rng)
        cfg = PipelineConfig(
            transform=TransformConfig(kind="pcv"),
            margins=MarginLadder.uniform(MarginSpec.parse("har")),
            dependence_mode="full", dependence_families="gaussian_only",
            n_replications=1)
        structure = select_structure(series, cfg.transform)
        comp, meta = step_s1(series, cfg.transform, structure)
        fitted = step_s2_fit(comp, meta, cfg, align_tail=60)
        small = step_s3_forecast(fitted, 2000, derive_seed(7, 0, 0))
        large = step_s3_forecast(fitted, 20000, derive_seed(7, 0, 1))
        singles = [step_s3_forecast(fitted, 1, derive_seed(7, 1, i)).predicted.values
                   for i in range(200)]
        se = np.std(singles, axis=0) / np.sqrt(2000)
        gap = np.abs(small.predicted.values - large.predicted.values)
        assert np.all(gap < 3.5 * se + 1e-12)

    def test_hierarchical_ladder_config_fits(self, rng):
        series = persistent_cov_series(140, 6, rng, noise_dof=40)
        cfg = PipelineConfig(
            transform=TransformConfig(kind="pcv"),
            margins=MarginLadder(
                variances=MarginSpec.parse("arfima+garch(normal)"),
                tree1=MarginSpec.parse("arfima+garch(normal)"),
                tree2_3=MarginSpec.parse("arfima"),
                tree4_plus=MarginSpec.parse("mean")),
            dependence_mode="structured", dependence_families="gaussian_only",
            n_replications=5)
        structure = select_structure(series, cfg.transform)
        comp, meta = step_s1(series, cfg.transform, structure)
        fitted = step_s2_fit(comp, meta, cfg, align_tail=100)
        labels = [m.spec.label() for m in fitted.margins]
        for lab, level in zip(labels, meta.component_levels):
            if level in (0, 1):
                assert lab == "AN"
            elif level in (2, 3):
                assert lab == "ARFIMA"
            else:
                assert lab == "mean"
        rec = step_s3_forecast(fitted, 5, derive_seed(3, 0, 0))
        assert np.linalg.eigvalsh(rec.predicted.values)[0] > 0


class TestBiasCorrection:
    def test_perfect_history_changes_nothing(self, rng):
        series = persistent_cov_series(10, 3, rng)
        record = _record(series[5])
        pairs = [(np.diag(y.values), np.diag(y.values)) for y in series]
        out = bias_correct(record, pairs, s_days=8)
        assert np.abs(out.predicted_bc.values - record.predicted.values).max() < 1e-12
        assert np.allclose(out.bias_factors, 1.0)

    def test_half_scale_history_quadruples_variances(self, rng):
        y = persistent_cov_series(6, 2, rng)[0]
        record = _record(y)
        pairs = [(np.diag(y.values), np.diag(y.values) / 4.0)] * 5
        out = bias_correct(record, pairs, s_days=5)
        assert np.allclose(np.diag(out.predicted_bc.values),
                           4.0 * np.diag(y.values))

    def test_correlations_untouched(self, rng):
        y = persistent_cov_series(6, 3, rng)[0]
        record = _record(y)
        pairs = [(np.diag(y.values) * rng.uniform(0.5, 2.0, 3),
                  np.diag(y.values)) for _ in range(7)]
        out = bias_correct(record, pairs, s_days=7)
        _, corr_before = split_cov(record.predicted)
        _, corr_after = split_cov(out.predicted_bc)
        assert np.array_equal(corr_before.values, corr_after.values)


def _record(cov):
    from vinecast.forecast_engine import ForecastRecord
    return ForecastRecord(day=0, predicted=cov, window=0, seed_key=())


class TestWindowSchedule:
    def test_production_window_arithmetic(self):
        plans = window_schedule(2156, WindowConfig(502, 22, 22))
        assert plans[0].test_start == 524          # forecast day 525, 1-based
        assert len(plans) == 75
        total = sum(p.test_end - p.test_start for p in plans)
        assert total == 1632
        assert plans[-1].test_end - plans[-1].test_start == 4

    def test_single_forecast_boundary(self):
        plans = window_schedule(525, WindowConfig(502, 22, 22))
        assert len(plans) == 1
        assert plans[0].test_end - plans[0].test_start == 1

    def test_too_short_rejected(self):
        with pytest.raises(ConfigError):
            window_schedule(524, WindowConfig(502, 22, 22))


class TestBacktest:
    def test_window_splits_concatenate(self, rng):
        # no cross-window leakage: each window recomputed standalone
        series = persistent_cov_series(120, 3, rng)
        wc = WindowConfig(train_days=50, test_days=20, warmup_days=22)
        cfg = mean_pipeline()
        full = run_backtest(series, cfg, wc, root_seed=3)
        plans = window_schedule(len(series), wc)
        assert [r.day for r in full] == [
            d for p in plans for d in range(p.test_start, p.test_end)]
        assert len({r.window for r in full}) == len(plans)

    def test_jobs_do_not_change_output(self, rng):
        series = persistent_cov_series(110, 3, rng)
        wc = WindowConfig(train_days=50, test_days=15, warmup_days=22)
        cfg = mean_pipeline(dependence="full")
        a = run_backtest(series, cfg, wc, root_seed=9, jobs=1)
        b = run_backtest(series, cfg, wc, root_seed=9, jobs=4)
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert np.array_equal(x.predicted.values, y.predicted.values)

    def test_bias_corrected_series_appears_after_s_days(self, rng):
        series = persistent_cov_series(130, 3, rng)
        wc = WindowConfig(train_days=50, test_days=20, warmup_days=22)
        cfg = PipelineConfig(
            transform=TransformConfig(kind="pcv"),
            margins=MEAN_LADDER, dependence_mode="independence",
            n_replications=1, bias_correction_days=30)
        recs = run_backtest(series, cfg, wc, root_seed=1)
        assert all(r.predicted_bc is None for r in recs[:30])
        assert all(r.predicted_bc is not None for r in recs[30:])

    def test_benchmark_sanity_constant_dgp(self):
        # constant truth + Wishart noise: the previous-day forecast
        # carries double the noise, the mean pipeline almost none
        rng = np.random.default_rng(314)
        truth = np.array([[1.0, 0.4, 0.2], [0.4, 1.0, 0.3], [0.2, 0.3, 1.0]])
        a = np.linalg.cholesky(truth)
        series = []
        for t in range(140):
            g = rng.standard_normal((3, 30)) / np.sqrt(30)
            y = a @ (g @ g.T) @ a.T
            series.append(CovMatrix((y + y.T) / 2, date_index=t))
        wc = WindowConfig(train_days=60, test_days=20, warmup_days=22)
        recs = run_backtest(series, mean_pipeline(), wc, root_seed=0)
        naive = naive_forecast(series, "previous_day", wc)
        def rmse(records):
            return np.sqrt(np.mean([
                np.sum((r.predicted.values - series[r.day].values) ** 2)
                for r in records]))
        assert rmse(recs) < rmse(naive)


class TestNaive:
    def test_constant_series_all_three(self, rng):
        y = persistent_cov_series(2, 2, rng)[0]
        series = [CovMatrix(y.values, date_index=t) for t in range(60)]
        wc = WindowConfig(train_days=20, test_days=10, warmup_days=5)
        for kind in ("previous_day", "train_mean", "riskmetrics"):
            recs = naive_forecast(series, kind, wc)
            for r in recs:
                assert np.abs(r.predicted.values - y.values).max() < 1e-12

    def test_riskmetrics_hand_recursion(self):
        # training data (4), (9): the forecast after the seed day is the
        # seed itself, the next one is 0.94*4 + 0.06*9 = 4.3
        series = [CovMatrix([[2.0]], date_index=0),   # warmup day
                  CovMatrix([[4.0]], date_index=1),
                  CovMatrix([[9.0]], date_index=2),
                  CovMatrix([[1.0]], date_index=3)]
        wc = WindowConfig(train_days=1, test_days=2, warmup_days=1)
        recs = naive_forecast(series, "riskmetrics", wc, lam=0.94)
        assert recs[0].predicted.values[0, 0] == pytest.approx(4.0)
        assert recs[1].predicted.values[0, 0] == pytest.approx(4.3)

    def test_lambda_zero_equals_previous_day(self, rng):
        series = persistent_cov_series(50, 2, rng)
        wc = WindowConfig(train_days=15, test_days=10, warmup_days=5)
        rm = naive_forecast(series, "riskmetrics", wc, lam=0.0)
        pd = naive_forecast(series, "previous_day", wc)
        for a, b in zip(rm, pd):
            assert np.abs(a.predicted.values - b.predicted.values).max() < 1e-12

    def test_train_mean(self, rng):
        series = persistent_cov_series(40, 2, rng)
        wc = WindowConfig(train_days=10, test_days=5, warmup_days=5)
        recs = naive_forecast(series, "train_mean", wc)
        want = np.mean([y.values for y in series[5:15]], axis=0)
        assert np.abs(recs[0].predicted.values - want).max() < 1e-12
