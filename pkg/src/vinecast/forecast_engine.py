"""End-to-end forecasting pipeline.

Step (S1) transforms a series of covariance matrices into unconstrained
component series (log variances plus Fisher-z partial correlations of a
vine structure, or Cholesky entries for the benchmark path).  Step (S2)
fits one margin model per component and a vine copula across the
innovations.  Step (S3) simulates innovation vectors, forecasts each
component one step ahead, back-transforms each replication and averages
the matrices, which keeps the result symmetric positive definite.  The
module also provides the data-driven volatility bias correction, the
moving-window backtest and the three naive benchmarks.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NotPositiveDefinite
from .margins.models import (
    FittedMargin,
    MarginSpec,
    _base_raw_residuals,
    arfima_forecast,
    fit_margin,
    har_forecast,
    mean_forecast,
    pit,
    pit_inverse,
)
from .matrix_core import (
    CovMatrix,
    VarianceVector,
    assemble_cov,
    cholesky_decompose,
    fisher_z,
    fisher_z_inv,
    split_cov,
)
from .pcor_algebra import PcorVector, corr_to_pcv, pcv_to_corr
from .structure_select import (
    AveragingScheme,
    average_corr,
    select_cvine_min,
    select_structure_mst,
)
from .vine_copula import DependenceSpec, RVineCopula, rvine_fit, rvine_simulate
from .vine_structure import RVineStructure, all_constraints, sample_random_rvine


def derive_seed(root_seed: int, *key: int) -> np.random.SeedSequence:
    """Documented counter-splitting scheme: every random draw in the
    pipeline flows from (root_seed, domain key...)."""
    return np.random.SeedSequence([int(root_seed), *[int(k) for k in key]])


@dataclass(frozen=True)
class TransformConfig:
    """Step-(S1) transform choice.

    kind 'pcv' uses a vine structure chosen by ``selection`` (mst,
    cvine_min, random or fixed); kind 'cholesky' uses a fixed asset
    order (1-based permutation, default identity = input order).
    """

    kind: str = "pcv"
    selection: str = "mst"
    scheme: AveragingScheme = AveragingScheme("empirical")
    fixed_structure: RVineStructure | None = None
    asset_order: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("pcv", "cholesky"):
            raise ConfigError(f"unknown transform kind {self.kind!r}")
        if self.kind == "pcv" and self.selection not in (
                "mst", "cvine_min", "random", "fixed"):
            raise ConfigError(f"unknown structure selection {self.selection!r}")
        if self.selection == "fixed" and self.fixed_structure is None:
            raise ConfigError("fixed selection requires fixed_structure")


@dataclass(frozen=True)
class MarginLadder:
    """Margin spec per component class.

    The pcv path assigns separate specs to variances and to correlation
    components by tree level (1, 2-3, 4+); the cholesky path uses one
    spec for all components.
    """

    variances: MarginSpec = MarginSpec(base="har", garch=True)
    tree1: MarginSpec = MarginSpec(base="har", garch=True)
    tree2_3: MarginSpec = MarginSpec(base="har")
    tree4_plus: MarginSpec = MarginSpec(base="mean")
    all: MarginSpec | None = None

    @classmethod
    def uniform(cls, spec: MarginSpec) -> "MarginLadder":
        return cls(variances=spec, tree1=spec, tree2_3=spec, tree4_plus=spec,
                   all=spec)

    def for_level(self, level: int) -> MarginSpec:
        if self.all is not None:
            return self.all
        if level == 0:
            return self.variances
        if level == 1:
            return self.tree1
        if level <= 3:
            return self.tree2_3
        return self.tree4_plus


@dataclass(frozen=True)
class PipelineConfig:
    transform: TransformConfig = TransformConfig()
    margins: MarginLadder = MarginLadder()
    dependence_mode: str = "full"
    dependence_families: str = "mixed"
    n_replications: int = 1000
    bias_correction_days: int | None = None  # None = off

    def __post_init__(self) -> None:
        if self.n_replications < 1:
            raise ConfigError("n_replications must be >= 1")
        if self.bias_correction_days is not None and self.bias_correction_days < 1:
            raise ConfigError("bias correction horizon must be >= 1 day")


@dataclass(frozen=True)
class WindowConfig:
    train_days: int = 502
    test_days: int = 22
    warmup_days: int = 22

    def __post_init__(self) -> None:
        if min(self.train_days, self.test_days, self.warmup_days) < 1:
            raise ConfigError("window sizes must be positive")


@dataclass(frozen=True)
class TransformMeta:
    """What step (S1) produced: component labels, classes and the
    transform objects needed for inversion."""

    kind: str
    dim: int
    component_ids: tuple[str, ...]
    component_levels: tuple[int, ...]  # 0 = variance/diagonal, else tree level
    structure: RVineStructure | None = None
    asset_order: tuple[int, ...] = ()


@dataclass(frozen=True)
class ForecastRecord:
    day: int
    predicted: CovMatrix
    window: int
    seed_key: tuple[int, ...]
    structure: RVineStructure | None = None
    predicted_bc: CovMatrix | None = None
    bias_factors: tuple[float, ...] = ()


@dataclass(frozen=True)
class FittedModel:
    meta: TransformMeta
    margins: tuple[FittedMargin, ...]
    copula: RVineCopula
    components: np.ndarray  # the (T, K) matrix the model was fitted on


# -- step (S1) ----------------------------------------------------------------

def _chol_order(cfg: TransformConfig, d: int) -> tuple[int, ...]:
    order = cfg.asset_order or tuple(range(1, d + 1))
    if sorted(order) != list(range(1, d + 1)):
        raise ConfigError("asset_order must be a 1-based permutation")
    return tuple(order)


def _chol_component_ids(order: tuple[int, ...]) -> tuple[tuple[str, ...],
                                                         tuple[int, ...]]:
    ids, levels = [], []
    d = len(order)
    for j in range(d):
        for i in range(j + 1):
            ids.append(f"CHOL:{order[i]},{order[j]}")
            levels.append(0 if i == j else 1)
    return tuple(ids), tuple(levels)


def _pcv_component_ids(structure: RVineStructure) -> tuple[tuple[str, ...],
                                                           tuple[int, ...]]:
    d = structure.dim
    ids = [f"VAR:{a}" for a in range(1, d + 1)]
    levels = [0] * d
    for c in all_constraints(structure):
        ids.append("PCOR:" + c.label())
        levels.append(c.tree_level)
    return tuple(ids), tuple(levels)


def select_structure(series: list[CovMatrix], cfg: TransformConfig,
                     seed: np.random.SeedSequence | int | None = 0) -> RVineStructure:
    """Structure choice for the pcv path, from training data only."""
    if cfg.selection == "fixed":
        return cfg.fixed_structure
    if cfg.selection == "random":
        return sample_random_rvine(series[0].dim, seed)
    corrs = [split_cov(y)[1] for y in series]
    rbar = average_corr(corrs, cfg.scheme)
    if cfg.selection == "mst":
        return select_structure_mst(rbar)
    return select_cvine_min(rbar)


def step_s1(series: list[CovMatrix], cfg: TransformConfig,
            structure: RVineStructure | None = None) -> tuple[np.ndarray,
                                                              TransformMeta]:
    """Transform the matrix series into the (T, d(d+1)/2) component matrix.

    The pcv path emits log variances (asset order) followed by Fisher-z
    (partial) correlations in tree order of the given structure; the
    cholesky path emits the upper-triangle entries in recursion order.
    """
    d = series[0].dim
    if cfg.kind == "cholesky":
        order = _chol_order(cfg, d)
        perm = [a - 1 for a in order]
        rows = []
        for y in series:
            c = cholesky_decompose(CovMatrix(y.values[np.ix_(perm, perm)],
                                             date_index=y.date_index))
            rows.append(np.concatenate([c[:j + 1, j] for j in range(d)]))
        ids, levels = _chol_component_ids(order)
        meta = TransformMeta(kind="cholesky", dim=d, component_ids=ids,
                             component_levels=levels, asset_order=order)
        return np.asarray(rows), meta

    if structure is None:
        raise ValueError("pcv transform needs a structure")
    rows = []
    for y in series:
        variances, corr = split_cov(y)
        pcv = corr_to_pcv(corr, structure)
        rows.append(np.concatenate([np.log(variances.values),
                                    fisher_z(pcv.values)]))
    ids, levels = _pcv_component_ids(structure)
    meta = TransformMeta(kind="pcv", dim=d, component_ids=ids,
                         component_levels=levels, structure=structure)
    return np.asarray(rows), meta


def inverse_s1(row: np.ndarray, meta: TransformMeta) -> CovMatrix:
    """Deterministic inverse of one transformed row."""
    d = meta.dim
    if meta.kind == "pcv":
        variances = VarianceVector(np.exp(row[:d]))
        pcv = PcorVector(structure=meta.structure,
                         values=fisher_z_inv(row[d:]))
        return assemble_cov(variances, pcv_to_corr(pcv))
    c = np.zeros((d, d))
    pos = 0
    for j in range(d):
        c[:j + 1, j] = row[pos:pos + j + 1]
        pos += j + 1
    if np.any(np.diag(c) == 0.0):
        raise NotPositiveDefinite("simulated Cholesky diagonal hit zero")
    values = c.T @ c  # PD for any nonsingular triangular factor
    perm = [a - 1 for a in meta.asset_order]
    inv = np.argsort(perm)
    return CovMatrix(values[np.ix_(inv, inv)])


# -- step (S2) ----------------------------------------------------------------

def dependent_subset(meta: TransformMeta) -> tuple[int, ...]:
    """Components carrying dependence in structured mode: variances plus
    tree-1 correlations (pcv) or the diagonal entries (cholesky)."""
    if meta.kind == "pcv":
        keep = {0, 1}
    else:
        keep = {0}
    return tuple(i + 1 for i, lev in enumerate(meta.component_levels)
                 if lev in keep)


def step_s2_fit(components: np.ndarray, meta: TransformMeta,
                cfg: PipelineConfig, align_tail: int | None = None) -> FittedModel:
    """Fit per-component margins, PIT the innovations, fit the copula."""
    n_comp = components.shape[1]
    margins = []
    for idx in range(n_comp):
        spec = cfg.margins.for_level(meta.component_levels[idx])
        margins.append(fit_margin(spec, components[:, idx], align_tail=align_tail))
    u = np.column_stack([pit(m.residuals, m) for m in margins])
    dep = DependenceSpec(
        mode=cfg.dependence_mode, families=cfg.dependence_families,
        dependent=dependent_subset(meta) if cfg.dependence_mode == "structured"
        else (),
    )
    copula = rvine_fit(u, dep)
    return FittedModel(meta=meta, margins=tuple(margins), copula=copula,
                       components=components)


# -- step (S3) ----------------------------------------------------------------

def _margin_point_forecast(margin: FittedMargin, history: np.ndarray) -> float:
    spec, fit = margin.spec, margin.base_fit
    if spec.base == "mean":
        return mean_forecast(fit)
    if spec.base == "har":
        return har_forecast(fit, history)
    return arfima_forecast(fit, history)


def _margin_scale(margin: FittedMargin, history: np.ndarray) -> float:
    if margin.spec.base == "mean":
        return 0.0
    raw = _base_raw_residuals(margin.spec, margin.base_fit, history)
    if margin.garch_fit is not None:
        return float(np.sqrt(margin.garch_fit.next_variance(raw)))
    return float(margin.base_fit.residual_sd)


def step_s3_forecast(fitted: FittedModel, n_replications: int,
                     seed: np.random.SeedSequence | int,
                     history: np.ndarray | None = None,
                     day: int = -1, window: int = -1,
                     seed_key: tuple[int, ...] = ()) -> ForecastRecord:
    """Mean of ``n_replications`` simulation-based matrix forecasts.

    ``history`` holds the component matrix through the day before the
    forecast (defaults to the fitting sample); margin parameters stay
    fixed while conditional means and scales are updated on it.
    """
    if history is None:
        history = fitted.components
    k = history.shape[1]
    mu = np.array([_margin_point_forecast(m, history[:, i])
                   for i, m in enumerate(fitted.margins)])
    scale = np.array([_margin_scale(m, history[:, i])
                      for i, m in enumerate(fitted.margins)])
    if np.all(scale == 0.0):
        predicted = inverse_s1(mu, fitted.meta)
        return ForecastRecord(day=day, predicted=predicted, window=window,
                              seed_key=seed_key, structure=fitted.meta.structure)
    u_sim = rvine_simulate(fitted.copula, n_replications, seed)
    eps = np.column_stack([pit_inverse(u_sim[:, i], m)
                           for i, m in enumerate(fitted.margins)])
    draws = mu[None, :] + eps * scale[None, :]
    acc = np.zeros((fitted.meta.dim, fitted.meta.dim))
    for r in range(n_replications):
        acc += inverse_s1(draws[r], fitted.meta).values
    predicted = CovMatrix(acc / n_replications)
    return ForecastRecord(day=day, predicted=predicted, window=window,
                          seed_key=seed_key, structure=fitted.meta.structure)


def bias_correct(record: ForecastRecord,
                 history_pairs: list[tuple[np.ndarray, np.ndarray]],
                 s_days: int) -> ForecastRecord:
    """Level-matching bias correction of the predicted volatilities.

    Each predicted volatility is scaled by the mean observed/predicted
    volatility ratio over the last ``s_days`` recorded pairs; the
    correlation structure is untouched.
    """
    if len(history_pairs) < s_days:
        raise ValueError(f"need {s_days} (observed, predicted) volatility pairs")
    obs = np.asarray([o for o, _ in history_pairs[-s_days:]])
    pred = np.asarray([p for _, p in history_pairs[-s_days:]])
    factors = np.mean(np.sqrt(obs) / np.sqrt(pred), axis=0)
    variances, corr = split_cov(record.predicted)
    corrected = assemble_cov(VarianceVector(variances.values * factors ** 2), corr)
    return replace(record, predicted_bc=corrected,
                   bias_factors=tuple(float(f) for f in factors))


# -- moving-window orchestration ----------------------------------------------

@dataclass(frozen=True)
class WindowPlan:
    index: int
    fit_start: int      # includes the warmup span
    fit_end: int        # exclusive; training set = last train_days of it
    test_start: int
    test_end: int       # exclusive


def window_schedule(n_days: int, cfg: WindowConfig) -> list[WindowPlan]:
    """Windows advance by ``test_days``; the final window is truncated
    when the data end."""
    lead = cfg.warmup_days + cfg.train_days
    if n_days <= lead:
        raise ConfigError(f"need more than {lead} days, got {n_days}")
    plans = []
    idx = 0
    test_start = lead
    while test_start < n_days:
        test_end = min(test_start + cfg.test_days, n_days)
        plans.append(WindowPlan(index=idx, fit_start=idx * cfg.test_days,
                                fit_end=test_start, test_start=test_start,
                                test_end=test_end))
        idx += 1
        test_start = test_end
    return plans


def _run_window(args) -> list[ForecastRecord]:
    series_values, dates, plan, pipeline, window_cfg, root_seed = args
    series = [CovMatrix(v, date_index=t) for v, t in zip(series_values, dates)]
    fit_span = series[plan.fit_start:plan.fit_end]
    train_span = fit_span[-window_cfg.train_days:]
    structure = None
    if pipeline.transform.kind == "pcv":
        structure = select_structure(train_span, pipeline.transform,
                                     seed=derive_seed(root_seed, plan.index, 0))
    # transform the fit span and the window's test days in one pass
    full_span = series[plan.fit_start:plan.test_end]
    components, meta = step_s1(full_span, pipeline.transform, structure)
    n_fit = plan.fit_end - plan.fit_start
    fitted = step_s2_fit(components[:n_fit], meta, pipeline,
                         align_tail=window_cfg.train_days)
    records = []
    for day in range(plan.test_start, plan.test_end):
        offset = day - plan.fit_start
        seed_key = (root_seed, plan.index, 1, day)
        record = step_s3_forecast(
            fitted, pipeline.n_replications,
            seed=derive_seed(root_seed, plan.index, 1, day),
            history=components[:offset], day=day, window=plan.index,
            seed_key=seed_key,
        )
        records.append(record)
    return records


def run_backtest(series: list[CovMatrix], pipeline: PipelineConfig,
                 window_cfg: WindowConfig, root_seed: int = 0,
                 jobs: int = 1) -> list[ForecastRecord]:
    """Moving-window backtest; per-window refit of structure, margins and
    copula.  Output is independent of ``jobs`` (windows are pure
    functions of the data, the config and the derived seeds)."""
    plans = window_schedule(len(series), window_cfg)
    values = [y.values for y in series]
    dates = [y.date_index for y in series]
    tasks = [(values, dates, plan, pipeline, window_cfg, root_seed)
             for plan in plans]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_window = list(pool.map(_run_window, tasks))
    else:
        per_window = [_run_window(t) for t in tasks]
    records = [r for window in per_window for r in window]
    if pipeline.bias_correction_days is not None:
        records = _apply_bias_correction(records, series,
                                         pipeline.bias_correction_days)
    return records


def _apply_bias_correction(records: list[ForecastRecord],
                           series: list[CovMatrix],
                           s_days: int) -> list[ForecastRecord]:
    history: list[tuple[np.ndarray, np.ndarray]] = []
    out = []
    for rec in records:
        if len(history) >= s_days:
            out.append(bias_correct(rec, history, s_days))
        else:
            out.append(rec)
        observed = np.diag(series[rec.day].values)
        predicted = np.diag(rec.predicted.values)
        history.append((observed, predicted))
    return out


def naive_forecast(series: list[CovMatrix], kind: str,
                   window_cfg: WindowConfig,
                   lam: float = 0.94) -> list[ForecastRecord]:
    """Naive benchmarks on the same horizon as :func:`run_backtest`.

    previous_day repeats the last observed matrix; train_mean averages
    each window's training matrices; riskmetrics runs the EWMA recursion
    seeded with the first training matrix.
    """
    plans = window_schedule(len(series), window_cfg)
    records = []
    if kind == "previous_day":
        for plan in plans:
            for day in range(plan.test_start, plan.test_end):
                records.append(ForecastRecord(
                    day=day, predicted=series[day - 1], window=plan.index,
                    seed_key=()))
        return records
    if kind == "train_mean":
        for plan in plans:
            train = series[plan.fit_end - window_cfg.train_days:plan.fit_end]
            mean = CovMatrix(np.mean([y.values for y in train], axis=0))
            for day in range(plan.test_start, plan.test_end):
                records.append(ForecastRecord(day=day, predicted=mean,
                                              window=plan.index, seed_key=()))
        return records
    if kind != "riskmetrics":
        raise ConfigError(f"unknown naive forecast kind {kind!r}")
    start = window_cfg.warmup_days  # first training day
    pred = series[start].values
    by_day = {}
    for t in range(start + 1, len(series)):
        by_day[t] = pred
        pred = lam * pred + (1.0 - lam) * series[t].values
    for plan in plans:
        for day in range(plan.test_start, plan.test_end):
            records.append(ForecastRecord(
                day=day, predicted=CovMatrix(by_day[day]), window=plan.index,
                seed_key=()))
    return records
