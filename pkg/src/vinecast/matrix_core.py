"""Covariance/correlation matrix types and the scalar transforms.

Provides the validated matrix value types, realized-covariance
construction from intraday returns, the variance/correlation split, the
upper-triangular Cholesky transform pair and the Fisher z maps.  All
types are immutable after construction and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AsymmetricMatrix,
    CorrelationAtBoundary,
    NotPositiveDefinite,
    SingularRealizedCov,
)

#: Minimum smallest eigenvalue accepted as positive definite.
PD_EPSILON = 1e-10

#: Correlations with |rho| > 1 - CORR_CLAMP are rejected rather than clamped.
CORR_CLAMP = 1e-7

#: Relative asymmetry up to which inputs are silently symmetrized.
SYM_RTOL = 1e-12


def _symmetrize(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite entries")
    scale = max(np.abs(values).max(), 1.0)
    asym = np.abs(values - values.T).max()
    if asym > SYM_RTOL * scale:
        raise AsymmetricMatrix(
            f"{what} asymmetry {asym:.3e} exceeds {SYM_RTOL:.0e} relative tolerance"
        )
    return (values + values.T) / 2.0


def _check_pd(values: np.ndarray, what: str, exc=NotPositiveDefinite) -> None:
    smallest = float(np.linalg.eigvalsh(values)[0])
    if not smallest > PD_EPSILON:
        raise exc(f"{what} is not positive definite (smallest eigenvalue {smallest:.3e})")


def _freeze(values: np.ndarray) -> np.ndarray:
    values = values.copy()
    values.flags.writeable = False
    return values


@dataclass(frozen=True)
class CovMatrix:
    """Symmetric positive-definite covariance matrix for one day.

    Entries are in squared daily log-return units.  The input is
    symmetrized as (Y + Y')/2 when the relative asymmetry is within
    1e-12, otherwise construction fails.
    """

    values: np.ndarray
    date_index: int | None = None

    def __post_init__(self) -> None:
        values = _symmetrize(self.values, "CovMatrix")
        if not np.all(np.diag(values) > 0.0):
            raise NotPositiveDefinite("CovMatrix has a non-positive diagonal entry")
        _check_pd(values, "CovMatrix")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CorrMatrix:
    """Correlation matrix: unit diagonal, off-diagonals in (-1, 1), PD."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = _symmetrize(self.values, "CorrMatrix")
        if np.abs(np.diag(values) - 1.0).max() > 1e-12:
            raise ValueError("CorrMatrix diagonal must be 1")
        np.fill_diagonal(values, 1.0)
        off = values[~np.eye(values.shape[0], dtype=bool)]
        if off.size and np.abs(off).max() >= 1.0:
            raise ValueError("CorrMatrix off-diagonal entries must lie in (-1, 1)")
        _check_pd(values, "CorrMatrix")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class VarianceVector:
    """Vector of strictly positive daily variances."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("VarianceVector must be one-dimensional")
        if not np.all(np.isfinite(values)) or not np.all(values > 0.0):
            raise ValueError("VarianceVector entries must be finite and > 0")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class IntradayPanel:
    """Intraday log-returns, shape (days, periods_per_day, assets)."""

    returns: np.ndarray
    asset_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim != 3:
            raise ValueError("IntradayPanel returns must have shape (T, M, d)")
        if returns.shape[1] < 1:
            raise ValueError("IntradayPanel needs at least one period per day")
        if not np.all(np.isfinite(returns)):
            raise ValueError("IntradayPanel contains non-finite returns")
        object.__setattr__(self, "returns", _freeze(returns))
        if not self.asset_names:
            names = tuple(str(i + 1) for i in range(returns.shape[2]))
            object.__setattr__(self, "asset_names", names)
        elif len(self.asset_names) != returns.shape[2]:
            raise ValueError("asset_names length must equal the asset count")

    @property
    def days(self) -> int:
        return self.returns.shape[0]

    @property
    def periods_per_day(self) -> int:
        return self.returns.shape[1]

    @property
    def assets(self) -> int:
        return self.returns.shape[2]


def realized_cov(panel: IntradayPanel, day: int) -> CovMatrix:
    """Realized covariance for one day: sum of intraday outer products."""
    if not 0 <= day < panel.days:
        raise IndexError(f"day {day} out of range 0..{panel.days - 1}")
    r = panel.returns[day]
    values = r.T @ r
    values = (values + values.T) / 2.0
    _check_pd(values, f"realized covariance for day {day}", exc=SingularRealizedCov)
    return CovMatrix(values, date_index=day)


def _coarse_grid_cov(r_fine: np.ndarray, grid_stride: int, offset: int,
                     drop_partial_intervals: bool) -> np.ndarray:
    m = r_fine.shape[0]
    sums = []
    if not drop_partial_intervals and offset > 0:
        sums.append(r_fine[:offset].sum(axis=0))
    start = offset
    while start + grid_stride <= m:
        sums.append(r_fine[start:start + grid_stride].sum(axis=0))
        start += grid_stride
    if not drop_partial_intervals and start < m:
        sums.append(r_fine[start:].sum(axis=0))
    coarse = np.asarray(sums)
    values = coarse.T @ coarse
    return (values + values.T) / 2.0


def realized_cov_subsampled(panel_fine: IntradayPanel, grid_stride: int,
                            n_shifts: int, day: int,
                            drop_partial_intervals: bool = True) -> CovMatrix:
    """Subsampled realized covariance: average over shifted coarse grids.

    The coarse grid aggregates ``grid_stride`` consecutive fine periods
    and is shifted ``n_shifts`` times by ``grid_stride / n_shifts`` fine
    periods.  Partial head/tail intervals of shifted grids are dropped
    by default (see module Open Questions in the ingestion config).
    """
    if not 0 <= day < panel_fine.days:
        raise IndexError(f"day {day} out of range 0..{panel_fine.days - 1}")
    if n_shifts < 1:
        raise ValueError("n_shifts must be >= 1")
    if grid_stride < 1 or grid_stride > panel_fine.periods_per_day:
        raise ValueError("grid_stride must be in 1..periods_per_day")
    if grid_stride % n_shifts != 0:
        raise ValueError("n_shifts must divide grid_stride for an even shift step")
    step = grid_stride // n_shifts
    r_fine = panel_fine.returns[day]
    acc = np.zeros((panel_fine.assets, panel_fine.assets))
    for s in range(n_shifts):
        acc += _coarse_grid_cov(r_fine, grid_stride, s * step, drop_partial_intervals)
    values = acc / n_shifts
    _check_pd(values, f"subsampled realized covariance for day {day}",
              exc=SingularRealizedCov)
    return CovMatrix(values, date_index=day)


def split_cov(y: CovMatrix) -> tuple[VarianceVector, CorrMatrix]:
    """Split Y into its variance vector and correlation matrix."""
    variances = np.diag(y.values).copy()
    scale = np.sqrt(variances)
    corr = y.values / np.outer(scale, scale)
    np.fill_diagonal(corr, 1.0)
    return VarianceVector(variances), CorrMatrix(corr)


def assemble_cov(variances: VarianceVector, corr: CorrMatrix,
                 date_index: int | None = None) -> CovMatrix:
    """Exact inverse of :func:`split_cov`."""
    if variances.dim != corr.dim:
        raise ValueError("variance vector and correlation matrix dims differ")
    scale = np.sqrt(variances.values)
    values = corr.values * np.outer(scale, scale)
    return CovMatrix(values, date_index=date_index)


def cholesky_decompose(y: CovMatrix) -> np.ndarray:
    """Upper-triangular C with Y = C'C, by the elementwise recursion.

    c_{ij} = 0 for i > j, c_{jj} = sqrt(y_{jj} - sum_k c_{kj}^2) and
    c_{ij} = (y_{ij} - sum_k c_{ki} c_{kj}) / c_{ii} for i < j.
    """
    d = y.dim
    yv = y.values
    c = np.zeros((d, d))
    for j in range(d):
        for i in range(j):
            c[i, j] = (yv[i, j] - c[:i, i] @ c[:i, j]) / c[i, i]
        pivot = yv[j, j] - c[:j, j] @ c[:j, j]
        if pivot <= 0.0:
            raise NotPositiveDefinite(
                f"Cholesky pivot {pivot:.3e} at index {j} is not positive"
            )
        c[j, j] = np.sqrt(pivot)
    return c


def cholesky_rebuild(c: np.ndarray, date_index: int | None = None) -> CovMatrix:
    """Rebuild Y from upper-triangular Cholesky entries: y_ij = sum c_ki c_kj."""
    c = np.asarray(c, dtype=float)
    if np.abs(np.tril(c, -1)).max(initial=0.0) > 0.0:
        raise ValueError("Cholesky factor must be upper triangular")
    if not np.all(np.diag(c) > 0.0):
        raise NotPositiveDefinite("Cholesky factor diagonal must be positive")
    return CovMatrix(c.T @ c, date_index=date_index)


def fisher_z(rho):
    """Fisher z-transform z = 0.5 log((1+rho)/(1-rho)), elementwise."""
    rho = np.asarray(rho, dtype=float)
    if np.abs(rho).max(initial=0.0) > 1.0 - CORR_CLAMP:
        raise CorrelationAtBoundary(
            f"|rho| exceeds {1.0 - CORR_CLAMP}; input is degenerate"
        )
    return np.arctanh(rho) if rho.ndim else float(np.arctanh(rho))


def fisher_z_inv(z):
    """Inverse Fisher z-transform (tanh), elementwise."""
    z = np.asarray(z, dtype=float)
    return np.tanh(z) if z.ndim else float(np.tanh(z))
