"""Univariate models for the transformed component series.

The model menu mirrors the seven settings used for the component
series: a plain training-set mean, HAR and ARFIMA(p, D, q) base models,
each optionally augmented by a GARCH(1,1) component with normal or SGED
innovations (labels mean / HAR / HN / HSGED / ARFIMA / AN / ASGED).
Also provides residual extraction, the probability integral transform
and its inverse, and one-step-ahead forecasting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from ..accel import arma_filter, fracdiff_apply, fracdiff_coeffs, garch_filter
from ..errors import DegenerateSample, NonStationary, OptimizerDiverged
from .sged import SgedParams, sged_cdf, sged_pdf, sged_quantile, standardized_params

#: PIT outputs are clipped to [U_CLIP, 1 - U_CLIP].
U_CLIP = 1e-6

#: HAR horizons (days); these define the model and are not configurable.
HAR_LAGS = (1, 5, 22)

#: Truncation of the fractional-differencing filter inside the CSS
#: objective; forecasting and the standalone transform use full history.
FIT_FRACDIFF_CAP = 512

_SIMPLEX_TOL = 1e-8


@dataclass(frozen=True)
class MarginSpec:
    """Margin model specification: base model, GARCH flag, innovations."""

    base: str = "har"
    garch: bool = False
    innovations: str = "normal"
    arfima_p: int = 1
    arfima_q: int = 1

    def __post_init__(self) -> None:
        if self.base not in ("mean", "har", "arfima"):
            raise ValueError(f"unknown base model {self.base!r}")
        if self.innovations not in ("normal", "sged"):
            raise ValueError(f"unknown innovation family {self.innovations!r}")
        if self.base == "mean" and self.garch:
            raise ValueError("the mean model takes no GARCH component")
        if self.innovations == "sged" and not self.garch:
            raise ValueError("SGED innovations require a GARCH component")

    @classmethod
    def parse(cls, text: str) -> "MarginSpec":
        """Parse the spec grammar: ``mean``, ``har``, ``har+garch(normal)``,
        ``har+garch(sged)``, ``arfima``, ``arfima+garch(normal)``,
        ``arfima+garch(sged)``."""
        cleaned = text.strip().lower()
        aliases = {
            "hn": "har+garch(normal)", "hsged": "har+garch(sged)",
            "an": "arfima+garch(normal)", "asged": "arfima+garch(sged)",
        }
        cleaned = aliases.get(cleaned, cleaned)
        if "+" not in cleaned:
            return cls(base=cleaned)
        base, _, rest = cleaned.partition("+")
        if not (rest.startswith("garch(") and rest.endswith(")")):
            raise ValueError(f"cannot parse margin spec {text!r}")
        return cls(base=base, garch=True, innovations=rest[6:-1])

    def label(self) -> str:
        if not self.garch:
            return {"mean": "mean", "har": "HAR", "arfima": "ARFIMA"}[self.base]
        prefix = {"har": "H", "arfima": "A"}[self.base]
        return prefix + ("N" if self.innovations == "normal" else "SGED")


@dataclass(frozen=True)
class MeanFit:
    mean: float
    residual_sd: float


@dataclass(frozen=True)
class HarFit:
    """OLS fit of the HAR regression with daily/weekly/monthly averages."""

    alpha: np.ndarray  # (alpha0, alpha1, alpha2, alpha3)
    residual_sd: float
    fallback_mean: bool = False


@dataclass(frozen=True)
class ArfimaFit:
    mu: float
    d: float
    phi: np.ndarray
    psi: np.ndarray
    residual_sd: float
    boundary_d: bool = False


@dataclass(frozen=True)
class GarchFit:
    """GARCH(1,1): h_t^2 = omega + beta1 eps_{t-1}^2 + beta2 h_{t-1}^2."""

    omega: float
    beta1: float
    beta2: float
    h0_sq: float
    innovations: str = "normal"
    sged: SgedParams | None = None

    def __post_init__(self) -> None:
        if not (self.omega > 0.0 and self.beta1 >= 0.0 and self.beta2 >= 0.0):
            raise ValueError("GARCH parameters must satisfy omega>0, betas>=0")
        if not self.beta1 + self.beta2 < 1.0:
            raise NonStationary(
                f"beta1 + beta2 = {self.beta1 + self.beta2:.4f} >= 1")

    def variance_path(self, residuals: np.ndarray) -> np.ndarray:
        return garch_filter(np.asarray(residuals, dtype=float),
                            self.omega, self.beta1, self.beta2, self.h0_sq)

    def next_variance(self, residuals: np.ndarray) -> float:
        h_sq = self.variance_path(residuals)
        return float(self.omega + self.beta1 * residuals[-1] ** 2
                     + self.beta2 * h_sq[-1])


def mean_fit(series) -> MeanFit:
    series = np.asarray(series, dtype=float)
    mean = float(series.mean())
    sd = float(series.std(ddof=1)) if series.size > 1 else 0.0
    return MeanFit(mean=mean, residual_sd=max(sd, 1e-12))


def mean_forecast(fit: MeanFit) -> float:
    return fit.mean


def _har_design(series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t_max = series.shape[0]
    m = HAR_LAGS[2]
    cum = np.concatenate(([0.0], np.cumsum(series)))
    rows = np.arange(m, t_max)
    x = np.column_stack([
        np.ones(rows.size),
        series[rows - 1],
        (cum[rows] - cum[rows - 5]) / 5.0,
        (cum[rows] - cum[rows - 22]) / 22.0,
    ])
    return x, series[rows]


def har_fit(series) -> HarFit:
    """OLS on (1, previous value, 5-day mean, 22-day mean) regressors.

    The first 22 observations are consumed as warm-up.  A rank-deficient
    design (e.g. a constant series) falls back to the mean model, which
    is reported through ``fallback_mean``.
    """
    series = np.asarray(series, dtype=float)
    if series.shape[0] < HAR_LAGS[2] + 2:
        raise ValueError("series too short for a HAR fit")
    x, y = _har_design(series)
    if np.linalg.matrix_rank(x) < x.shape[1]:
        warnings.warn("HAR design is rank deficient; falling back to the mean model")
        mf = mean_fit(series)
        return HarFit(alpha=np.array([mf.mean, 0.0, 0.0, 0.0]),
                      residual_sd=mf.residual_sd, fallback_mean=True)
    alpha, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ alpha
    sd = float(resid.std(ddof=1)) if resid.size > 1 else 0.0
    return HarFit(alpha=alpha, residual_sd=max(sd, 1e-12))


def har_forecast(fit: HarFit, history) -> float:
    """One-step forecast from the last 22 (or more) observations."""
    history = np.asarray(history, dtype=float)
    if history.shape[0] < HAR_LAGS[2]:
        raise ValueError("HAR forecast needs at least 22 trailing observations")
    a = fit.alpha
    return float(a[0] + a[1] * history[-1] + a[2] * history[-5:].mean()
                 + a[3] * history[-22:].mean())


def frac_diff(series, d: float, truncation: int | None = None) -> np.ndarray:
    """(1-L)^d applied by truncated binomial convolution."""
    series = np.asarray(series, dtype=float)
    k_max = series.shape[0] - 1 if truncation is None else int(truncation)
    pi = fracdiff_coeffs(d, min(k_max, series.shape[0] - 1))
    return fracdiff_apply(series, pi)


def _arfima_residuals(series: np.ndarray, mu: float, d: float,
                      phi: np.ndarray, psi: np.ndarray,
                      truncation: int | None) -> np.ndarray:
    x = series - mu
    xd = frac_diff(x, d, truncation)
    return arma_filter(xd, phi, psi)


def arfima_fit(series, p: int = 1, q: int = 1) -> ArfimaFit:
    """Conditional-sum-of-squares estimate of ARFIMA(p, D, q).

    Maximizes the Gaussian CSS objective over (mu, D, phi, psi) with D
    box-constrained to (0.001, 0.499) using a bounded simplex search
    from three starting values of D.  A D estimate pinned at a bound is
    flagged via ``boundary_d``.
    """
    series = np.asarray(series, dtype=float)
    n = series.shape[0]
    if n < 30:
        raise ValueError("series too short for an ARFIMA fit")
    sd = series.std(ddof=1)
    if sd == 0.0:
        raise DegenerateSample("constant series cannot be fit by ARFIMA")
    mu0 = float(series.mean())
    lo = np.array([mu0 - 10 * sd, 1e-3] + [-0.98] * (p + q))
    hi = np.array([mu0 + 10 * sd, 0.499] + [0.98] * (p + q))

    def objective(params: np.ndarray) -> float:
        mu, d = params[0], params[1]
        phi = params[2:2 + p]
        psi = params[2 + p:]
        eps = _arfima_residuals(series, mu, d, phi, psi, FIT_FRACDIFF_CAP)
        msq = float(np.mean(eps * eps))
        if not np.isfinite(msq) or msq <= 0.0:
            return np.inf
        return np.log(msq)

    best = None
    for d0 in (0.1, 0.25, 0.4):
        x0 = np.array([mu0, d0] + [0.0] * (p + q))
        res = optimize.minimize(
            objective, x0, method="Nelder-Mead",
            bounds=optimize.Bounds(lo, hi),
            options={"xatol": _SIMPLEX_TOL, "fatol": _SIMPLEX_TOL,
                     "maxiter": 4000, "maxfev": 4000},
        )
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise OptimizerDiverged("ARFIMA CSS optimization failed from all starts")
    mu, d = best.x[0], best.x[1]
    phi = best.x[2:2 + p].copy()
    psi = best.x[2 + p:].copy()
    eps = _arfima_residuals(series, mu, d, phi, psi, FIT_FRACDIFF_CAP)
    boundary = bool(d <= 2e-3 or d >= 0.498)
    if boundary:
        warnings.warn(f"ARFIMA D estimate {d:.4f} is pinned near its bound")
    return ArfimaFit(mu=float(mu), d=float(d), phi=phi, psi=psi,
                     residual_sd=max(float(eps.std(ddof=1)), 1e-12),
                     boundary_d=boundary)


def arfima_residuals(fit: ArfimaFit, series,
                     truncation: int | None = None) -> np.ndarray:
    """Raw one-step prediction errors implied by the fit (full history)."""
    series = np.asarray(series, dtype=float)
    return _arfima_residuals(series, fit.mu, fit.d, fit.phi, fit.psi, truncation)


def arfima_forecast(fit: ArfimaFit, history) -> float:
    """One-step forecast: ARMA recursion on the fractionally differenced
    series, then inversion of the differencing filter."""
    history = np.asarray(history, dtype=float)
    n = history.shape[0]
    x = history - fit.mu
    pi = fracdiff_coeffs(fit.d, n)
    xd = fracdiff_apply(x, pi[:n])
    eps = arma_filter(xd, fit.phi, fit.psi)
    xd_next = 0.0
    for i, ph in enumerate(fit.phi):
        if n - 1 - i >= 0:
            xd_next += ph * xd[n - 1 - i]
    for j, ps in enumerate(fit.psi):
        if n - 1 - j >= 0:
            xd_next += ps * eps[n - 1 - j]
    x_next = xd_next - float(pi[1:n + 1] @ x[::-1])
    return float(fit.mu + x_next)


def garch_fit(residuals, innovations: str = "normal") -> GarchFit:
    """Constrained MLE of GARCH(1,1) with normal or SGED innovations.

    h_0^2 is initialized at the sample variance.  SGED innovations are
    standardized analytically (zero mean, unit variance), so only the
    shape and skewness enter the likelihood.
    """
    eps = np.asarray(residuals, dtype=float)
    n = eps.shape[0]
    if n < 30:
        raise ValueError("residual series too short for a GARCH fit")
    var = float(eps.var())
    if var <= 0.0:
        raise DegenerateSample("constant residuals cannot be fit by GARCH")
    use_sged = innovations == "sged"

    def neg_loglik(params: np.ndarray) -> float:
        omega, b1, b2 = params[:3]
        if omega <= 0.0 or b1 < 0.0 or b2 < 0.0 or b1 + b2 >= 0.9999:
            return np.inf
        h_sq = garch_filter(eps, omega, b1, b2, var)
        if np.any(h_sq <= 0.0):
            return np.inf
        if use_sged:
            dist = standardized_params(params[3], params[4])
            z = eps / np.sqrt(h_sq)
            dens = sged_pdf(z, dist)
            if np.any(dens <= 0.0):
                return np.inf
            ll = np.sum(np.log(dens)) - 0.5 * np.sum(np.log(h_sq))
        else:
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * h_sq) + eps * eps / h_sq)
        return -ll if np.isfinite(ll) else np.inf

    starts = [(0.05, 0.90), (0.10, 0.80), (0.02, 0.95)]
    lo = [1e-12, 0.0, 0.0] + ([0.4, -0.9] if use_sged else [])
    hi = [10.0 * var, 0.9999, 0.9999] + ([10.0, 0.9] if use_sged else [])
    best = None
    for b1, b2 in starts:
        x0 = [var * (1.0 - b1 - b2), b1, b2] + ([2.0, 0.0] if use_sged else [])
        res = optimize.minimize(
            neg_loglik, np.asarray(x0), method="Nelder-Mead",
            bounds=optimize.Bounds(np.asarray(lo), np.asarray(hi)),
            options={"xatol": _SIMPLEX_TOL, "fatol": _SIMPLEX_TOL,
                     "maxiter": 4000, "maxfev": 4000},
        )
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise OptimizerDiverged("GARCH MLE failed from all starts")
    omega, b1, b2 = best.x[:3]
    if b1 + b2 >= 1.0:
        raise NonStationary(f"optimum beta1 + beta2 = {b1 + b2:.4f} >= 1")
    sged = standardized_params(best.x[3], best.x[4]) if use_sged else None
    return GarchFit(omega=float(omega), beta1=float(b1), beta2=float(b2),
                    h0_sq=var, innovations=innovations, sged=sged)


# ---------------------------------------------------------------------------
# Fitted-margin orchestration used by the forecast engine


@dataclass(frozen=True)
class FittedMargin:
    """One component's margin fit plus everything needed to forecast it."""

    spec: MarginSpec
    base_fit: object
    garch_fit: GarchFit | None
    series: np.ndarray
    residuals: np.ndarray          # standardized innovations
    pit_mean: float                # normal-PIT location (sample mean of eps)
    pit_sd: float                  # normal-PIT scale (sample sd of eps)


def _base_raw_residuals(spec: MarginSpec, fit, series: np.ndarray) -> np.ndarray:
    if spec.base == "mean":
        return series - fit.mean
    if spec.base == "har":
        x, y = _har_design(series)
        return y - x @ fit.alpha
    return arfima_residuals(fit, series, truncation=FIT_FRACDIFF_CAP)


def extract_residuals(spec: MarginSpec, fit, series,
                      garch: GarchFit | None = None) -> np.ndarray:
    """Standardized innovations: raw residuals over h_t (GARCH) or the
    residual standard deviation (plain models)."""
    series = np.asarray(series, dtype=float)
    raw = _base_raw_residuals(spec, fit, series)
    if garch is not None:
        h_sq = garch.variance_path(raw)
        return raw / np.sqrt(h_sq)
    return raw / fit.residual_sd


def fit_margin(spec: MarginSpec, series, align_tail: int | None = None) -> FittedMargin:
    """Fit the base model (plus optional GARCH) and standardize residuals.

    ``align_tail`` trims the reported residuals to the last so-many
    observations so components with different warm-ups stay aligned.
    """
    series = np.asarray(series, dtype=float)
    if spec.base == "mean":
        base = mean_fit(series if align_tail is None else series[-align_tail:])
    elif spec.base == "har":
        base = har_fit(series)
    else:
        base = arfima_fit(series, spec.arfima_p, spec.arfima_q)
    gfit = None
    if spec.garch:
        raw = _base_raw_residuals(spec, base, series)
        gfit = garch_fit(raw, innovations=spec.innovations)
    eps = extract_residuals(spec, base, series, garch=gfit)
    if align_tail is not None:
        eps = eps[-align_tail:]
    sd = float(eps.std(ddof=1)) if eps.size > 1 else 1.0
    return FittedMargin(spec=spec, base_fit=base, garch_fit=gfit, series=series,
                        residuals=eps, pit_mean=float(eps.mean()),
                        pit_sd=max(sd, 1e-12))


def pit(eps, margin: FittedMargin) -> np.ndarray:
    """Probability integral transform of standardized innovations.

    Normal margins use the normal cdf with the sample mean and standard
    deviation of the innovations; SGED margins use the fitted SGED cdf.
    Outputs are clipped away from 0 and 1.
    """
    eps = np.asarray(eps, dtype=float)
    if margin.spec.innovations == "sged" and margin.garch_fit is not None:
        u = sged_cdf(eps, margin.garch_fit.sged)
    else:
        z = (eps - margin.pit_mean) / margin.pit_sd
        u = special.ndtr(z)
    return np.clip(u, U_CLIP, 1.0 - U_CLIP)


def pit_inverse(u, margin: FittedMargin) -> np.ndarray:
    """Inverse PIT mapping copula data back to innovation units."""
    u = np.clip(np.asarray(u, dtype=float), U_CLIP, 1.0 - U_CLIP)
    if margin.spec.innovations == "sged" and margin.garch_fit is not None:
        return np.asarray(sged_quantile(u, margin.garch_fit.sged))
    return margin.pit_mean + margin.pit_sd * special.ndtri(u)


def point_forecast(margin: FittedMargin) -> float:
    """Conditional-mean one-step forecast (no innovation term)."""
    spec, fit = margin.spec, margin.base_fit
    if spec.base == "mean":
        return mean_forecast(fit)
    if spec.base == "har":
        return har_forecast(fit, margin.series)
    return arfima_forecast(fit, margin.series)


def innovation_scale(margin: FittedMargin) -> float:
    """Multiplier applied to a simulated standardized innovation.

    The mean model forecasts deterministically, so its scale is zero;
    plain HAR/ARFIMA use the residual standard deviation; GARCH models
    use the one-step conditional standard deviation.
    """
    if margin.spec.base == "mean":
        return 0.0
    if margin.garch_fit is not None:
        raw = _base_raw_residuals(margin.spec, margin.base_fit, margin.series)
        return float(np.sqrt(margin.garch_fit.next_variance(raw)))
    return float(margin.base_fit.residual_sd)
