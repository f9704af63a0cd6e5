"""Statistical and economic forecast evaluation.

Componentwise and Frobenius RMSE, a model-confidence-set procedure
(range statistic with stationary-bootstrap p-values and iterative
elimination), the closed-form minimum-variance portfolio under a target
return, and expected/ex-post efficient frontiers with 252-day
annualization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleTarget
from .matrix_core import CovMatrix

TRADING_DAYS = 252


@dataclass(frozen=True)
class LossPanel:
    """Per-day losses, one column per model."""

    models: tuple[str, ...]
    losses: np.ndarray  # (T, n_models)

    def __post_init__(self) -> None:
        losses = np.asarray(self.losses, dtype=float)
        if losses.ndim != 2 or losses.shape[1] != len(self.models):
            raise ValueError("losses must be (T, n_models)")
        if not np.all(np.isfinite(losses)):
            raise ValueError("losses must be finite")
        object.__setattr__(self, "losses", losses)


@dataclass(frozen=True)
class McsResult:
    superior: tuple[str, ...]
    eliminated: tuple[str, ...]  # in elimination order, worst first
    pvalues: tuple[float, ...]   # test p-value at each elimination step


def rmse_frobenius(forecasts: list[CovMatrix], actuals: list[CovMatrix]) -> float:
    """sqrt(mean_t ||Yhat_t - Y_t||_F^2)."""
    losses = frobenius_losses(forecasts, actuals)
    return float(np.sqrt(losses.mean()))


def frobenius_losses(forecasts: list[CovMatrix],
                     actuals: list[CovMatrix]) -> np.ndarray:
    if len(forecasts) != len(actuals):
        raise ValueError("forecast and actual series lengths differ")
    out = np.empty(len(forecasts))
    for t, (f, a) in enumerate(zip(forecasts, actuals)):
        diff = f.values - a.values
        out[t] = np.sum(diff * diff)
    return out


def rmse_component(forecasts: np.ndarray, actuals: np.ndarray) -> np.ndarray:
    """Per-column RMSE of two aligned (T, k) series."""
    forecasts = np.atleast_2d(np.asarray(forecasts, dtype=float))
    actuals = np.atleast_2d(np.asarray(actuals, dtype=float))
    if forecasts.shape != actuals.shape:
        raise ValueError("forecast and actual shapes differ")
    return np.sqrt(np.mean((forecasts - actuals) ** 2, axis=0))


def stationary_bootstrap_indices(n: int, mean_block: float, n_boot: int,
                                 seed) -> np.ndarray:
    """Politis-Romano stationary bootstrap index matrix (n_boot, n)."""
    rng = np.random.default_rng(seed)
    p = 1.0 / mean_block
    starts = rng.integers(0, n, size=(n_boot, n))
    fresh = rng.random(size=(n_boot, n)) < p
    fresh[:, 0] = True
    idx = np.empty((n_boot, n), dtype=np.int64)
    for b in range(n_boot):
        cur = 0
        for t in range(n):
            cur = starts[b, t] if fresh[b, t] else (cur + 1) % n
            idx[b, t] = cur
    return idx


def mcs(panel: LossPanel, alpha: float = 0.10, block_len: float = 22.0,
        n_boot: int = 2000, seed=0) -> McsResult:
    """Model confidence set by range-statistic elimination.

    Bootstrap indices are drawn once and reused across elimination
    rounds, so the procedure is deterministic per seed.  The model with
    the smallest sample loss is never eliminated; elimination stops when
    the equivalence test survives at level ``alpha``.
    """
    losses = panel.losses
    n, k = losses.shape
    if k == 1:
        return McsResult(superior=panel.models, eliminated=(), pvalues=())
    idx = stationary_bootstrap_indices(n, block_len, n_boot, seed)
    boot_means_full = losses[idx].mean(axis=1)  # (n_boot, k)
    means_full = losses.mean(axis=0)

    surviving = list(range(k))
    eliminated: list[str] = []
    pvalues: list[float] = []
    while len(surviving) > 1:
        means = means_full[surviving]
        boot = boot_means_full[:, surviving]
        dbar = means[:, None] - means[None, :]
        dstar = boot[:, :, None] - boot[:, None, :]
        var = np.mean((dstar - dbar[None, :, :]) ** 2, axis=0)
        np.fill_diagonal(var, 1.0)
        # zero bootstrap variance: identical losses give t = 0, constant
        # nonzero loss gaps are decisively significant
        degenerate = var <= 0.0
        se = np.sqrt(np.where(degenerate, 1.0, var))
        with np.errstate(invalid="ignore"):
            tstat = np.where(degenerate, np.sign(dbar) * np.inf, dbar / se)
        tstat = np.where(degenerate & (dbar == 0.0), 0.0, tstat)
        t_range = np.abs(tstat).max()
        t_boot = np.abs((dstar - dbar[None, :, :]) / se[None, :, :])
        t_boot[:, degenerate] = 0.0
        t_range_boot = t_boot.reshape(n_boot, -1).max(axis=1)
        pval = float(np.mean(t_range_boot >= t_range))
        if pval >= alpha:
            pvalues.append(pval)
            break
        best = int(np.argmin(means))
        worst_scores = tstat.max(axis=1)
        worst_scores[best] = -np.inf
        worst = int(np.argmax(worst_scores))
        eliminated.append(panel.models[surviving[worst]])
        pvalues.append(pval)
        surviving.pop(worst)
    return McsResult(
        superior=tuple(panel.models[i] for i in surviving),
        eliminated=tuple(eliminated),
        pvalues=tuple(pvalues),
    )


def min_variance_weights(cov: CovMatrix, expected: np.ndarray,
                         target: float) -> np.ndarray:
    """Closed-form minimum-variance weights under full investment and a
    target expected return; shorting is allowed."""
    sigma = cov.values
    mu = np.asarray(expected, dtype=float)
    d = sigma.shape[0]
    if mu.shape != (d,):
        raise ValueError("expected-return vector has wrong length")
    ones = np.ones(d)
    s_inv_1 = np.linalg.solve(sigma, ones)
    s_inv_mu = np.linalg.solve(sigma, mu)
    a = ones @ s_inv_1
    b = ones @ s_inv_mu
    c = mu @ s_inv_mu
    delta = a * c - b * b
    scale = max(abs(a), abs(b), abs(c), 1.0)
    if delta <= 1e-12 * scale:
        gmv_return = b / a
        if abs(target - gmv_return) <= 1e-10 * max(1.0, abs(gmv_return)):
            return s_inv_1 / a
        raise InfeasibleTarget(
            "expected returns are all equal; only the common value is feasible")
    lam = (c - b * target) / delta
    gam = (a * target - b) / delta
    return lam * s_inv_1 + gam * s_inv_mu


def expected_returns(returns: np.ndarray, window: tuple[int, int]) -> np.ndarray:
    """Training-window sample mean of daily returns (rows are days)."""
    returns = np.atleast_2d(np.asarray(returns, dtype=float))
    start, stop = window
    if not 0 <= start < stop <= returns.shape[0]:
        raise ValueError(f"window ({start}, {stop}) out of range")
    return returns[start:stop].mean(axis=0)


def efficient_frontier(forecasts: list[CovMatrix], expected: np.ndarray,
                       targets: np.ndarray) -> np.ndarray:
    """Average expected frontier: per day and target, minimize w'Yhat w,
    record sqrt(w'Yhat w), then average over days.

    ``expected`` is either one vector or a (T, d) matrix of per-day
    expected returns.  Returns (len(targets),) average expected sd.
    """
    targets = np.asarray(targets, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if expected.ndim == 1:
        expected = np.tile(expected, (len(forecasts), 1))
    if expected.shape[0] != len(forecasts):
        raise ValueError("per-day expected returns misaligned with forecasts")
    sds = np.empty((len(forecasts), targets.size))
    for t, cov in enumerate(forecasts):
        for g, tgt in enumerate(targets):
            w = min_variance_weights(cov, expected[t], float(tgt))
            sds[t, g] = np.sqrt(w @ cov.values @ w)
    return sds.mean(axis=0)


def expost_frontier(weights: np.ndarray, realized_returns: np.ndarray,
                    actuals: list[CovMatrix]) -> dict:
    """Ex-post bookkeeping for one weight series.

    Returns the per-day realized portfolio returns w'r and volatilities
    sqrt(w'Y w) plus annualized averages (x252 for returns, xsqrt(252)
    for standard deviations).
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    realized_returns = np.atleast_2d(np.asarray(realized_returns, dtype=float))
    if not (len(actuals) == weights.shape[0] == realized_returns.shape[0]):
        raise ValueError("weights, returns and actuals must align by day")
    r_p = np.sum(weights * realized_returns, axis=1)
    sd_p = np.array([np.sqrt(w @ y.values @ w)
                     for w, y in zip(weights, actuals)])
    return {
        "portfolio_returns": r_p,
        "portfolio_sds": sd_p,
        "annualized_return": float(r_p.mean() * TRADING_DAYS),
        "annualized_sd": float(sd_p.mean() * np.sqrt(TRADING_DAYS)),
    }
