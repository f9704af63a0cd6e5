"""Hot numeric kernels with optional numba acceleration.

The sequential recursions used by the margin models (GARCH variance
filter, ARMA residual filter, fractional-differencing convolution) are
the only loops in the package whose runtime grows with the sample size
and cannot be vectorized.  Each kernel exists twice with identical
operation order: a numba ``@njit`` version and a pure-Python fallback.
Setting the environment variable ``VINECAST_NO_NUMBA=1`` before import
selects the fallback path; both paths produce bitwise-identical output.

Run ``python -m benchmarks.bench_kernels`` from the repository root to
compare the two paths.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "USING_NUMBA",
    "fracdiff_coeffs",
    "fracdiff_apply",
    "garch_filter",
    "arma_filter",
]


def _py_fracdiff_apply(x: np.ndarray, pi: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    k_max = pi.shape[0]
    out = np.empty(n)
    for t in range(n):
        acc = 0.0
        top = t + 1 if t + 1 < k_max else k_max
        for k in range(top):
            acc += pi[k] * x[t - k]
        out[t] = acc
    return out


def _py_garch_filter(eps: np.ndarray, omega: float, beta1: float,
                     beta2: float, h0_sq: float) -> np.ndarray:
    n = eps.shape[0]
    h_sq = np.empty(n)
    h_sq[0] = h0_sq
    for t in range(1, n):
        h_sq[t] = omega + beta1 * eps[t - 1] * eps[t - 1] + beta2 * h_sq[t - 1]
    return h_sq


def _py_arma_filter(xd: np.ndarray, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    n = xd.shape[0]
    p = phi.shape[0]
    q = psi.shape[0]
    eps = np.empty(n)
    for t in range(n):
        acc = xd[t]
        for i in range(p):
            if t - 1 - i >= 0:
                acc -= phi[i] * xd[t - 1 - i]
        for j in range(q):
            if t - 1 - j >= 0:
                acc -= psi[j] * eps[t - 1 - j]
        eps[t] = acc
    return eps


_DISABLED = os.environ.get("VINECAST_NO_NUMBA", "0") not in ("", "0")
USING_NUMBA = False

if not _DISABLED:
    try:
        from numba import njit

        fracdiff_apply = njit(cache=True)(_py_fracdiff_apply)
        garch_filter = njit(cache=True)(_py_garch_filter)
        arma_filter = njit(cache=True)(_py_arma_filter)
        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is an optional extra
        pass

if not USING_NUMBA:
    fracdiff_apply = _py_fracdiff_apply
    garch_filter = _py_garch_filter
    arma_filter = _py_arma_filter


def fracdiff_coeffs(d: float, k_max: int) -> np.ndarray:
    """Binomial-expansion coefficients of (1-L)^d, orders 0..k_max.

    pi_0 = 1 and pi_k = pi_{k-1} * (k - 1 - d) / k.
    """
    pi = np.empty(k_max + 1)
    pi[0] = 1.0
    for k in range(1, k_max + 1):
        pi[k] = pi[k - 1] * (k - 1 - d) / k
    return pi
