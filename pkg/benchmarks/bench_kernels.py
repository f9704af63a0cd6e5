"""Benchmark the numba kernels against their pure-numpy/Python fallbacks.

Usage, from the repository root:

    python benchmarks/bench_kernels.py [--n 20000] [--repeats 5]

Both paths share the same operation order, so besides the timing table
the script asserts bitwise-identical outputs.  Set VINECAST_NO_NUMBA=1
to force the whole package onto the fallback path.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vinecast import accel
from vinecast.accel import (
    _py_arma_filter,
    _py_fracdiff_apply,
    _py_garch_filter,
    fracdiff_coeffs,
)


def best_of(fn, args, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=20000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n = args.n
    eps = rng.standard_normal(n)
    x = rng.standard_normal(n)
    pi = fracdiff_coeffs(0.35, min(n - 1, 512))
    phi = np.array([0.4])
    psi = np.array([0.2])

    cases = [
        ("garch_filter", accel.garch_filter, _py_garch_filter,
         (eps, 0.05, 0.1, 0.85, 1.0)),
        ("fracdiff_apply", accel.fracdiff_apply, _py_fracdiff_apply, (x, pi)),
        ("arma_filter", accel.arma_filter, _py_arma_filter, (x, phi, psi)),
    ]

    label = "numba" if accel.USING_NUMBA else "numpy/python (numba disabled)"
    print(f"active path: {label}; n = {n}, best of {args.repeats}\n")
    print(f"{'kernel':<16} {'active [ms]':>12} {'fallback [ms]':>14} "
          f"{'speedup':>8}  bitwise")
    for name, fast, slow, call_args in cases:
        fast(*call_args)  # trigger JIT compilation outside the timing
        t_fast, out_fast = best_of(fast, call_args, args.repeats)
        t_slow, out_slow = best_of(slow, call_args, args.repeats)
        same = np.array_equal(np.asarray(out_fast), np.asarray(out_slow))
        print(f"{name:<16} {t_fast * 1e3:>12.3f} {t_slow * 1e3:>14.3f} "
              f"{t_slow / t_fast:>8.1f}x  {'yes' if same else 'NO'}")
        if not same:
            raise SystemExit(f"{name}: paths disagree")


if __name__ == "__main__":
    main()
