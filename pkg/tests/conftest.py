import numpy as np
import pytest

from vinecast.matrix_core import CorrMatrix, CovMatrix
from vinecast.vine_structure import RVineStructure

# Published worked example of the selection method: six stocks with
# their 15 average realized correlations.
REF_ASSETS = ["AXP", "C", "GE", "HD", "IBM", "JPM"]
REF_SELECTION_MEANS = {
    ("C", "JPM"): 0.547, ("AXP", "C"): 0.456, ("C", "GE"): 0.437,
    ("AXP", "JPM"): 0.433, ("GE", "IBM"): 0.400, ("AXP", "GE"): 0.394,
    ("GE", "JPM"): 0.393, ("C", "IBM"): 0.390, ("IBM", "JPM"): 0.362,
    ("AXP", "IBM"): 0.358, ("C", "HD"): 0.355, ("GE", "HD"): 0.352,
    ("AXP", "HD"): 0.333, ("HD", "JPM"): 0.333, ("HD", "IBM"): 0.330,
}


def reference_rbar() -> CorrMatrix:
    idx = {a: i for i, a in enumerate(REF_ASSETS)}
    r = np.eye(6)
    for (a, b), v in REF_SELECTION_MEANS.items():
        r[idx[a], idx[b]] = r[idx[b], idx[a]] = v
    return CorrMatrix(r)


def random_corr(d: int, rng: np.random.Generator) -> CorrMatrix:
    a = rng.standard_normal((d, 2 * d))
    m = a @ a.T
    s = np.sqrt(np.diag(m))
    return CorrMatrix(m / np.outer(s, s))


def random_cov(d: int, rng: np.random.Generator) -> CovMatrix:
    scale = np.exp(rng.uniform(-1.0, 1.0, d))
    r = random_corr(d, rng)
    return CovMatrix(r.values * np.outer(scale, scale))


def persistent_cov_series(n_days: int, d: int, rng: np.random.Generator,
                          noise_dof: int = 24) -> list[CovMatrix]:
    """Synthetic series with persistent log-variances and correlations,
    plus Wishart-style observation noise; always PD."""
    base = random_corr(d, rng).values
    logv = np.zeros((n_days, d))
    z = np.zeros(n_days)
    for t in range(1, n_days):
        logv[t] = 0.05 + 0.9 * logv[t - 1] + 0.3 * rng.standard_normal(d)
        z[t] = 0.55 * z[t - 1] + 0.2 * rng.standard_normal()
    out = []
    for t in range(n_days):
        r = base * np.tanh(1.0 + 0.3 * z[t])
        np.fill_diagonal(r, 1.0)
        s = np.sqrt(np.exp(logv[t]))
        y = r * np.outer(s, s)
        a = np.linalg.cholesky(y)
        g = rng.standard_normal((d, noise_dof)) / np.sqrt(noise_dof)
        y = a @ (g @ g.T) @ a.T
        out.append(CovMatrix((y + y.T) / 2.0, date_index=t))
    return out


def example_structure_6d() -> RVineStructure:
    """The published 6-dimensional worked-example structure (trees T1..T5)."""
    t1 = sorted([(1, 2), (2, 3), (2, 4), (2, 6), (3, 5)])
    i1 = {e: k for k, e in enumerate(t1)}
    levels = [t1]
    unions = {k: frozenset(e) for e, k in i1.items()}
    pair_index = {}

    def add_level(pairs):
        nonlocal unions, pair_index
        prev_unions = unions
        edges = sorted(tuple(sorted((pair_index[a], pair_index[b])))
                       for a, b in pairs)
        unions = {k: prev_unions[a] | prev_unions[b]
                  for k, (a, b) in enumerate(edges)}
        pair_index = {tuple(sorted(prev_unions[a] ^ prev_unions[b])): None
                      for a, b in edges}
        pair_index = {}
        for k, (a, b) in enumerate(edges):
            pair_index[tuple(sorted(prev_unions[a] ^ prev_unions[b]))] = k
        levels.append(edges)

    pair_index = {e: i1[e] for e in t1}
    add_level([((2, 6), (1, 2)), ((1, 2), (2, 3)), ((2, 3), (2, 4)),
               ((2, 3), (3, 5))])
    add_level([((1, 6), (1, 3)), ((1, 3), (3, 4)), ((3, 4), (2, 5))])
    add_level([((3, 6), (1, 4)), ((1, 4), (4, 5))])
    add_level([((4, 6), (1, 5))])
    return RVineStructure(dim=6, trees=tuple(tuple(t) for t in levels))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
