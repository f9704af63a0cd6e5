"""Data-driven selection of the vine structure used for transformation.

The selection works on an averaged correlation matrix (plain empirical
mean or EWMA) and builds the structure tree by tree: each level takes
the maximum spanning tree over the proximity-admissible candidate
edges, weighted by the absolute (partial) correlation the candidate
would carry, computed from the averaged matrix.  A minimum-strength
C-vine selector provides the contrasting structure used as a stress
alternative, and a window scheduler re-selects per moving window.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidStructure
from .matrix_core import CorrMatrix
from .pcor_algebra import pcor_single_block
from .vine_structure import Edge, RVineStructure, minimum_spanning_tree


@dataclass(frozen=True)
class AveragingScheme:
    """Averaging rule for the daily correlation matrices."""

    kind: str = "empirical"
    lam: float = 0.995

    def __post_init__(self) -> None:
        if self.kind not in ("empirical", "ewma"):
            raise ValueError(f"unknown averaging kind {self.kind!r}")
        if self.kind == "ewma" and not 0.0 < self.lam < 1.0:
            raise ValueError("EWMA lambda must lie in (0, 1)")

    def weights(self, n: int) -> np.ndarray:
        if self.kind == "empirical":
            return np.full(n, 1.0 / n)
        w = (1.0 - self.lam) * self.lam ** np.arange(n - 1, -1, -1, dtype=float)
        return w / w.sum()


def average_corr(series: list[CorrMatrix], scheme: AveragingScheme) -> CorrMatrix:
    """Entrywise weighted average; weights are normalized to sum one, so
    the result is a convex combination and stays a correlation matrix."""
    if not series:
        raise ValueError("series must be non-empty")
    dims = {r.dim for r in series}
    if len(dims) != 1:
        raise ValueError("all correlation matrices must share one dimension")
    w = scheme.weights(len(series))
    stacked = np.stack([r.values for r in series])
    return CorrMatrix(np.tensordot(w, stacked, axes=1))


@dataclass(frozen=True)
class AuditRow:
    """One proximity-admissible candidate edge with its selection weight."""

    tree_level: int
    conditioning: tuple[int, ...]
    pair: tuple[int, int]
    weight: float
    selected: bool


def _constraint_of(prev_unions: list[frozenset[int]], i: int, j: int):
    ua, ub = prev_unions[i], prev_unions[j]
    conditioned = tuple(sorted(ua ^ ub))
    conditioning = tuple(sorted(ua & ub))
    return conditioned, conditioning


def select_structure_mst(rbar: CorrMatrix,
                         with_audit: bool = False):
    """Treewise maximum-spanning-tree structure selection.

    Tree 1 maximizes total |average correlation|; level l >= 2 candidate
    edges are the proximity-admissible pairs weighted by the absolute
    partial correlation computed from ``rbar``.  Ties break
    lexicographically on the sorted conditioned pair.
    """
    d = rbar.dim
    rv = rbar.values
    audit: list[AuditRow] = []

    candidates = [((i - 1, j - 1), abs(float(rv[i - 1, j - 1])), (i, j))
                  for i, j in itertools.combinations(range(1, d + 1), 2)]
    chosen = minimum_spanning_tree(d, candidates, maximize=True)
    chosen = sorted((min(a, b) + 1, max(a, b) + 1) for a, b in chosen)
    trees: list[list[Edge]] = [chosen]
    unions = [frozenset(e) for e in chosen]
    if with_audit:
        picked = set(chosen)
        for (a, b), w, (i, j) in candidates:
            audit.append(AuditRow(1, (), (i, j), w, (i, j) in picked))

    for level in range(1, d - 1):
        prev = trees[level - 1]
        cand = []
        for i, j in itertools.combinations(range(len(prev)), 2):
            if not set(prev[i]) & set(prev[j]):
                continue
            conditioned, conditioning = _constraint_of(unions, i, j)
            w = abs(pcor_single_block(rv, (conditioned[0] - 1, conditioned[1] - 1),
                                      [k - 1 for k in conditioning]))
            cand.append(((i, j), w, (conditioned, conditioning)))
        chosen = sorted(minimum_spanning_tree(len(prev), cand, maximize=True))
        trees.append(chosen)
        if with_audit:
            picked = set(chosen)
            for (i, j), w, (conditioned, conditioning) in cand:
                audit.append(AuditRow(level + 1, conditioning, conditioned, w,
                                      (i, j) in picked or (j, i) in picked))
        unions = [unions[a] | unions[b] for a, b in chosen]

    structure = RVineStructure(dim=d, trees=tuple(tuple(t) for t in trees))
    return (structure, audit) if with_audit else structure


def select_cvine_min(rbar: CorrMatrix) -> RVineStructure:
    """C-vine whose per-level root anchors the lowest total |weight|.

    In a C-vine every tree is a star, so from level 2 on all node pairs
    satisfy proximity; the root minimizes the summed absolute partial
    correlations of the edges it would anchor, ties going to the node
    with the lexicographically smallest conditioned label.
    """
    d = rbar.dim
    rv = rbar.values

    sums = np.abs(rv).sum(axis=0) - 1.0
    root = int(np.argmin(sums)) + 1
    tree1 = sorted((min(root, k), max(root, k)) for k in range(1, d + 1) if k != root)
    trees: list[list[Edge]] = [tree1]
    unions = [frozenset(e) for e in tree1]

    for level in range(1, d - 1):
        prev = trees[level - 1]
        n = len(prev)
        weight = np.zeros((n, n))
        for i, j in itertools.combinations(range(n), 2):
            if not set(prev[i]) & set(prev[j]):
                raise InvalidStructure("C-vine level is not a star")
            conditioned, conditioning = _constraint_of(unions, i, j)
            w = abs(pcor_single_block(rv, (conditioned[0] - 1, conditioned[1] - 1),
                                      [k - 1 for k in conditioning]))
            weight[i, j] = weight[j, i] = w
        root_node = int(np.argmin(weight.sum(axis=1)))
        chosen = sorted((min(root_node, k), max(root_node, k))
                        for k in range(n) if k != root_node)
        trees.append(chosen)
        unions = [unions[a] | unions[b] for a, b in chosen]

    return RVineStructure(dim=d, trees=tuple(tuple(t) for t in trees))


def moving_structure_schedule(series: list[CorrMatrix],
                              windows: list[tuple[int, int]],
                              scheme: AveragingScheme,
                              selector: str = "mst") -> list[RVineStructure]:
    """One structure per window, from that window's training data only.

    ``windows`` holds (start, stop) half-open index ranges into the
    series; ``selector`` is ``"mst"`` or ``"cvine_min"``.
    """
    pick = {"mst": select_structure_mst, "cvine_min": select_cvine_min}[selector]
    out = []
    for start, stop in windows:
        if not 0 <= start < stop <= len(series):
            raise ValueError(f"window ({start}, {stop}) out of range")
        rbar = average_corr(series[start:stop], scheme)
        out.append(pick(rbar))
    return out
