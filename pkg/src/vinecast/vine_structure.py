"""Regular-vine tree structures.

An R-vine structure on ``d`` elements is a sequence of ``d - 1`` linked
trees: tree 1 spans the asset indices ``1..d``; the nodes of every later
tree are the edges of its predecessor, and two of them may only be
joined when those edges share a node (proximity condition).  Each edge
identifies a unique conditioned asset pair together with a conditioning
set, derived here from complete unions.

Structures are stored in a canonical form: node pairs sorted within each
edge, edges sorted within each tree, and higher-tree node references
remapped accordingly, which makes equality and serialization
deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidStructure

Edge = tuple[int, int]


@dataclass(frozen=True)
class EdgeConstraint:
    """Conditioned pair and conditioning set identified by a vine edge."""

    conditioned: tuple[int, int]
    conditioning: tuple[int, ...]
    tree_level: int

    def __post_init__(self) -> None:
        i, j = self.conditioned
        if i >= j:
            raise ValueError("conditioned pair must be sorted and distinct")
        if set(self.conditioned) & set(self.conditioning):
            raise ValueError("conditioned and conditioning sets must be disjoint")
        if len(self.conditioning) != self.tree_level - 1:
            raise ValueError("conditioning set size must equal tree_level - 1")

    def label(self) -> str:
        pair = f"{self.conditioned[0]},{self.conditioned[1]}"
        if self.conditioning:
            return pair + "|" + ",".join(str(k) for k in self.conditioning)
        return pair


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _canonicalize(trees: list[list[Edge]]) -> tuple[tuple[Edge, ...], ...]:
    canon: list[tuple[Edge, ...]] = []
    perm: list[int] | None = None  # old edge index -> new, for the previous tree
    for edges in trees:
        if perm is not None:
            edges = [(perm[a], perm[b]) for a, b in edges]
        edges = [(a, b) if a <= b else (b, a) for a, b in edges]
        order = sorted(range(len(edges)), key=lambda k: edges[k])
        perm = [0] * len(edges)
        for new, old in enumerate(order):
            perm[old] = new
        canon.append(tuple(edges[k] for k in order))
    return tuple(canon)


@dataclass(frozen=True)
class RVineStructure:
    """R-vine tree sequence in canonical form.

    ``trees[0]`` holds edges over 1-based asset indices; for ``l >= 1``,
    ``trees[l]`` holds edges over 0-based indices into ``trees[l-1]``.
    Construction canonicalizes but does not validate; call
    :func:`validate` to check the defining properties.
    """

    dim: int
    trees: tuple[tuple[Edge, ...], ...]

    def __post_init__(self) -> None:
        trees = [[(int(a), int(b)) for a, b in t] for t in self.trees]
        object.__setattr__(self, "trees", _canonicalize(trees))

    def n_edges(self) -> int:
        return sum(len(t) for t in self.trees)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "trees": [[{"a": a, "b": b} for a, b in t] for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RVineStructure":
        trees = [[(e["a"], e["b"]) for e in t] for t in data["trees"]]
        return cls(dim=int(data["dim"]), trees=tuple(tuple(t) for t in trees))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _is_spanning_tree(n_nodes: int, edges: list[Edge]) -> bool:
    if len(edges) != n_nodes - 1:
        return False
    uf = _UnionFind(n_nodes)
    return all(uf.union(a, b) for a, b in edges)


def complete_unions(structure: RVineStructure) -> list[list[frozenset[int]]]:
    """Complete union (reachable asset set) of every edge, per tree."""
    unions: list[list[frozenset[int]]] = []
    for level, edges in enumerate(structure.trees):
        current = []
        for a, b in edges:
            if level == 0:
                current.append(frozenset((a, b)))
            else:
                current.append(unions[level - 1][a] | unions[level - 1][b])
        unions.append(current)
    return unions


def validate(structure: RVineStructure) -> ValidationReport:
    """Check the three defining R-vine properties plus pair uniqueness.

    Returns a report naming the first violating edge instead of raising.
    """
    d = structure.dim
    if d < 2:
        return ValidationReport(False, "dimension must be at least 2")
    if len(structure.trees) != d - 1:
        return ValidationReport(
            False, f"expected {d - 1} trees, got {len(structure.trees)}")
    tree1 = list(structure.trees[0])
    for a, b in tree1:
        if not (1 <= a <= d and 1 <= b <= d and a != b):
            return ValidationReport(False, f"tree 1 edge ({a},{b}) is not an asset pair")
    if not _is_spanning_tree(d, [(a - 1, b - 1) for a, b in tree1]):
        return ValidationReport(False, "tree 1 is not a spanning tree on the assets")

    for level in range(1, d - 1):
        prev = structure.trees[level - 1]
        edges = structure.trees[level]
        n_nodes = len(prev)
        if len(edges) != n_nodes - 1:
            return ValidationReport(
                False, f"tree {level + 1} must have {n_nodes - 1} edges")
        for a, b in edges:
            if not (0 <= a < n_nodes and 0 <= b < n_nodes and a != b):
                return ValidationReport(
                    False, f"tree {level + 1} edge ({a},{b}) references unknown nodes")
            if not set(prev[a]) & set(prev[b]):
                return ValidationReport(
                    False,
                    f"tree {level + 1} edge ({a},{b}) violates proximity: "
                    f"{prev[a]} and {prev[b]} share no node",
                )
        if not _is_spanning_tree(n_nodes, list(edges)):
            return ValidationReport(
                False, f"tree {level + 1} is not a spanning tree on tree {level} edges")

    unions = complete_unions(structure)
    seen: dict[frozenset[int], int] = {}
    for level, edges in enumerate(structure.trees):
        for k, (a, b) in enumerate(edges):
            if level == 0:
                conditioned = frozenset((a, b))
            else:
                ua, ub = unions[level - 1][a], unions[level - 1][b]
                conditioned = ua ^ ub
                if len(conditioned) != 2:
                    return ValidationReport(
                        False,
                        f"tree {level + 1} edge #{k} has conditioned set of size "
                        f"{len(conditioned)}",
                    )
            if conditioned in seen:
                return ValidationReport(
                    False,
                    f"asset pair {sorted(conditioned)} appears as conditioned set "
                    f"more than once (tree {level + 1} edge #{k})",
                )
            seen[conditioned] = level
    return ValidationReport(True, "ok")


def constraint_sets(structure: RVineStructure) -> list[list[EdgeConstraint]]:
    """Conditioned/conditioning sets for every edge, per tree."""
    report = validate(structure)
    if not report:
        raise InvalidStructure(report.message)
    unions = complete_unions(structure)
    out: list[list[EdgeConstraint]] = []
    for level, edges in enumerate(structure.trees):
        current = []
        for a, b in edges:
            if level == 0:
                conditioned, conditioning = frozenset((a, b)), frozenset()
            else:
                ua, ub = unions[level - 1][a], unions[level - 1][b]
                conditioning = ua & ub
                conditioned = ua ^ ub
            i, j = sorted(conditioned)
            current.append(EdgeConstraint((i, j), tuple(sorted(conditioning)),
                                          level + 1))
        out.append(current)
    return out


def all_constraints(structure: RVineStructure) -> list[EdgeConstraint]:
    """Flattened constraint list in canonical tree-then-edge order."""
    return [c for tree in constraint_sets(structure) for c in tree]


def build_cvine(order: list[int] | tuple[int, ...]) -> RVineStructure:
    """C-vine whose tree-l root is the l-th element of ``order``."""
    order = list(order)
    d = len(order)
    if sorted(order) != list(range(1, d + 1)):
        raise ValueError("order must be a permutation of 1..d")
    trees: list[list[Edge]] = [[(order[0], order[k]) for k in range(1, d)]]
    for level in range(1, d - 1):
        n_nodes = d - level
        # node 0 of each level is the path edge containing order[level]
        trees.append([(0, j) for j in range(1, n_nodes - 1 + 1)])
    return RVineStructure(dim=d, trees=tuple(tuple(t) for t in trees))


def proximity_pairs(prev_edges: tuple[Edge, ...] | list[Edge]) -> list[Edge]:
    """Admissible node pairs of the next tree: previous edges sharing a node."""
    pairs = []
    for i, j in itertools.combinations(range(len(prev_edges)), 2):
        if set(prev_edges[i]) & set(prev_edges[j]):
            pairs.append((i, j))
    return pairs


def minimum_spanning_tree(n_nodes: int, weighted_edges: list[tuple[Edge, float, tuple]],
                          maximize: bool = False) -> list[Edge]:
    """Prim's algorithm with deterministic tie-breaking.

    ``weighted_edges`` holds ((i, j), weight, tiebreak_key); ties are
    resolved by the smallest tiebreak key.  The start node is node 0.
    """
    sign = -1.0 if maximize else 1.0
    adj: dict[int, list[tuple[Edge, float, tuple]]] = {i: [] for i in range(n_nodes)}
    for (i, j), w, key in weighted_edges:
        adj[i].append(((i, j), sign * w, key))
        adj[j].append(((i, j), sign * w, key))
    in_tree = {0}
    chosen: list[Edge] = []
    while len(in_tree) < n_nodes:
        best = None
        for node in sorted(in_tree):
            for (i, j), w, key in adj[node]:
                if (i in in_tree) == (j in in_tree):
                    continue
                cand = (w, key, (i, j))
                if best is None or cand < best:
                    best = cand
        if best is None:
            raise InvalidStructure("candidate graph is disconnected")
        _, _, (i, j) = best
        chosen.append((i, j))
        in_tree.add(i)
        in_tree.add(j)
    return chosen


def sample_random_rvine(d: int, seed) -> RVineStructure:
    """Random R-vine: per level, a random-weight spanning tree over the
    proximity-admissible graph.  Deterministic for a fixed seed."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    rng = np.random.default_rng(seed)
    tree1_nodes = list(range(1, d + 1))
    candidates = [((i, j), float(w), (i, j)) for (i, j), w in zip(
        itertools.combinations(tree1_nodes, 2),
        rng.random(d * (d - 1) // 2))]
    mst = minimum_spanning_tree(d, [(((i - 1), (j - 1)), w, key)
                                    for (i, j), w, key in candidates])
    trees: list[list[Edge]] = [[(a + 1, b + 1) for a, b in mst]]
    for level in range(1, d - 1):
        prev = trees[level - 1]
        pairs = proximity_pairs(prev)
        weights = rng.random(len(pairs))
        weighted = [((i, j), float(w), (i, j)) for (i, j), w in zip(pairs, weights)]
        trees.append(minimum_spanning_tree(len(prev), weighted))
    return RVineStructure(dim=d, trees=tuple(tuple(t) for t in trees))


def _spanning_trees(n_nodes: int, edges: list[Edge]):
    for combo in itertools.combinations(edges, n_nodes - 1):
        if _is_spanning_tree(n_nodes, list(combo)):
            yield list(combo)


def _count_stacks(prev_edges: list[Edge]) -> int:
    if len(prev_edges) == 1:
        return 1
    pairs = proximity_pairs(prev_edges)
    total = 0
    for tree in _spanning_trees(len(prev_edges), pairs):
        total += _count_stacks(tree)
    return total


def count_rvines(d: int) -> int:
    """Number of labeled regular vines on ``d`` elements.

    Exhaustive enumeration over all proximity-respecting tree stacks for
    d <= 5; the closed-form count d!/2 * 2^((d-2)(d-3)/2) from the vine
    literature otherwise.  (A variant with base d instead of base 2
    circulates; enumeration confirms base 2.)
    """
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if d == 2:
        return 1
    if d <= 5:
        assets = list(range(d))
        all_pairs = list(itertools.combinations(assets, 2))
        total = 0
        for tree1 in _spanning_trees(d, all_pairs):
            total += _count_stacks(tree1)
        return total
    import math

    return math.factorial(d) // 2 * 2 ** ((d - 2) * (d - 3) // 2)
