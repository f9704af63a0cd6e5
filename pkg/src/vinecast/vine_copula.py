"""R-vine copula dependence model of the component innovations.

Bivariate building blocks (independence, Gaussian, Clayton, Gumbel,
Frank, with 90/180/270-degree rotations of the Archimedean families)
expose density, h-functions (conditional cdfs), their inverses and the
copula cdf.  On top sit sequential tree-by-tree fitting with
Kendall-tau maximum spanning trees, density evaluation under the
simplifying assumption, and inverse-h-cascade simulation.  The four
dependence settings -- independence, full and structured dependence
with mixed or Gaussian-only families -- are handled uniformly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import DegenerateSample, InvalidStructure
from .margins.models import U_CLIP
from .vine_structure import (
    EdgeConstraint,
    RVineStructure,
    _UnionFind,
    all_constraints,
    build_cvine,
    minimum_spanning_tree,
    proximity_pairs,
)

FAMILIES = ("independence", "gaussian", "clayton", "gumbel", "frank")
ROTATABLE = ("clayton", "gumbel")

#: Parameter search ranges for maximum likelihood.
_PARAM_RANGE = {
    "gaussian": (-0.9999, 0.9999),
    "clayton": (1e-4, 28.0),
    "gumbel": (1.0 + 1e-6, 17.0),
    "frank": (1e-4, 35.0),
}


@dataclass(frozen=True)
class PairCopula:
    """Bivariate copula family with rotation and parameter."""

    family: str = "independence"
    rotation: int = 0
    theta: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.rotation not in (0, 90, 180, 270):
            raise ValueError("rotation must be one of 0, 90, 180, 270")
        if self.rotation and self.family not in ROTATABLE:
            raise ValueError(f"{self.family} does not take rotations")
        if self.family == "gaussian" and not -1.0 < self.theta < 1.0:
            raise ValueError("gaussian rho must lie in (-1, 1)")
        if self.family == "clayton" and self.theta <= 0.0:
            raise ValueError("clayton theta must be positive")
        if self.family == "gumbel" and self.theta < 1.0:
            raise ValueError("gumbel theta must be >= 1")
        if self.family == "frank" and self.theta == 0.0:
            raise ValueError("frank theta must be nonzero")

    def to_dict(self) -> dict:
        return {"family": self.family, "rotation": self.rotation,
                "params": [self.theta] if self.family != "independence" else []}

    @classmethod
    def from_dict(cls, data: dict) -> "PairCopula":
        params = data.get("params") or [0.0]
        return cls(family=data["family"], rotation=int(data.get("rotation", 0)),
                   theta=float(params[0]))


def _clip01(u) -> np.ndarray:
    return np.clip(np.asarray(u, dtype=float), U_CLIP, 1.0 - U_CLIP)


def _require_interior(*args) -> None:
    for u in args:
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise ValueError("copula arguments must lie strictly inside (0, 1)")


# -- base-family implementations (rotation 0; all exchangeable) --------------

def _gauss_density(u, v, rho):
    x, y = special.ndtri(u), special.ndtri(v)
    r2 = 1.0 - rho * rho
    z = rho * rho * (x * x + y * y) - 2.0 * rho * x * y
    return np.exp(-z / (2.0 * r2)) / np.sqrt(r2)


def _gauss_h(u, v, rho):
    x, y = special.ndtri(u), special.ndtri(v)
    return special.ndtr((x - rho * y) / np.sqrt(1.0 - rho * rho))


def _gauss_hinv(p, v, rho):
    y = special.ndtri(v)
    return special.ndtr(np.sqrt(1.0 - rho * rho) * special.ndtri(p) + rho * y)


def _gauss_cdf(u, v, rho):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    pts = np.column_stack([special.ndtri(u), special.ndtri(v)])
    mvn = stats.multivariate_normal(mean=[0.0, 0.0],
                                    cov=[[1.0, rho], [rho, 1.0]])
    return np.atleast_1d(mvn.cdf(pts))


def _clayton_cdf(u, v, th):
    return (u ** -th + v ** -th - 1.0) ** (-1.0 / th)


def _clayton_density(u, v, th):
    s = u ** -th + v ** -th - 1.0
    return (1.0 + th) * (u * v) ** (-th - 1.0) * s ** (-2.0 - 1.0 / th)


def _clayton_h(u, v, th):
    s = u ** -th + v ** -th - 1.0
    return v ** (-th - 1.0) * s ** (-1.0 - 1.0 / th)


def _clayton_hinv(p, v, th):
    w = (p * v ** (th + 1.0)) ** (-th / (th + 1.0))
    return (w + 1.0 - v ** -th) ** (-1.0 / th)


def _gumbel_cdf(u, v, th):
    s = (-np.log(u)) ** th + (-np.log(v)) ** th
    return np.exp(-s ** (1.0 / th))


def _gumbel_density(u, v, th):
    lu, lv = -np.log(u), -np.log(v)
    s = lu ** th + lv ** th
    c = np.exp(-s ** (1.0 / th))
    return (c / (u * v) * s ** (-2.0 + 2.0 / th) * (lu * lv) ** (th - 1.0)
            * (1.0 + (th - 1.0) * s ** (-1.0 / th)))


def _gumbel_h(u, v, th):
    lu, lv = -np.log(u), -np.log(v)
    s = lu ** th + lv ** th
    return np.exp(-s ** (1.0 / th)) / v * lv ** (th - 1.0) * s ** (1.0 / th - 1.0)


def _gumbel_hinv(p, v, th):
    p = np.atleast_1d(np.asarray(p, dtype=float))
    v = np.broadcast_to(np.asarray(v, dtype=float), p.shape)
    lo = np.full(p.shape, U_CLIP)
    hi = np.full(p.shape, 1.0 - U_CLIP)
    for _ in range(60):  # bisection: h is monotone in its first argument
        mid = 0.5 * (lo + hi)
        too_big = _gumbel_h(mid, v, th) > p
        hi = np.where(too_big, mid, hi)
        lo = np.where(too_big, lo, mid)
    return 0.5 * (lo + hi)


def _frank_cdf(u, v, th):
    g1 = np.expm1(-th)
    return -np.log1p(np.expm1(-th * u) * np.expm1(-th * v) / g1) / th


def _frank_density(u, v, th):
    g1 = np.expm1(-th)
    num = -th * g1 * np.exp(-th * (u + v))
    den = (g1 + np.expm1(-th * u) * np.expm1(-th * v)) ** 2
    return num / den


def _frank_h(u, v, th):
    gu = np.expm1(-th * u)
    gv = np.expm1(-th * v)
    return np.exp(-th * v) * gu / (np.expm1(-th) + gu * gv)


def _frank_hinv(p, v, th):
    gv = np.expm1(-th * v)
    gu = p * np.expm1(-th) / (np.exp(-th * v) - p * gv)
    return -np.log1p(gu) / th


_BASE = {
    "gaussian": (_gauss_density, _gauss_h, _gauss_hinv, _gauss_cdf),
    "clayton": (_clayton_density, _clayton_h, _clayton_hinv, _clayton_cdf),
    "gumbel": (_gumbel_density, _gumbel_h, _gumbel_hinv, _gumbel_cdf),
    "frank": (_frank_density, _frank_h, _frank_hinv, _frank_cdf),
}


def bicop_density(pc: PairCopula, u, v):
    """Copula density c(u, v); boundary arguments are rejected."""
    _require_interior(u, v)
    u, v = _clip01(u), _clip01(v)
    if pc.family == "independence":
        return np.ones_like(u * v)
    dens = _BASE[pc.family][0]
    if pc.rotation == 0:
        return dens(u, v, pc.theta)
    if pc.rotation == 90:
        return dens(1.0 - u, v, pc.theta)
    if pc.rotation == 180:
        return dens(1.0 - u, 1.0 - v, pc.theta)
    return dens(u, 1.0 - v, pc.theta)


def bicop_cdf(pc: PairCopula, u, v):
    """Copula cdf C(u, v) (finite-difference oracle for the h-functions)."""
    _require_interior(u, v)
    u, v = _clip01(u), _clip01(v)
    if pc.family == "independence":
        return u * v
    cdf = _BASE[pc.family][3]
    if pc.rotation == 0:
        return cdf(u, v, pc.theta)
    if pc.rotation == 90:
        return v - cdf(1.0 - u, v, pc.theta)
    if pc.rotation == 180:
        return u + v - 1.0 + cdf(1.0 - u, 1.0 - v, pc.theta)
    return u - cdf(u, 1.0 - v, pc.theta)


def bicop_h(pc: PairCopula, x, w, conditioned_slot: int = 1):
    """Conditional cdf of the conditioned argument x given w.

    ``conditioned_slot`` names the copula slot x occupies: slot 1
    evaluates h(x | w) = dC(x, w)/dw, slot 2 evaluates dC(w, x)/dw.
    """
    _require_interior(x, w)
    x, w = _clip01(x), _clip01(w)
    if pc.family == "independence":
        return x + 0.0 * w
    if conditioned_slot not in (1, 2):
        raise ValueError("conditioned_slot must be 1 or 2")
    h = _BASE[pc.family][1]
    th, rot = pc.theta, pc.rotation
    if conditioned_slot == 1:
        if rot == 0:
            return h(x, w, th)
        if rot == 90:
            return 1.0 - h(1.0 - x, w, th)
        if rot == 180:
            return 1.0 - h(1.0 - x, 1.0 - w, th)
        return h(x, 1.0 - w, th)
    # base families are exchangeable, so dC(w, x)/dw = h_base(x, w)
    if rot == 0:
        return h(x, w, th)
    if rot == 90:
        return h(x, 1.0 - w, th)
    if rot == 180:
        return 1.0 - h(1.0 - x, 1.0 - w, th)
    return 1.0 - h(1.0 - x, w, th)


def bicop_hinv(pc: PairCopula, p, w, conditioned_slot: int = 1):
    """Inverse of :func:`bicop_h` in the conditioned argument."""
    _require_interior(p, w)
    p, w = _clip01(p), _clip01(w)
    if pc.family == "independence":
        return p + 0.0 * w
    if conditioned_slot not in (1, 2):
        raise ValueError("conditioned_slot must be 1 or 2")
    hinv = _BASE[pc.family][2]
    th, rot = pc.theta, pc.rotation
    if conditioned_slot == 1:
        if rot == 0:
            out = hinv(p, w, th)
        elif rot == 90:
            out = 1.0 - hinv(1.0 - p, w, th)
        elif rot == 180:
            out = 1.0 - hinv(1.0 - p, 1.0 - w, th)
        else:
            out = hinv(p, 1.0 - w, th)
    else:
        if rot == 0:
            out = hinv(p, w, th)
        elif rot == 90:
            out = hinv(p, 1.0 - w, th)
        elif rot == 180:
            out = 1.0 - hinv(1.0 - p, 1.0 - w, th)
        else:
            out = 1.0 - hinv(1.0 - p, w, th)
    return _clip01(out)


# -- Kendall tau helpers ------------------------------------------------------

def _frank_tau(theta: float) -> float:
    d1 = integrate.quad(lambda s: s / np.expm1(s), 0.0, theta)[0] / theta
    return 1.0 - 4.0 / theta * (1.0 - d1)


def tau_to_theta(family: str, tau: float) -> float:
    """Kendall-tau inversion used to initialize maximum likelihood."""
    if family == "gaussian":
        return float(np.sin(np.pi * tau / 2.0))
    if family == "clayton":
        t = max(abs(tau), 1e-4)
        t = min(t, 0.93)
        return float(np.clip(2.0 * t / (1.0 - t), *_PARAM_RANGE["clayton"]))
    if family == "gumbel":
        t = min(max(abs(tau), 1e-4), 0.93)
        return float(np.clip(1.0 / (1.0 - t), *_PARAM_RANGE["gumbel"]))
    if family == "frank":
        t = abs(tau)
        if t < 1e-4:
            return 1e-2
        hi = _PARAM_RANGE["frank"][1]
        theta = hi if _frank_tau(hi) <= t else optimize.brentq(
            lambda th: _frank_tau(th) - t, 1e-3, hi)
        return float(theta if tau >= 0 else -theta)
    raise ValueError(f"no tau inversion for family {family!r}")


def _fit_family(u: np.ndarray, v: np.ndarray, family: str, rotation: int,
                tau: float) -> tuple[PairCopula, float]:
    """MLE for one family/rotation; returns (copula, loglik)."""
    if family == "frank":
        hi = _PARAM_RANGE["frank"][1]
        lo, hi = (1e-4, hi) if tau >= 0 else (-hi, -1e-4)
    else:
        lo, hi = _PARAM_RANGE[family]

    def nll(theta: float) -> float:
        try:
            pc = PairCopula(family=family, rotation=rotation, theta=float(theta))
        except ValueError:
            return np.inf
        dens = bicop_density(pc, u, v)
        if np.any(dens <= 0.0) or not np.all(np.isfinite(dens)):
            return np.inf
        return -float(np.sum(np.log(dens)))

    res = optimize.minimize_scalar(nll, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-8})
    if np.isfinite(res.fun):
        theta = float(res.x)
    else:
        theta = tau_to_theta(family, tau)
    pc = PairCopula(family=family, rotation=rotation, theta=theta)
    return pc, -nll(theta)


def independence_test(u, v, level: float = 0.05) -> bool:
    """True when the Kendall-tau z-test fails to reject independence."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = u.shape[0]
    tau = stats.kendalltau(u, v).statistic
    if not np.isfinite(tau):
        return True
    z = tau * np.sqrt(9.0 * n * (n - 1) / (2.0 * (2.0 * n + 5.0)))
    crit = special.ndtri(1.0 - level / 2.0)
    return bool(abs(z) < crit)


def bicop_fit(u, v, families: str = "mixed") -> PairCopula:
    """Select and fit a pair copula.

    Independence is retained when the tau z-test fails to reject at 5%.
    Otherwise each allowed family (and, for Clayton/Gumbel, the
    rotations matching the sign of tau) is initialized by tau inversion,
    refined by maximum likelihood and ranked by AIC.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("u and v must be one-dimensional and equally long")
    if u.shape[0] < 10 or np.std(u) == 0.0 or np.std(v) == 0.0:
        raise DegenerateSample("sample too small or constant for a copula fit")
    if independence_test(u, v):
        return PairCopula()
    tau = float(stats.kendalltau(u, v).statistic)
    if families == "gaussian_only":
        candidates = [("gaussian", 0)]
    elif families == "mixed":
        candidates = [("gaussian", 0), ("frank", 0)]
        rotations = (0, 180) if tau >= 0 else (90, 270)
        for fam in ROTATABLE:
            candidates.extend((fam, rot) for rot in rotations)
    else:
        raise ValueError(f"unknown family set {families!r}")
    best, best_aic = None, np.inf
    for fam, rot in candidates:
        # rotated Archimedeans see the reflected data; tau flips sign
        eff_tau = tau if rot in (0, 180) else -tau
        pc, ll = _fit_family(u, v, fam, rot, eff_tau)
        aic = 2.0 - 2.0 * ll
        if aic < best_aic:
            best, best_aic = pc, aic
    return best


# -- R-vine copula ------------------------------------------------------------

@dataclass(frozen=True)
class DependenceSpec:
    """Cross-sectional dependence setting.

    ``mode`` is independence/full/structured, ``families`` mixed or
    gaussian_only; ``dependent`` names the 1-based component indices
    carrying dependence in structured mode.
    """

    mode: str = "full"
    families: str = "mixed"
    dependent: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in ("independence", "full", "structured"):
            raise ValueError(f"unknown dependence mode {self.mode!r}")
        if self.families not in ("mixed", "gaussian_only"):
            raise ValueError(f"unknown family set {self.families!r}")
        if self.mode == "structured" and len(self.dependent) < 2:
            raise ValueError("structured mode needs a dependent subset of size >= 2")


@dataclass(frozen=True)
class RVineCopula:
    """Vine structure over component indices plus one pair copula per
    edge, aligned with the structure's canonical edge order."""

    structure: RVineStructure
    pair_copulas: tuple[PairCopula, ...]

    def __post_init__(self) -> None:
        n_edges = self.structure.n_edges()
        if len(self.pair_copulas) != n_edges:
            raise ValueError(f"expected {n_edges} pair copulas, "
                             f"got {len(self.pair_copulas)}")

    @property
    def dim(self) -> int:
        return self.structure.dim

    def constraints(self) -> list[EdgeConstraint]:
        return all_constraints(self.structure)

    def to_dict(self) -> dict:
        data = self.structure.to_dict()
        data["pair_copulas"] = [pc.to_dict() for pc in self.pair_copulas]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RVineCopula":
        structure = RVineStructure.from_dict(data)
        pcs = tuple(PairCopula.from_dict(d) for d in data["pair_copulas"])
        return cls(structure=structure, pair_copulas=pcs)


class _HPropagator:
    """Memoized conditional cdfs F(x | D) along a vine.

    Every value a vine can produce is either a raw column (empty D) or
    an h-function of the edge whose conditioned set is {x, y} for some
    y in D with conditioning D \\ {y}; the recursion finds that edge.
    """

    def __init__(self, cop: RVineCopula, columns: dict[int, np.ndarray]):
        self.by_pair: dict[frozenset, tuple[EdgeConstraint, PairCopula]] = {}
        for c, pc in zip(cop.constraints(), cop.pair_copulas):
            self.by_pair[frozenset(c.conditioned)] = (c, pc)
        self.memo: dict[tuple[int, frozenset], np.ndarray] = {
            (x, frozenset()): u for x, u in columns.items()
        }

    def value(self, x: int, cond: frozenset) -> np.ndarray:
        key = (x, cond)
        if key in self.memo:
            return self.memo[key]
        for y in sorted(cond):
            entry = self.by_pair.get(frozenset((x, y)))
            if entry is None:
                continue
            c, pc = entry
            inner = frozenset(c.conditioning)
            if inner != cond - {y}:
                continue
            fx = self.value(x, inner)
            fy = self.value(y, inner)
            slot = 1 if c.conditioned[0] == x else 2
            out = _clip01(bicop_h(pc, fx, fy, conditioned_slot=slot))
            self.memo[key] = out
            return out
        raise InvalidStructure(f"no edge produces F({x} | {sorted(cond)})")


def rvine_density(cop: RVineCopula, u) -> np.ndarray:
    """Vine copula density: product of pair densities at h-propagated
    arguments, under the simplifying assumption."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    _require_interior(u)
    if u.shape[1] != cop.dim:
        raise ValueError(f"points must have {cop.dim} columns")
    columns = {x + 1: _clip01(u[:, x]) for x in range(cop.dim)}
    prop = _HPropagator(cop, columns)
    logd = np.zeros(u.shape[0])
    for c, pc in zip(cop.constraints(), cop.pair_copulas):
        cond = frozenset(c.conditioning)
        fa = prop.value(c.conditioned[0], cond)
        fb = prop.value(c.conditioned[1], cond)
        logd += np.log(bicop_density(pc, fa, fb))
    return np.exp(logd)


def _sampling_plan(cop: RVineCopula):
    """Peel-off order with per-variable inverse cascades.

    Repeatedly removes one conditioned element of the top remaining
    edge; the removed edges (one per level) form that variable's
    cascade.  Simulation replays the plan in reverse.
    """
    remaining = list(zip(cop.constraints(), cop.pair_copulas))
    variables = set(range(1, cop.dim + 1))
    plan: list[tuple[int, list[tuple[EdgeConstraint, PairCopula]]]] = []
    while len(variables) > 1:
        top_level = len(variables) - 1
        top = [e for e in remaining if e[0].tree_level == top_level]
        if len(top) != 1:
            raise InvalidStructure("vine does not peel to a single top edge")
        x = top[0][0].conditioned[1]
        cascade = sorted((e for e in remaining if x in e[0].conditioned),
                         key=lambda e: -e[0].tree_level)
        if len(cascade) != top_level:
            raise InvalidStructure("peeled variable lacks one edge per level")
        plan.append((x, cascade))
        remaining = [e for e in remaining if x not in e[0].conditioned]
        variables.discard(x)
    plan.append((variables.pop(), []))
    return plan[::-1]


def rvine_simulate(cop: RVineCopula, n: int, seed) -> np.ndarray:
    """Draw ``n`` samples by the inverse-h cascade; deterministic per seed."""
    rng = np.random.default_rng(seed)
    w = _clip01(rng.uniform(size=(n, cop.dim)))
    plan = _sampling_plan(cop)
    prop = _HPropagator(cop, {})
    sampled: dict[int, np.ndarray] = {}
    for col, (x, cascade) in enumerate(plan):
        z = w[:, col]
        for c, pc in cascade:  # highest tree level first
            partner = c.conditioned[0] if c.conditioned[1] == x else c.conditioned[1]
            cond = frozenset(c.conditioning)
            fw = prop.value(partner, cond)
            slot = 1 if c.conditioned[0] == x else 2
            z = bicop_hinv(pc, z, fw, conditioned_slot=slot)
        sampled[x] = z
        prop.memo[(x, frozenset())] = z
    return np.column_stack([sampled[x + 1] for x in range(cop.dim)])


# -- fitting ------------------------------------------------------------------

def _independence_vine(k: int) -> RVineCopula:
    structure = build_cvine(list(range(1, k + 1)))
    pcs = tuple(PairCopula() for _ in range(k * (k - 1) // 2))
    return RVineCopula(structure=structure, pair_copulas=pcs)


def _fit_vine_on(u: np.ndarray, labels: list[int], families: str):
    """Sequential tree-by-tree fit on the given columns.

    Works in positional labels 1..k internally; returns the tree stack
    plus pair copulas keyed by (conditioned, conditioning) tuples in the
    caller's ``labels``.
    """
    n, k = u.shape
    pseudo: dict[tuple[int, frozenset], np.ndarray] = {
        (i + 1, frozenset()): _clip01(u[:, i]) for i in range(k)
    }
    assignments: dict[tuple, PairCopula] = {}

    def tau_of(i: int, j: int, cond: frozenset) -> float:
        t = stats.kendalltau(pseudo[(i, cond)], pseudo[(j, cond)]).statistic
        return float(t) if np.isfinite(t) else 0.0

    def fit_edge(i: int, j: int, cond: frozenset) -> None:
        fi, fj = pseudo[(i, cond)], pseudo[(j, cond)]
        pc = bicop_fit(fi, fj, families=families)
        key = (tuple(sorted((labels[i - 1], labels[j - 1]))),
               tuple(sorted(labels[x - 1] for x in cond)))
        assignments[key] = pc
        pseudo[(i, cond | {j})] = _clip01(bicop_h(pc, fi, fj, conditioned_slot=1))
        pseudo[(j, cond | {i})] = _clip01(bicop_h(pc, fj, fi, conditioned_slot=2))

    candidates = [((i - 1, j - 1), abs(tau_of(i, j, frozenset())), (i, j))
                  for i, j in itertools.combinations(range(1, k + 1), 2)]
    chosen = sorted((min(a, b) + 1, max(a, b) + 1)
                    for a, b in minimum_spanning_tree(k, candidates, maximize=True))
    trees: list[list[tuple[int, int]]] = [chosen]
    unions = [frozenset(e) for e in chosen]
    for i, j in chosen:
        fit_edge(i, j, frozenset())

    for level in range(1, k - 1):
        prev = trees[level - 1]
        cand, info = [], {}
        for a, b in itertools.combinations(range(len(prev)), 2):
            if not set(prev[a]) & set(prev[b]):
                continue
            conditioned = tuple(sorted(unions[a] ^ unions[b]))
            conditioning = unions[a] & unions[b]
            w = abs(tau_of(conditioned[0], conditioned[1], conditioning))
            cand.append(((a, b), w, conditioned))
            info[(a, b)] = (conditioned, conditioning)
        chosen = sorted(minimum_spanning_tree(len(prev), cand, maximize=True))
        trees.append(chosen)
        for a, b in chosen:
            conditioned, conditioning = info[(a, b)]
            fit_edge(conditioned[0], conditioned[1], conditioning)
        unions = [unions[a] | unions[b] for a, b in chosen]

    return trees, assignments


def _extend_structure(k: int, sub: list[int],
                      sub_trees: list[list[tuple[int, int]]]) -> RVineStructure:
    """Embed a sub-vine over the components ``sub`` into a k-dimensional
    structure, completing every level with proximity-admissible filler
    edges (which carry independence copulas).

    The sub-vine trees stay intact as subgraphs, so the embedded edges
    keep their conditioned/conditioning sets.
    """
    m = len(sub)
    hub = sub[0]
    others = [x for x in range(1, k + 1) if x not in set(sub)]

    sub_global = [tuple(sorted((sub[a - 1], sub[b - 1]))) for a, b in sub_trees[0]]
    tree = sorted(sub_global + [tuple(sorted((hub, x))) for x in others])
    trees: list[list[tuple[int, int]]] = [tree]
    sub_map = [tree.index(e) for e in sub_global]  # sub edge pos -> global node

    for level in range(1, k - 1):
        prev = trees[level - 1]
        mandatory: list[tuple[int, int]] = []
        if level <= m - 2:
            mandatory = [tuple(sorted((sub_map[a], sub_map[b])))
                         for a, b in sub_trees[level]]
        uf = _UnionFind(len(prev))
        chosen = []
        for a, b in mandatory:
            if not uf.union(a, b):
                raise InvalidStructure("sub-vine level is not acyclic")
            chosen.append((a, b))
        for a, b in sorted(proximity_pairs(prev)):
            if len(chosen) == len(prev) - 1:
                break
            if uf.union(a, b):
                chosen.append((a, b))
        if len(chosen) != len(prev) - 1:
            raise InvalidStructure("could not complete the structured vine level")
        tree = sorted(chosen)
        if level <= m - 2:
            sub_map = [tree.index(e) for e in mandatory]
        trees.append(tree)

    return RVineStructure(dim=k, trees=tuple(tuple(t) for t in trees))


def _assemble(structure: RVineStructure,
              assignments: dict[tuple, PairCopula]) -> RVineCopula:
    pcs = [assignments.get((c.conditioned, c.conditioning), PairCopula())
           for c in all_constraints(structure)]
    return RVineCopula(structure=structure, pair_copulas=tuple(pcs))


def rvine_fit(u, spec: DependenceSpec) -> RVineCopula:
    """Fit the dependence model to pseudo copula data of shape (n, k).

    The copula's own structure is selected per level by a maximum
    spanning tree on absolute empirical Kendall taus (independent of the
    data-transform vine); pair copulas are fitted level by level with
    pseudo-observations propagated through h-functions.  Independence
    mode returns all-independence; structured mode fits a sub-vine on
    the dependent subset and independence everywhere else.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    _, k = u.shape
    if k < 2:
        raise ValueError("need at least two components")
    if spec.mode == "independence":
        return _independence_vine(k)
    if spec.mode == "full":
        trees, assignments = _fit_vine_on(u, list(range(1, k + 1)), spec.families)
        structure = RVineStructure(dim=k, trees=tuple(tuple(t) for t in trees))
        return _assemble(structure, assignments)
    sub = sorted(set(spec.dependent))
    if any(not 1 <= c <= k for c in sub) or len(sub) < 2:
        raise ValueError("dependent subset indices out of range")
    if len(sub) == k:
        trees, assignments = _fit_vine_on(u, sub, spec.families)
        structure = RVineStructure(dim=k, trees=tuple(tuple(t) for t in trees))
        return _assemble(structure, assignments)
    sub_trees, assignments = _fit_vine_on(u[:, [c - 1 for c in sub]], sub,
                                          spec.families)
    structure = _extend_structure(k, sub, sub_trees)
    return _assemble(structure, assignments)
