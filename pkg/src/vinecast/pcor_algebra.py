"""Partial-correlation algebra and the vine transform pair.

Partial correlations are computed by three equivalent routes: the
order-raising recursion, simultaneous computation from the inverse of a
correlation submatrix, and a single-pair 2x2 Schur complement.  On top
of these sits the bijection between a positive-definite correlation
matrix and the vector of (partial) correlations assigned to the edges
of any R-vine structure -- in both directions.  The inverse direction
accepts arbitrary values in (-1, 1) per edge and always returns a valid
positive-definite correlation matrix (algebraic independence).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import CorrelationAtBoundary, DegenerateConditioner, SingularMatrix
from .matrix_core import CORR_CLAMP, CorrMatrix
from .vine_structure import EdgeConstraint, RVineStructure, all_constraints


def _chol_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        factor = sla.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"correlation submatrix is singular: {exc}") from exc
    return sla.cho_solve(factor, b, check_finite=False)


@dataclass(frozen=True)
class PcorVector:
    """(Partial) correlation value per edge of a vine structure.

    Values are aligned with the structure's canonical edge order (tree
    by tree); every value lies strictly inside (-1, 1).
    """

    structure: RVineStructure
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        expected = self.structure.dim * (self.structure.dim - 1) // 2
        if values.shape != (expected,):
            raise ValueError(f"expected {expected} edge values, got {values.shape}")
        if np.abs(values).max(initial=0.0) >= 1.0:
            raise ValueError("partial correlations must lie strictly inside (-1, 1)")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def constraints(self) -> list[EdgeConstraint]:
        return all_constraints(self.structure)

    def as_mapping(self) -> dict[EdgeConstraint, float]:
        return dict(zip(self.constraints, self.values))


def pcor_recursion(rho_ij: float, rho_ik: float, rho_jk: float) -> float:
    """Raise the conditioning order by one variable k.

    All three inputs are (partial) correlations given a common set; the
    result conditions additionally on k.
    """
    fi = 1.0 - rho_ik * rho_ik
    fj = 1.0 - rho_jk * rho_jk
    if fi <= CORR_CLAMP or fj <= CORR_CLAMP:
        raise DegenerateConditioner(
            f"conditioning correlation too close to +-1 (factors {fi:.3e}, {fj:.3e})"
        )
    return (rho_ij - rho_ik * rho_jk) / np.sqrt(fi * fj)


def pcor_all_from_corr(omega) -> np.ndarray:
    """All highest-order partial correlations of an index set at once.

    For ``omega`` the correlation submatrix of a set L, entry (k, l) is
    the partial correlation of the k-th and l-th elements given the rest
    of L, obtained from the inverse P as -p_kl / sqrt(p_kk p_ll).  The
    diagonal is returned as 1 by convention.
    """
    if isinstance(omega, CorrMatrix):
        omega = omega.values
    omega = np.asarray(omega, dtype=float)
    p = _chol_solve(omega, np.eye(omega.shape[0]))
    scale = np.sqrt(np.diag(p))
    out = -p / np.outer(scale, scale)
    np.fill_diagonal(out, 1.0)
    return out


def pcor_single_block(r, pair: tuple[int, int], conditioning) -> float:
    """Single partial correlation via the 2x2 Schur complement.

    ``pair`` and ``conditioning`` are 0-based indices into ``r``.  With
    the blocks ordered (pair, conditioning), the Schur complement
    Omega_11 - Omega_12 Omega_22^-1 Omega_21 has entries p~ and the
    partial correlation is p~_12 / sqrt(p~_11 p~_22).
    """
    if isinstance(r, CorrMatrix):
        r = r.values
    r = np.asarray(r, dtype=float)
    i, j = pair
    d_idx = list(conditioning)
    if set(d_idx) & {i, j}:
        raise ValueError("pair and conditioning set must be disjoint")
    if not d_idx:
        return float(r[i, j])
    om12 = r[np.ix_([i, j], d_idx)]
    om22 = r[np.ix_(d_idx, d_idx)]
    schur = r[np.ix_([i, j], [i, j])] - om12 @ _chol_solve(om22, om12.T)
    return float(schur[0, 1] / np.sqrt(schur[0, 0] * schur[1, 1]))


def _check_inside_unit(value: float, what: str) -> float:
    if abs(value) >= 1.0 - CORR_CLAMP:
        raise CorrelationAtBoundary(f"{what} = {value} is at the +-1 boundary")
    return value


def corr_to_pcv(r: CorrMatrix, structure: RVineStructure) -> PcorVector:
    """Transform a correlation matrix into the structure's edge values.

    Tree 1 values are copied from the matrix, tree 2 uses the recursion,
    higher trees the Schur-complement route.  Proceeds strictly treewise.
    """
    if r.dim != structure.dim:
        raise ValueError("correlation matrix and structure dims differ")
    rv = r.values
    values = []
    for c in all_constraints(structure):
        i, j = c.conditioned[0] - 1, c.conditioned[1] - 1
        d_idx = [k - 1 for k in c.conditioning]
        if c.tree_level == 1:
            v = float(rv[i, j])
        elif c.tree_level == 2:
            k = d_idx[0]
            v = pcor_recursion(rv[i, j], rv[i, k], rv[j, k])
        else:
            v = pcor_single_block(rv, (i, j), d_idx)
        values.append(_check_inside_unit(v, f"partial correlation {c.label()}"))
    return PcorVector(structure=structure, values=np.asarray(values))


def pcv_to_corr(p: PcorVector) -> CorrMatrix:
    """Rebuild the correlation matrix from edge values, treewise.

    Valid for any assignment of values in (-1, 1): the result is always
    symmetric positive definite (algebraic independence of the edges).
    """
    d = p.structure.dim
    m = np.eye(d)
    for c, v in zip(all_constraints(p.structure), p.values):
        i, j = c.conditioned[0] - 1, c.conditioned[1] - 1
        d_idx = [k - 1 for k in c.conditioning]
        if c.tree_level == 1:
            rho = v
        elif c.tree_level == 2:
            k = d_idx[0]
            a, b = m[i, k], m[j, k]
            rho = v * np.sqrt((1.0 - a * a) * (1.0 - b * b)) + a * b
        else:
            om12 = m[np.ix_([i, j], d_idx)]
            om22 = m[np.ix_(d_idx, d_idx)]
            q = om12 @ _chol_solve(om22, om12.T)
            rho = v * np.sqrt((1.0 - q[0, 0]) * (1.0 - q[1, 1])) + q[0, 1]
        m[i, j] = m[j, i] = rho
    return CorrMatrix(m)
