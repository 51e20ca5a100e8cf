"""Maximal couplings and brute-force Wasserstein/Gamma matrices.

The coupling construction puts mass min(p_u, q_u) on the diagonal and couples
the residuals by their normalized outer product, so the off-diagonal mass
equals the total variation distance exactly: no coupling can do better.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec, Distribution, block_law_given_coordinate, marginal, tv_distance
from .errors import ValidationError
from .gamma import GammaMatrix


@dataclass(frozen=True)
class CouplingTable:
    """Joint law over (support of p) x (support of q) with marginals p and q."""

    joint: np.ndarray

    def row_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    def col_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def off_diagonal_mass(self) -> float:
        return float(self.joint.sum() - np.trace(self.joint))

    def to_dict(self) -> dict:
        return {"shape": list(self.joint.shape), "joint": self.joint.tolist()}


def goldstein_coupling(p: Distribution, q: Distribution) -> CouplingTable:
    """Maximal coupling of two distributions on the same state set.

    The returned table has row sums p, column sums q, and off-diagonal mass
    equal to tv_distance(p, q). The residual outer product is canonical and
    order-independent, so the construction is deterministic.
    """
    if len(p) != len(q):
        raise ValidationError(f"goldstein_coupling: length mismatch {len(p)} vs {len(q)}")
    common = np.minimum(p.probs, q.probs)
    joint = np.diag(common)
    tv = float(p.probs.sum() - common.sum())  # == tv_distance(p, q) for normalized inputs
    if tv > 0.0:
        rp = p.probs - common
        rq = q.probs - common
        joint = joint + np.outer(rp, rq) / tv
    return CouplingTable(joint)


def wasserstein_matrix_tv(spec: ChainSpec, cap: int | None = None) -> GammaMatrix:
    """Exact discrete-metric Gamma matrix by enumeration of conditional block laws.

    Entry (i, j), i < j, is the supremum over pairs of coordinate-i values
    (both with positive marginal probability) of the TV distance between the
    conditional laws of the block (X_j, ..., X_{n-1}). The maximal-coupling
    identity makes this the tightest discrete-metric Wasserstein entry;
    zero-marginal values never constrain the supremum, and TV symmetry makes
    unordered pair enumeration sufficient.
    """
    n = spec.n
    m = np.eye(n)
    for i in range(n - 1):
        support = [int(x) for x in np.flatnonzero(marginal(spec, i).probs > 0.0)]
        if len(support) < 2:
            continue
        for j in range(i + 1, n):
            laws = [block_law_given_coordinate(spec, i, x, j, cap=cap) for x in support]
            worst = 0.0
            for a in range(len(support)):
                for b in range(a + 1, len(support)):
                    worst = max(worst, tv_distance(laws[a], laws[b]))
            m[i, j] = worst
    return GammaMatrix(m, "brute_force_tv")
