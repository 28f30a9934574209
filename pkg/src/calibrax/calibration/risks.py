"""Excess risks of the quadratic surrogate and of the task loss."""

from __future__ import annotations

import numpy as np

from ..losses import LossMatrix
from ..subspaces import ScoreSubspace

SIMPLEX_TOL = 1e-10
# relative tolerance under which two scores count as tied in the predictor
TIE_RTOL = 1e-10


def check_distribution(q, m: int) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != m:
        raise ValueError(f"distribution has length {q.size}, expected {m}")
    if np.any(q < -1e-12) or abs(q.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("q is not in the probability simplex")
    return q


def optimal_theta(S: ScoreSubspace, L: LossMatrix, q) -> np.ndarray:
    """Surrogate minimizer over the subspace: theta* = -(F'F)^+ F' L q."""
    q = check_distribution(q, L.m)
    return -S.projector.gram_pinv @ (S.F.T @ (L.L @ q))


def excess_surrogate(S: ScoreSubspace, L: LossMatrix, theta, q) -> float:
    """(1/2k) ||F theta + P_F L q||^2."""
    q = check_distribution(q, L.m)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != S.d:
        raise ValueError(f"theta has length {theta.size}, expected {S.d}")
    r = S.F @ theta + S.projector.apply(L.L @ q)
    return float(r @ r / (2 * S.k))


def predict(f) -> int:
    """Index of the largest score; near-ties go to the smallest index."""
    f = np.asarray(f, dtype=float)
    top = f.max()
    return int(np.flatnonzero(f >= top - TIE_RTOL * max(1.0, abs(top)))[0])


def excess_task(L: LossMatrix, f, q) -> float:
    """(Lq)_pred(f) - min_c (Lq)_c."""
    q = check_distribution(q, L.m)
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size != L.k:
        raise ValueError(f"score vector has length {f.size}, expected {L.k}")
    risk = L.L @ q
    return float(risk[predict(f)] - risk.min())
