"""Score subspaces F and the quantities derived from them.

A :class:`ScoreSubspace` keeps the user-facing basis ``F`` together with its
projector and an orthonormal basis ``U`` of the same span. ``U`` is what the
QP code works with: writing scores as ``f = U phi`` turns the excess surrogate
into a plain squared norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .losses import MAX_MAP_ITEMS, TreeSpec, map_symmetry, permutations, read_matrix_csv
from .matrixcore import Projector, as_matrix, orthonormal_basis
from .special import float_factorial, harmonic

# smallest/largest singular value ratio below which F counts as rank deficient
FULL_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class ScoreSubspace:
    """Score basis ``F`` (k x d) with cached projector and orthonormal basis."""

    F: np.ndarray
    projector: Projector = field(repr=False)
    U: np.ndarray = field(repr=False)
    kind: str = "explicit"
    params: dict = field(default_factory=dict, compare=False)
    # output-index maps (generators) under which span(F) is expected invariant
    symmetry: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_basis(cls, F, kind: str = "explicit", params: dict | None = None, symmetry=None) -> "ScoreSubspace":
        F = as_matrix(F, "score basis").copy()
        zero = np.flatnonzero(~np.any(F != 0, axis=0))
        if zero.size:
            raise ValueError(f"score basis column {int(zero[0]) + 1} is identically zero")
        F.setflags(write=False)
        U = orthonormal_basis(F)
        U.setflags(write=False)
        return cls(F=F, projector=Projector.from_basis(F), U=U, kind=kind,
                   params=dict(params or {}), symmetry=symmetry)

    @property
    def k(self) -> int:
        return self.F.shape[0]

    @property
    def d(self) -> int:
        return self.F.shape[1]

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def projection_matrix(self) -> np.ndarray:
        return self.U @ self.U.T

    def span_invariant(self, tol: float = 1e-9) -> bool:
        """True when every stored output map leaves span(F) unchanged."""
        if self.symmetry is None:
            return False
        P = self.projection_matrix()
        return all(np.allclose(P[g][:, g], P, atol=tol) for g in self.symmetry)


def identity(k: int) -> ScoreSubspace:
    if k < 1:
        raise ValueError("k must be positive")
    return ScoreSubspace.from_basis(np.eye(k), kind="identity")


def explicit(F) -> ScoreSubspace:
    return ScoreSubspace.from_basis(F, kind="explicit")


def load_score_basis(path) -> ScoreSubspace:
    F = read_matrix_csv(path, "score basis")
    return ScoreSubspace.from_basis(F, kind="explicit", params={"path": Path(path).name})


def tree_block_basis(spec: TreeSpec, t: int) -> ScoreSubspace:
    """Indicator basis of the depth-``t`` blocks of leaves."""
    if not 1 <= t <= spec.depth:
        raise ValueError(f"t must lie in [1, {spec.depth}], got {t}")
    size = spec.block_size(t)
    blocks = np.arange(spec.n_leaves) // size
    F = (blocks[:, None] == np.arange(spec.n_blocks(t))[None, :]).astype(float)
    return ScoreSubspace.from_basis(F, kind="tree_block", params={"t": t, "block_size": size})


def _check_r(r: int) -> None:
    if not 2 <= r <= MAX_MAP_ITEMS:
        raise ValueError(f"r must lie in [2, {MAX_MAP_ITEMS}], got {r}")


def map_pairs(r: int) -> list[tuple[int, int]]:
    """Column order of F_mAP: item pairs p <= q, lexicographic, 0-based."""
    return [(p, q) for p in range(r) for q in range(p, r)]


def f_map(r: int) -> ScoreSubspace:
    _check_r(r)
    pos = permutations(r)
    cols = [1.0 / np.maximum(pos[:, p], pos[:, q]) for p, q in map_pairs(r)]
    return ScoreSubspace.from_basis(np.stack(cols, axis=1), kind="map_full", params={"r": r},
                                    symmetry=map_symmetry(r)[0])


def f_sort(r: int) -> ScoreSubspace:
    _check_r(r)
    return ScoreSubspace.from_basis(1.0 / permutations(r), kind="map_sort", params={"r": r},
                                    symmetry=map_symmetry(r)[0])


def pair_projection_sqnorm(S: ScoreSubspace, i: int, j: int) -> float:
    """||P_F (e_i - e_j)||^2 for outputs ``i != j`` (0-based)."""
    if not (0 <= i < S.k and 0 <= j < S.k) or i == j:
        raise ValueError(f"invalid output pair ({i}, {j}) for k = {S.k}")
    diff = S.U[i] - S.U[j]
    return float(min(max(diff @ diff, 0.0), 2.0))


def pair_projection_sqnorms(S: ScoreSubspace) -> np.ndarray:
    """All k x k values of ||P_F (e_i - e_j)||^2 (zero on the diagonal)."""
    G = S.U @ S.U.T
    g = np.diag(G)
    return np.clip(g[:, None] + g[None, :] - 2.0 * G, 0.0, 2.0)


def _sort_gram_parts(r: int) -> tuple[float, float]:
    h1, h2 = harmonic(r, 1), harmonic(r, 2)
    return float_factorial(r - 1) * h2, float_factorial(r - 2) * (h1 * h1 - h2)


def gram_f_sort_closed(r: int) -> np.ndarray:
    """F_sort^T F_sort without enumerating permutations."""
    if r < 2:
        raise ValueError("r must be at least 2")
    diag, off = _sort_gram_parts(r)
    G = np.full((r, r), off)
    np.fill_diagonal(G, diag)
    return G


def f_sort_eigen_gap(r: int) -> float:
    """(r-2)! (r H_{r,2} - H_{r,1}^2), the repeated eigenvalue of F_sort^T F_sort."""
    h1, h2 = harmonic(r, 1), harmonic(r, 2)
    return float_factorial(r - 2) * (r * h2 - h1 * h1)


def kappa_f_sort(r: int) -> float:
    """Condition number of F_sort; the factorials cancel so any r >= 2 works."""
    if r < 2:
        raise ValueError("r must be at least 2")
    h1, h2 = harmonic(r, 1), harmonic(r, 2)
    return math.sqrt(r - 1) * h1 / math.sqrt(r * h2 - h1 * h1)


def condition_number(S: ScoreSubspace) -> float:
    """sigma_max / sigma_min of ``F``; ``F`` must have full column rank."""
    if S.kind == "map_sort":
        return kappa_f_sort(S.params["r"])
    sv = np.linalg.svd(S.F, compute_uv=False)
    rank = int(np.sum(sv > FULL_RANK_RTOL * sv[0]))
    if rank < S.d:
        raise ValueError(f"score basis is rank deficient (numerical rank {rank} < {S.d} columns)")
    return float(sv[0] / sv[-1])
