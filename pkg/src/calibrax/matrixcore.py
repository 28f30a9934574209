"""Small dense linear-algebra helpers shared by the rest of the package.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. The only
structured object here is :class:`Projector`, the orthogonal projection onto
the column span of a score basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# relative singular-value cutoff for pseudo-inverses and numerical rank
RANK_RTOL = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a finite 2-D float array."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _sym_eig(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g = 0.5 * (g + g.T)
    vals, vecs = np.linalg.eigh(g)
    return vals, vecs


def gram_pseudoinverse(a) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of ``a.T @ a``.

    Computed from the symmetric eigendecomposition of the Gram matrix;
    eigen-directions below ``RANK_RTOL`` times the largest eigenvalue are
    dropped. Rank deficiency is expected (redundant score bases) and is not
    an error.
    """
    a = as_matrix(a)
    vals, vecs = _sym_eig(a.T @ a)
    top = max(vals.max(initial=0.0), 0.0)
    keep = vals > RANK_RTOL * top if top > 0 else np.zeros_like(vals, dtype=bool)
    inv = np.where(keep, 1.0 / np.where(keep, vals, 1.0), 0.0)
    out = (vecs * inv) @ vecs.T
    return 0.5 * (out + out.T)


def orthonormal_basis(a) -> np.ndarray:
    """Orthonormal basis (k x rank) of the column span of ``a``."""
    a = as_matrix(a)
    u, sv, _ = np.linalg.svd(a, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        return np.zeros((a.shape[0], 0))
    rank = int(np.sum(sv > RANK_RTOL * sv[0]))
    return u[:, :rank].copy()


def numerical_rank(a, rtol: float = 1e-9) -> int:
    a = as_matrix(a)
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


@dataclass(frozen=True)
class Projector:
    """Orthogonal projection onto ``span(basis)``: ``F (F^T F)^+ F^T``.

    Projections go through an orthonormal basis of the span, which avoids
    squaring the condition number of ``F``; ``gram_pinv`` maps inner products
    with the columns back to coefficients.
    """

    basis: np.ndarray
    gram_pinv: np.ndarray = field(repr=False)
    onb: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_basis(cls, basis) -> "Projector":
        f = as_matrix(basis, "basis")
        return cls(basis=f, gram_pinv=gram_pseudoinverse(f), onb=orthonormal_basis(f))

    @property
    def size(self) -> int:
        return self.basis.shape[0]

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.size:
            raise ValueError(f"vector has length {x.shape[0]}, projector acts on R^{self.size}")
        return self.onb @ (self.onb.T @ x)

    def matrix(self) -> np.ndarray:
        """Dense k x k projection matrix (only for small k)."""
        return self.onb @ self.onb.T


def project(p: Projector, x) -> np.ndarray:
    """Return the orthogonal projection of ``x`` onto the span of ``p.basis``."""
    return p.apply(x)
