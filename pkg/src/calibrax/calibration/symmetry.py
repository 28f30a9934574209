"""Output symmetries shared by a loss matrix and a score subspace.

A symmetry is a permutation ``g`` of outputs together with a permutation of
labels such that ``L[g_out][:, g_lab] == L`` and ``span(F)`` is mapped onto
itself. Every pairwise quantity is then invariant, ``delta_{g(i), g(j)} =
delta_{ij}``, so when the group acts transitively on outputs the pairs
``(a, 0)`` already represent every ordered pair.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..losses import LossMatrix
from ..subspaces import ScoreSubspace


@dataclass(frozen=True)
class OutputSymmetry:
    out_maps: np.ndarray  # (g, k) generators acting on outputs
    label_maps: np.ndarray  # (g, m) matching actions on labels

    @property
    def k(self) -> int:
        return self.out_maps.shape[1]

    def is_transitive(self) -> bool:
        seen = np.zeros(self.k, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = np.unique(self.out_maps[:, frontier].ravel())
            nxt = nxt[~seen[nxt]]
            seen[nxt] = True
            frontier = nxt.tolist()
        return bool(seen.all())

    def element_maps(self) -> tuple[np.ndarray, np.ndarray]:
        """For every output ``a`` a group element ``g_a`` with ``g_a(0) = a`` (BFS words).

        Returns arrays ``(out (k, k), lab (k, m))``; row ``a`` is ``g_a``.
        """
        k, m = self.k, self.label_maps.shape[1]
        out = np.full((k, k), -1, dtype=np.int64)
        lab = np.full((k, m), -1, dtype=np.int64)
        out[0], lab[0] = np.arange(k), np.arange(m)
        queue = deque([0])
        while queue:
            a = queue.popleft()
            for go, gl in zip(self.out_maps, self.label_maps):
                b = go[a]
                if out[b, 0] < 0:
                    # apply the generator after g_a
                    out[b], lab[b] = go[out[a]], gl[lab[a]]
                    queue.append(b)
        if np.any(out[:, 0] < 0):
            raise ValueError("symmetry group is not transitive on outputs")
        return out, lab


def find_symmetry(S: ScoreSubspace, L: LossMatrix, tol: float = 1e-9) -> OutputSymmetry | None:
    """Verified transitive symmetry of the pair (S, L), or None."""
    if L.symmetry is None or S.symmetry is None:
        return None
    out_maps, label_maps = (np.asarray(a) for a in L.symmetry)
    if out_maps.shape != np.asarray(S.symmetry).shape or not np.array_equal(out_maps, S.symmetry):
        return None
    for go, gl in zip(out_maps, label_maps):
        if not np.array_equal(L.L[go][:, gl], L.L):
            return None
    if not S.span_invariant(tol):
        return None
    sym = OutputSymmetry(out_maps, label_maps)
    return sym if sym.is_transitive() else None
