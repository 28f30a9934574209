"""Lower bounds on the calibration function of the quadratic surrogate.

For an ordered pair of outputs ``(i, j)`` the bound uses the piecewise-linear
convex function ``xi_ij(v) = max_y |a_y v - b_y|`` with ``a = L[i] - L[j]`` and
``b = (P L)[i] - (P L)[j]``. The inner maximization over ``v >= 0`` is done
exactly on the vertices of the upper envelope of the ``2m`` lines ``+-(a_y v -
b_y)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..losses import LossMatrix, TreeSpec
from ..subspaces import ScoreSubspace, pair_projection_sqnorms

V_MODES = ("optimal", "fixed_one")
# squared projection norms below this are treated as exact zeros
W_ZERO = 1e-12
# |intercept| below this (relative to the line scale) counts as xi(0) = 0
XI_ZERO = 1e-13


def upper_envelope(slopes: np.ndarray, intercepts: np.ndarray) -> tuple[np.ndarray, int]:
    """Breakpoints in ``(0, inf)`` of ``max_l (slopes_l v + intercepts_l)`` and the index of its last line.

    Classic convex-hull trick: lines sorted by slope, a line is dropped when
    its neighbours cross before it ever becomes the maximum.
    """
    order = np.lexsort((intercepts, slopes))
    s, t = slopes[order], intercepts[order]
    # equal slopes: keep the largest intercept (last after the sort)
    last = np.append(s[1:] != s[:-1], True)
    s, t, order = s[last], t[last], order[last]
    hull: list[int] = []
    for l in range(s.size):
        while len(hull) >= 2:
            l1, l2 = hull[-2], hull[-1]
            # l2 is useless if l meets l1 no later than l2 does
            if (t[l1] - t[l]) * (s[l2] - s[l1]) <= (t[l1] - t[l2]) * (s[l] - s[l1]):
                hull.pop()
            else:
                break
        hull.append(l)
    h = np.array(hull)
    cross = (t[h[:-1]] - t[h[1:]]) / (s[h[1:]] - s[h[:-1]])
    return cross[cross > 0], int(order[h[-1]])


@dataclass(frozen=True)
class PairBoundTerm:
    """Data of one pair term: ``w = 2k ||P_F Delta_ij||^2`` and the lines of ``xi_ij``."""

    i: int
    j: int
    w: float
    slopes: np.ndarray = field(repr=False)
    intercepts: np.ndarray = field(repr=False)

    def xi(self, v) -> np.ndarray | float:
        v = np.asarray(v, dtype=float)
        out = np.abs(np.multiply.outer(v, self.slopes) - self.intercepts).max(axis=-1)
        return float(out) if out.ndim == 0 else out

    @property
    def final_slope(self) -> float:
        return float(np.abs(self.slopes).max())

    def vertices(self) -> np.ndarray:
        """0 followed by the breakpoints of ``xi`` on ``(0, inf)``."""
        s = np.concatenate([self.slopes, -self.slopes])
        t = np.concatenate([-self.intercepts, self.intercepts])
        cross, _ = upper_envelope(s, t)
        return np.concatenate([[0.0], np.unique(cross)])

    def best_gain(self, eps, v_mode: str = "optimal") -> np.ndarray:
        """``sup_v (eps v - xi(v))`` for each eps (``+inf`` past the final slope)."""
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        if v_mode == "fixed_one":
            return eps - self.xi(1.0)
        if v_mode != "optimal":
            raise ValueError(f"unknown v_mode {v_mode!r}")
        v = self.vertices()
        gain = (np.multiply.outer(eps, v) - self.xi(v)).max(axis=1)
        return np.where(eps > self.final_slope, np.inf, gain)

    def term(self, eps, v_mode: str = "optimal") -> np.ndarray:
        """``(sup_v (eps v - xi(v)))_+^2 / w`` with the 0/0 = 0 and c/0 = inf conventions."""
        gain = np.maximum(self.best_gain(eps, v_mode), 0.0)
        if self.w == 0.0:
            return np.where(gain > 0, np.inf, 0.0)
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(gain), np.inf, gain * gain / self.w)

    def zero_exit(self) -> float:
        """``inf_{v>0} xi(v) / v``: the term is zero for eps below it and positive above."""
        v = self.vertices()
        xi = self.xi(v)
        cand = [self.final_slope]
        if v.size > 1:
            cand.append(float(np.min(xi[1:] / v[1:])))
        scale = max(1.0, float(np.abs(self.intercepts).max()))
        if xi[0] <= XI_ZERO * scale:
            # xi(0) = 0: xi(v)/v is non-decreasing, its infimum is the slope at 0+
            near = np.abs(self.intercepts) <= XI_ZERO * scale
            cand.append(float(np.abs(self.slopes[near]).max(initial=0.0)))
        return float(min(cand))


def projected_loss(S: ScoreSubspace, L: LossMatrix) -> np.ndarray:
    """P_F L (k x m)."""
    _check_shapes(S, L)
    return S.U @ (S.U.T @ L.L)


def _check_shapes(S: ScoreSubspace, L: LossMatrix) -> None:
    if S.k != L.k:
        raise ValueError(f"score subspace has {S.k} outputs but the loss has {L.k}")


def pair_term(S: ScoreSubspace, L: LossMatrix, i: int, j: int, PL: np.ndarray | None = None,
              sq: np.ndarray | None = None) -> PairBoundTerm:
    if i == j or not (0 <= i < L.k and 0 <= j < L.k):
        raise ValueError(f"invalid output pair ({i}, {j})")
    PL = projected_loss(S, L) if PL is None else PL
    w = float(pair_projection_sqnorms(S)[i, j] if sq is None else sq[i, j])
    w = 0.0 if w < W_ZERO else w
    return PairBoundTerm(i, j, 2 * S.k * w, L.L[i] - L.L[j], PL[i] - PL[j])


def iter_pair_terms(S: ScoreSubspace, L: LossMatrix, pairs=None):
    PL = projected_loss(S, L)
    sq = pair_projection_sqnorms(S)
    if pairs is None:
        pairs = ((i, j) for i in range(L.k) for j in range(L.k) if i != j)
    for i, j in pairs:
        yield pair_term(S, L, i, j, PL, sq)


def xi_ij(S: ScoreSubspace, L: LossMatrix, i: int, j: int, v: float) -> float:
    """||L^T (v I - P_F) Delta_ij||_inf."""
    if v < 0:
        raise ValueError("v must be non-negative")
    return pair_term(S, L, i, j).xi(v)


def theorem1_bound(S: ScoreSubspace, L: LossMatrix, eps, v_mode: str = "optimal", pairs=None) -> np.ndarray:
    """Lower bound on the calibration function at each eps (min over ordered pairs)."""
    if v_mode not in V_MODES:
        raise ValueError(f"v_mode must be one of {V_MODES}, got {v_mode!r}")
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(eps < 0):
        raise ValueError("eps must be non-negative")
    out = np.full(eps.shape, np.inf)
    for term in iter_pair_terms(S, L, pairs):
        np.minimum(out, term.term(eps, v_mode), out=out)
    return out


def bound_zero_exit(S: ScoreSubspace, L: LossMatrix, pairs=None) -> tuple[float, tuple[int, int]]:
    """Largest pairwise zero-exit point and the pair attaining it."""
    best, arg = -np.inf, (-1, -1)
    for term in iter_pair_terms(S, L, pairs):
        z = term.zero_exit()
        if z > best:
            best, arg = z, (term.i, term.j)
    return best, arg


# ------------------------------------------------------------- tree bound


@dataclass(frozen=True)
class TreeBoundParams:
    """Block count ``b``, max and mean within-block distances, and the cross-block distances."""

    t: int
    b: int
    D: float
    A_bar: float
    alpha_above: float
    # distinct distances between leaves of different depth-t blocks, ascending
    cross: tuple[float, ...]

    def coefficient(self, d: float | None = None) -> float:
        """((d - A_bar) / (d - D/2))^2 for a cross-block distance ``d`` (nearest block by default)."""
        d = self.D + self.alpha_above if d is None else d
        den = d - self.D / 2
        if den == 0.0:
            return 1.0  # t = D with a vanishing last weight: both parts are zero
        return ((d - self.A_bar) / den) ** 2


def tree_bound_params(spec: TreeSpec, t: int) -> TreeBoundParams:
    if not 1 <= t <= spec.depth:
        raise ValueError(f"t must lie in [1, {spec.depth}], got {t}")
    a, n = spec.weights, spec.children
    D = math.fsum(a[t:])
    terms, prod = [], 1
    for s in range(t, spec.depth):
        prod *= n[s]
        terms.append(a[s] * (prod - 1) / prod)
    A_bar = math.fsum(terms)
    if A_bar < D / 2 - 1e-15:
        warnings.warn(f"mean within-block distance {A_bar} is below half the maximum {D}", RuntimeWarning,
                      stacklevel=2)
    cross = tuple(sorted({math.fsum(a[s:]) for s in range(t)}))
    return TreeBoundParams(t=t, b=spec.n_blocks(t), D=D, A_bar=A_bar, alpha_above=a[t - 1], cross=cross)


def tree_bound_closed(spec: TreeSpec, t: int, eps, nearest_block_only: bool = False) -> np.ndarray:
    """Closed-form bound for the tree loss with scores tied inside depth-``t`` blocks.

    A pair of leaves in different blocks at distance ``d`` contributes
    ``((d - A_bar) / (d - D/2))^2 (eps - D/2)_+^2 / (4b)`` while ``eps <= d``
    and nothing (``+inf``) beyond; pairs inside a block contribute zero up to
    ``D`` and ``+inf`` after. The minimum over pairs is returned. With
    ``nearest_block_only`` the coefficient of the nearest block is used for
    every eps, which is the classical single-formula version; it agrees with
    the default up to the nearest cross-block distance and is smaller after.
    """
    p = tree_bound_params(spec, t)
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    base = np.maximum(eps - p.D / 2, 0.0) ** 2 / (4 * p.b)
    if nearest_block_only:
        body = p.coefficient() * base
    else:
        body = np.full(eps.shape, np.inf)
        for d in p.cross:
            np.minimum(body, np.where(eps <= d, p.coefficient(d) * base, np.inf), out=body)
    return np.where(eps > p.D, body, 0.0)
