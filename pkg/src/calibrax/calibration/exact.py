"""Exact calibration functions through pairwise convex QPs.

For predicted output ``j`` and optimal output ``i`` the pair value is

    delta_ij(eps) = min (1/2k) ||F theta + P L q||^2
        s.t. (Lq)_i <= (Lq)_j - eps,  (Lq)_i <= (Lq)_c,  (F theta)_j >= (F theta)_c,
             q in the simplex,

``+inf`` when infeasible. Writing the scores in an orthonormal basis ``U`` and
substituting ``z = phi + U'L q`` gives the equivalent problem

    min (1/2k) ||z||^2  s.t.  the same loss rows on q,
                              (U_j - U_c)(z - U'L q) >= 0,

which is what the batched interior-point solver sees. Before any QP is
solved, redundant rows are removed with small LPs, and two LPs per pair give
the exact range of eps where the value is zero or the problem infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ..losses import LossMatrix
from ..parallel import ordered_map, resolve_workers
from ..qpsolve import QPProblem, SolverError, ipm_batch, solve_qp
from ..subspaces import ScoreSubspace
from .curves import CalibrationCurve
from .symmetry import OutputSymmetry, find_symmetry

# LP results within this distance of a threshold are treated as on it
LP_TOL = 1e-9
# a row is redundant when its minimum over the other rows is above -REDUNDANT_TOL
REDUNDANT_TOL = 1e-9
# largest scaled KKT merit accepted from the batched solver without a retry
ACCEPT_MERIT = 1e-9
CHUNK = 256
# pruned sweeps first solve every COARSE_STRIDE-th point of a pair's band
COARSE_STRIDE = 8
# a pair is skipped at eps only if its lower bound beats the best upper bound by this margin
PRUNE_ATOL = 1e-9
PRUNE_RTOL = 1e-6


class PairPolicy:
    """``all`` ordered pairs or a seeded uniform sample of ``n`` of them."""

    def __init__(self, kind: str = "all", n: int | None = None, seed: int = 0):
        if kind not in ("all", "sampled"):
            raise ValueError(f"pair policy must be 'all' or 'sampled', got {kind!r}")
        if kind == "sampled" and (n is None or n < 1):
            raise ValueError("sampled pair policy needs a positive sample size")
        self.kind, self.n, self.seed = kind, n, seed

    @classmethod
    def parse(cls, text: str) -> "PairPolicy":
        """``all`` or ``sampled:N:SEED``."""
        parts = text.split(":")
        if parts == ["all"]:
            return cls()
        if parts[0] == "sampled" and len(parts) == 3:
            try:
                return cls("sampled", int(parts[1]), int(parts[2]))
            except ValueError:
                pass
        raise ValueError(f"bad pair policy {text!r}; use 'all' or 'sampled:N:SEED'")

    def select(self, k: int) -> np.ndarray:
        """Ordered pairs (i, j), i != j, as an (n, 2) array in a fixed order."""
        total = k * (k - 1)
        if self.kind == "all" or self.n >= total:
            idx = np.arange(total)
        else:
            idx = np.sort(np.random.default_rng(self.seed).choice(total, size=self.n, replace=False))
        i, r = np.divmod(idx, k - 1)
        return np.stack([i, r + (r >= i)], axis=1)

    def __repr__(self) -> str:
        return "all" if self.kind == "all" else f"sampled:{self.n}:{self.seed}"


# ----------------------------------------------------------- LP helpers


def lp_solve(c, A_ge=None, b_ge=None, A_eq=None, b_eq=None, bounds=(None, None)):
    """min c'x s.t. A_ge x >= b_ge, A_eq x = b_eq; returns (status, value, x)."""
    has_ge = A_ge is not None and len(A_ge) > 0
    res = linprog(c, A_ub=-A_ge if has_ge else None, b_ub=-b_ge if has_ge else None,
                  A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 0:
        return "optimal", float(res.fun), res.x
    status = {2: "infeasible", 3: "unbounded"}.get(res.status, "failed")
    return status, math.nan, None


def _lp_min(c, A_ge=None, b_ge=None, A_eq=None, b_eq=None, bounds=(None, None)):
    status, value, _ = lp_solve(c, A_ge, b_ge, A_eq, b_eq, bounds)
    return status, value


def _unit_rows(A: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(A, axis=1, keepdims=True)
    return A / np.where(n > 0, n, 1.0)


def _irredundant(rows: np.ndarray, idx: np.ndarray, extra_eq=None, box: bool = False) -> np.ndarray:
    """Indices of ``idx`` whose rows ``r x >= 0`` are not implied by the others.

    Rows are examined in order and dropped one at a time, so duplicated
    constraints keep one representative. ``extra_eq`` adds ``q >= 0, 1'q = 1``
    (simplex); ``box`` bounds the variables by [-1, 1] (cones).
    """
    keep = list(range(len(idx)))
    n = rows.shape[1]
    bounds = (-1.0, 1.0) if box else (0.0, None)
    for pos in range(len(idx)):
        others = [p for p in keep if p != pos]
        A = rows[others] if others else np.zeros((0, n))
        status, val = _lp_min(rows[pos], A, np.zeros(len(others)),
                              *(extra_eq if extra_eq is not None else (None, None)), bounds=bounds)
        if status == "optimal" and val >= -REDUNDANT_TOL:
            keep.remove(pos)
    return np.asarray(idx)[keep]


def loss_facets(L: np.ndarray, i: int) -> np.ndarray | None:
    """Outputs ``c`` whose rows ``(L_c - L_i) q >= 0`` bound {q in simplex : i optimal}.

    None if output ``i`` is never optimal.
    """
    k, m = L.shape
    cand = np.array([c for c in range(k) if c != i and np.any(L[c] != L[i])], dtype=np.int64)
    simplex = (np.ones((1, m)), np.ones(1))
    rows = _unit_rows(L[cand] - L[i]) if cand.size else np.zeros((0, m))
    status, _ = _lp_min(np.zeros(m), rows, np.zeros(len(cand)), *simplex, bounds=(0.0, None))
    if status != "optimal":
        return None
    return _irredundant(rows, cand, extra_eq=simplex)


def score_facets(U: np.ndarray, j: int, tol: float = 1e-12) -> np.ndarray:
    """Outputs ``c`` whose rows ``(U_j - U_c) phi >= 0`` bound the cone where j is predicted."""
    diff = U[j] - U
    cand = np.array([c for c in range(U.shape[0]) if c != j and np.linalg.norm(diff[c]) > tol], dtype=np.int64)
    if cand.size == 0:
        return cand
    return _irredundant(_unit_rows(diff[cand]), cand, box=True)


# ---------------------------------------------------------- sweep setup


@dataclass
class SweepContext:
    """Everything a worker needs to build and solve pair QPs."""

    L: np.ndarray
    U: np.ndarray
    M: np.ndarray  # U' L
    pairs: np.ndarray  # (n, 2)
    loss_idx: np.ndarray  # (n, Fl), -1 padded
    score_idx: np.ndarray  # (n, Fs), -1 padded
    eps: np.ndarray
    k: int
    zero_upto: np.ndarray = field(default=None)  # per pair: value is 0 for eps <= this
    feasible_upto: np.ndarray = field(default=None)  # per pair: +inf for eps > this


def _pad(lists: list[np.ndarray]) -> np.ndarray:
    width = max([len(a) for a in lists] + [1])
    out = np.full((len(lists), width), -1, dtype=np.int64)
    for r, a in enumerate(lists):
        out[r, :len(a)] = a
    return out


def _facet_tables(S: ScoreSubspace, L: LossMatrix, pairs: np.ndarray, sym: OutputSymmetry | None):
    """Per-output loss facets and score facets, transported along the symmetry when possible."""
    Lm, U = L.L, S.U
    need_i, need_j = np.unique(pairs[:, 0]), np.unique(pairs[:, 1])
    loss_f: dict[int, np.ndarray | None] = {}
    score_f: dict[int, np.ndarray] = {}
    if sym is not None:
        g_out, _ = sym.element_maps()
        base_l, base_s = loss_facets(Lm, 0), score_facets(U, 0)
        for i in need_i:
            loss_f[int(i)] = None if base_l is None else g_out[i][base_l]
        for j in need_j:
            score_f[int(j)] = g_out[j][base_s]
    else:
        for i in need_i:
            loss_f[int(i)] = loss_facets(Lm, int(i))
        for j in need_j:
            score_f[int(j)] = score_facets(U, int(j))
    return loss_f, score_f


def _pair_thresholds(ctx: SweepContext, rows: np.ndarray) -> list[tuple[float, float]]:
    """(zero_upto, feasible_upto) for the given pair rows: two LPs each."""
    out = []
    m = ctx.L.shape[1]
    simplex = (np.ones((1, m)), np.ones(1))
    for r in rows:
        i, j = ctx.pairs[r]
        li = ctx.loss_idx[r][ctx.loss_idx[r] >= 0]
        sj = ctx.score_idx[r][ctx.score_idx[r] >= 0]
        if li.size == 0 and ctx.loss_idx[r, 0] == -2:
            out.append((-math.inf, -math.inf))
            continue
        A_loss = _unit_rows(ctx.L[li] - ctx.L[i]) if li.size else np.zeros((0, m))
        gain = ctx.L[j] - ctx.L[i]
        st, val = _lp_min(-gain, A_loss, np.zeros(li.size), *simplex, bounds=(0.0, None))
        feas = -val if st == "optimal" else -math.inf
        g = _unit_rows(ctx.U[j] - ctx.U[sj]) if sj.size else np.zeros((0, ctx.U.shape[1]))
        A_zero = np.vstack([A_loss, -g @ ctx.M])
        st, val = _lp_min(-gain, A_zero, np.zeros(A_zero.shape[0]), *simplex, bounds=(0.0, None))
        zero = -val if st == "optimal" else -math.inf
        out.append((zero, feas))
    return out


def _build_batch(ctx: SweepContext, rows: np.ndarray, eps: np.ndarray):
    """Stacked QP data (H, c, A, b, E, e) for pair rows ``rows`` at ``eps``."""
    B = rows.size
    rho, m = ctx.U.shape[1], ctx.L.shape[1]
    n = rho + m
    Fl, Fs = ctx.loss_idx.shape[1], ctx.score_idx.shape[1]
    P = 1 + Fl + Fs + m
    i, j = ctx.pairs[rows, 0], ctx.pairs[rows, 1]
    A = np.zeros((B, P, n))
    b = np.zeros((B, P))
    A[:, 0, rho:] = ctx.L[j] - ctx.L[i]
    b[:, 0] = eps
    li = ctx.loss_idx[rows]
    ok = li >= 0
    lrows = ctx.L[np.where(ok, li, 0)] - ctx.L[i][:, None, :]
    lrows /= np.where(ok, np.linalg.norm(lrows, axis=2), 1.0)[:, :, None]
    A[:, 1:1 + Fl, rho:] = np.where(ok[:, :, None], lrows, 0.0)
    b[:, 1:1 + Fl] = np.where(ok, 0.0, -1.0)
    sj = ctx.score_idx[rows]
    ok = sj >= 0
    g = ctx.U[j][:, None, :] - ctx.U[np.where(ok, sj, 0)]
    g /= np.where(ok, np.linalg.norm(g, axis=2), 1.0)[:, :, None]
    g = np.where(ok[:, :, None], g, 0.0)
    A[:, 1 + Fl:1 + Fl + Fs, :rho] = g
    A[:, 1 + Fl:1 + Fl + Fs, rho:] = -np.matmul(g, ctx.M)
    b[:, 1 + Fl:1 + Fl + Fs] = np.where(ok, 0.0, -1.0)
    A[:, 1 + Fl + Fs:, rho:] = np.eye(m)
    H = np.zeros((B, n, n))
    H[:, np.arange(rho), np.arange(rho)] = 1.0 / ctx.k
    E = np.zeros((B, 1, n))
    E[:, 0, rho:] = 1.0
    return H, np.zeros((B, n)), A, b, E, np.ones((B, 1))


def _solve_chunk(ctx: SweepContext, tasks: np.ndarray) -> np.ndarray:
    """Solve the QPs for ``tasks`` = (pair row, eps index) rows.

    Returns an (n, 2) array of optimal values and eps-row multipliers; the
    multiplier is the slope of the pair value function at that eps.
    """
    rows, ei = tasks[:, 0], tasks[:, 1]
    eps = np.minimum(ctx.eps[ei], ctx.feasible_upto[rows])
    H, c, A, b, E, e = _build_batch(ctx, rows, eps)
    out = ipm_batch(H, c, A, b, E, e)
    rho, m = ctx.U.shape[1], ctx.L.shape[1]
    z = out["x"][:, :rho]
    values = 0.5 * np.sum(z * z, axis=1) / ctx.k
    slopes = np.maximum(out["z"][:, 0], 0.0)
    for t in np.flatnonzero(out["merit"] > ACCEPT_MERIT):
        p = QPProblem(H[t], c[t], A[t, :-m], b[t, :-m], E[t], e[t], np.r_[np.zeros(rho, bool), np.ones(m, bool)])
        sol = solve_qp(p)
        if sol.status != "optimal":
            i, j = ctx.pairs[rows[t]]
            raise SolverError(f"pair ({i}, {j}) at eps={float(ctx.eps[ei[t]])!r}: solver status {sol.status}",
                              sol.status)
        values[t] = max(sol.objective, 0.0)
        slopes[t] = max(float(sol.z_ineq[0]), 0.0)
    return np.stack([values, slopes], axis=1)


def _solve_tasks(ctx: SweepContext, tasks: np.ndarray, workers: int, chunk: int) -> np.ndarray:
    chunks = [tasks[s:s + chunk] for s in range(0, len(tasks), chunk)]
    parts = ordered_map(_solve_chunk, ctx, chunks, workers)
    return np.concatenate(parts) if parts else np.zeros((0, 2))


def _threshold_chunk(ctx: SweepContext, rows: np.ndarray):
    return _pair_thresholds(ctx, rows)


@dataclass(frozen=True)
class SweepResult:
    """Pair values on the eps grid (rows follow ``pairs``) and the reduced curve.

    ``values`` holds ``nan`` where a pair was proven not to attain the minimum
    and its QP was skipped.
    """

    eps: np.ndarray
    pairs: np.ndarray
    values: np.ndarray  # (n_pairs, n_eps)
    zero_upto: np.ndarray
    feasible_upto: np.ndarray
    symmetry_used: bool
    n_qp: int

    def curve(self) -> np.ndarray:
        if not self.values.size:
            return np.full(self.eps.shape, np.inf)
        vals = np.where(np.isnan(self.values), np.inf, self.values)
        out = np.maximum.accumulate(vals.min(axis=0))  # a min of non-decreasing functions; remove solver jitter
        out[self.eps == 0] = 0.0
        return out


def _prune_bounds(eps: np.ndarray, zero_upto: np.ndarray, solved: np.ndarray, values: np.ndarray,
                  slopes: np.ndarray, band: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Upper bound on the pairwise minimum and per-pair lower bounds at every grid point.

    Each pair value is convex and non-decreasing in eps, so between solved
    points it lies below their chord and above their tangent lines. Returns
    ``(upper (n_eps,), lower (n_pairs, n_eps))``; lower is only meaningful
    where ``band`` is true.
    """
    n_pairs, n_eps = band.shape
    upper = np.full(n_eps, np.inf)
    lower = np.zeros((n_pairs, n_eps))
    for r in range(n_pairs):
        cols = np.flatnonzero(solved[r])
        x, v, g = eps[cols], values[r, cols], slopes[r, cols]
        if zero_upto[r] >= 0:
            x, v, g = np.r_[zero_upto[r], x], np.r_[0.0, v], np.r_[0.0, g]
        if x.size == 0:
            continue
        pts = np.flatnonzero(band[r])
        inside = pts[(eps[pts] >= x[0]) & (eps[pts] <= x[-1])]
        np.minimum.at(upper, inside, np.interp(eps[inside], x, v))
        # max of the tangents at the nearest solved point on each side
        right = np.clip(np.searchsorted(x, eps[pts]), 0, x.size - 1)
        left = np.clip(right - 1, 0, x.size - 1)
        t_left = v[left] + g[left] * (eps[pts] - x[left])
        t_right = v[right] - g[right] * (x[right] - eps[pts])
        lower[r, pts] = np.maximum(np.maximum(t_left, t_right), 0.0)
    return upper, lower


def _representatives(pairs: np.ndarray, sym: OutputSymmetry) -> np.ndarray:
    """Map each ordered pair (i, j) to (g^{-1}(i), 0) with g(0) = j; unique, sorted."""
    g_out, _ = sym.element_maps()
    inv = np.argsort(g_out, axis=1)
    reps = np.stack([inv[pairs[:, 1], pairs[:, 0]], np.zeros(len(pairs), dtype=np.int64)], axis=1)
    return np.unique(reps, axis=0)


def sweep(S: ScoreSubspace, L: LossMatrix, eps_grid, pair_policy: PairPolicy | None = None,
          workers: int | None = None, use_symmetry: bool = True, chunk: int = CHUNK,
          prune: bool = True) -> SweepResult:
    """Solve the pair QPs on the grid and return per-pair values.

    With ``prune`` every pair is first solved on a coarse sub-grid; a QP at
    a remaining grid point is then skipped when convexity proves the pair
    value there exceeds another pair's, so the curve is unchanged.
    """
    if S.k != L.k:
        raise ValueError(f"score subspace has {S.k} outputs but the loss has {L.k}")
    eps = np.asarray(eps_grid, dtype=float).reshape(-1)
    if eps.size == 0 or np.any(np.diff(eps) <= 0) or eps[0] < 0:
        raise ValueError("eps grid must be non-negative and strictly increasing")
    workers = resolve_workers(workers)
    pairs = (pair_policy or PairPolicy()).select(L.k)
    sym = find_symmetry(S, L) if use_symmetry else None
    if sym is not None:
        pairs = _representatives(pairs, sym)
    loss_f, score_f = _facet_tables(S, L, pairs, sym)
    # an output that is never optimal is marked with -2 and has no facets
    loss_lists = [np.array([-2]) if loss_f[int(i)] is None else loss_f[int(i)] for i in pairs[:, 0]]
    ctx = SweepContext(L=np.asarray(L.L), U=np.asarray(S.U), M=S.U.T @ L.L, pairs=pairs,
                       loss_idx=_pad(loss_lists), score_idx=_pad([score_f[int(j)] for j in pairs[:, 1]]),
                       eps=eps, k=L.k)

    pair_chunks = [np.arange(s, min(s + chunk, len(pairs))) for s in range(0, len(pairs), chunk)]
    thr = [t for part in ordered_map(_threshold_chunk, ctx, pair_chunks, workers) for t in part]
    ctx.loss_idx[ctx.loss_idx == -2] = -1
    ctx.zero_upto = np.array([t[0] for t in thr], dtype=float).reshape(-1)
    ctx.feasible_upto = np.array([t[1] for t in thr], dtype=float).reshape(-1)

    values = np.full((len(pairs), eps.size), math.inf)
    zero = eps[None, :] <= ctx.zero_upto[:, None] + LP_TOL
    feasible = eps[None, :] <= ctx.feasible_upto[:, None] + LP_TOL
    values[zero & feasible] = 0.0
    band = feasible & ~zero
    slopes = np.zeros(values.shape)
    solved = np.zeros(values.shape, dtype=bool)
    if prune:
        # stage 1: coarse points of each pair's band, always including both ends
        coarse = np.zeros_like(band)
        for r in np.flatnonzero(band.any(axis=1)):
            pts = np.flatnonzero(band[r])
            coarse[r, pts[::COARSE_STRIDE]] = True
            coarse[r, pts[-1]] = True
        stages = [coarse]
    else:
        stages = [band]
    n_qp = 0
    for stage in range(2):
        if stage == 1:
            if not prune:
                break
            upper, lower = _prune_bounds(eps, ctx.zero_upto, solved, values, slopes, band)
            cut = upper + PRUNE_ATOL + PRUNE_RTOL * upper
            stages.append(band & ~solved & (lower <= cut[None, :]))
        todo = np.argwhere(stages[stage])
        res = _solve_tasks(ctx, todo, workers, chunk)
        values[todo[:, 0], todo[:, 1]] = res[:, 0]
        slopes[todo[:, 0], todo[:, 1]] = res[:, 1]
        solved[todo[:, 0], todo[:, 1]] = True
        n_qp += len(todo)
    values[band & ~solved] = np.nan
    return SweepResult(eps, pairs, values, ctx.zero_upto, ctx.feasible_upto, sym is not None, n_qp)


def calibration_curve(S: ScoreSubspace, L: LossMatrix, eps_grid, pair_policy: PairPolicy | str | None = None,
                      workers: int | None = None, use_symmetry: bool = True) -> CalibrationCurve:
    """Min over the selected ordered pairs of the pair QP values at each eps."""
    if isinstance(pair_policy, str):
        pair_policy = PairPolicy.parse(pair_policy)
    policy = pair_policy or PairPolicy()
    res = sweep(S, L, eps_grid, policy, workers, use_symmetry)
    return CalibrationCurve(res.eps, res.curve(), "exact_qp", {"pairs": repr(policy)})


def pair_calibration(S: ScoreSubspace, L: LossMatrix, i: int, j: int, eps) -> float | np.ndarray:
    """delta_ij at one eps (float) or on an increasing grid (array)."""
    if i == j or not (0 <= i < L.k and 0 <= j < L.k):
        raise ValueError(f"invalid output pair ({i}, {j})")
    grid = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(grid < 0):
        raise ValueError("eps must be non-negative")
    order = np.argsort(grid)
    uniq, inv = np.unique(grid[order], return_inverse=True)
    policy = _FixedPairs(np.array([[i, j]]))
    res = sweep(S, L, uniq, policy, workers=1, use_symmetry=False, prune=False)
    out = np.empty(grid.size)
    out[order] = res.values[0][inv]
    return float(out[0]) if np.ndim(eps) == 0 else out


class _FixedPairs(PairPolicy):
    def __init__(self, pairs: np.ndarray):
        super().__init__("all")
        self._pairs = pairs

    def select(self, k: int) -> np.ndarray:
        return self._pairs


def exact_consistency_level(S: ScoreSubspace, L: LossMatrix, use_symmetry: bool = True,
                            workers: int | None = None) -> tuple[float, tuple[int, int]]:
    """Largest eps at which the calibration function is zero, from one LP per pair."""
    res = sweep(S, L, np.array([0.0]), None, workers, use_symmetry)
    r = int(np.argmax(res.zero_upto))
    return max(float(res.zero_upto[r]), 0.0), tuple(int(v) for v in res.pairs[r])
