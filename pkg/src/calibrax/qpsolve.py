"""Dense convex QP solver and the Dorn dual.

Problems have the form::

    minimize    1/2 x^T H x + c^T x
    subject to  A x >= b,   E x = e,   x[N] >= 0

and are solved by a primal-dual interior-point method with Mehrotra's
predictor-corrector. :func:`ipm_batch` runs the method on a stack of problems
of identical shape at once, which is what the calibration sweeps use;
:func:`solve_qp` wraps it for a single problem and adds infeasibility and
unboundedness detection through linear programs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, lsq_linear

SYM_TOL = 1e-10
PSD_TOL = 1e-10
IPM_TOL = 1e-10
IPM_MAX_ITER = 200
KKT_TOL = 1e-8
REG = 1e-10
# iterations without improvement after which an instance is frozen
STALL_ITER = 15
# z/s thresholds tried when guessing the active set for polishing
POLISH_RATIOS = (1.0, 1e-3, 1e3, 1e-6, 1e6)
# slack above which a row counts as loose when detecting implicit equalities
LOOSE_TOL = 1e-9
# relative slack under which a row may carry a multiplier after the reduced solve
ACTIVE_TOL = 1e-9


class QPError(ValueError):
    """Malformed QP (shape mismatch, non-symmetric or indefinite H)."""


class SolverError(RuntimeError):
    """The interior-point iteration did not converge."""

    def __init__(self, message: str, status: str = "failed"):
        super().__init__(message)
        self.status = status


def _vec(a, n: int, name: str) -> np.ndarray:
    v = np.asarray(a, dtype=float).reshape(-1)
    if v.size != n:
        raise QPError(f"{name} has length {v.size}, expected {n}")
    return v


def _rows(a, n: int, name: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    m = np.asarray(a, dtype=float)
    if m.size == 0:
        return np.zeros((0, n))
    m = np.atleast_2d(m)
    if m.shape[1] != n:
        raise QPError(f"{name} has {m.shape[1]} columns, expected {n}")
    return m


@dataclass(frozen=True)
class QPProblem:
    """``min 1/2 x'Hx + c'x  s.t.  A_ineq x >= b_ineq, A_eq x = b_eq, x[nonneg_mask] >= 0``."""

    H: np.ndarray
    c: np.ndarray
    A_ineq: np.ndarray | None = None
    b_ineq: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    nonneg_mask: np.ndarray | None = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = H.shape[0]
        if H.shape != (n, n):
            raise QPError(f"H must be square, got shape {H.shape}")
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("H", H)
        set_("c", _vec(self.c, n, "c"))
        A = _rows(self.A_ineq, n, "A_ineq")
        set_("A_ineq", A)
        set_("b_ineq", _vec(self.b_ineq if self.b_ineq is not None else [], A.shape[0], "b_ineq"))
        E = _rows(self.A_eq, n, "A_eq")
        set_("A_eq", E)
        set_("b_eq", _vec(self.b_eq if self.b_eq is not None else [], E.shape[0], "b_eq"))
        mask = np.zeros(n, bool) if self.nonneg_mask is None else np.asarray(self.nonneg_mask, bool).reshape(-1)
        if mask.size != n:
            raise QPError(f"nonneg_mask has length {mask.size}, expected {n}")
        set_("nonneg_mask", mask)
        for name in ("H", "c", "A_ineq", "b_ineq", "A_eq", "b_eq"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise QPError(f"{name} has non-finite entries")

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def validate(self) -> None:
        """Raise :class:`QPError` unless H is symmetric positive semidefinite."""
        H = self.H
        scale = max(1.0, float(np.abs(H).max(initial=0.0)))
        if np.abs(H - H.T).max(initial=0.0) > SYM_TOL * scale:
            raise QPError("H is not symmetric")
        if self.n and np.linalg.eigvalsh(0.5 * (H + H.T))[0] < -PSD_TOL * scale:
            raise QPError("H is not positive semidefinite")

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.c @ x)

    def violation(self, x) -> float:
        """Largest violation of any constraint at ``x``."""
        x = np.asarray(x, dtype=float)
        parts = [0.0]
        if self.A_ineq.shape[0]:
            parts.append(float(np.max(self.b_ineq - self.A_ineq @ x)))
        if self.A_eq.shape[0]:
            parts.append(float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        if self.nonneg_mask.any():
            parts.append(float(np.max(-x[self.nonneg_mask])))
        return max(parts)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """Inequalities with the sign constraints appended as identity rows."""
        idx = np.flatnonzero(self.nonneg_mask)
        bounds = np.eye(self.n)[idx]
        return np.vstack([self.A_ineq, bounds]), np.concatenate([self.b_ineq, np.zeros(idx.size)])


@dataclass(frozen=True)
class QPSolution:
    status: str  # optimal | infeasible | unbounded | failed
    x: np.ndarray | None
    objective: float
    dual_objective: float
    kkt_residual: float
    iterations: int = 0
    z_ineq: np.ndarray | None = field(default=None, repr=False)
    y_eq: np.ndarray | None = field(default=None, repr=False)
    w_bound: np.ndarray | None = field(default=None, repr=False)
    certificate: np.ndarray | None = field(default=None, repr=False)


# ------------------------------------------------------------ batched IPM


def _max_step(v: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """Largest alpha in [0, 1] keeping v + alpha dv >= 0, per batch row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dv < 0, -v / dv, np.inf)
    return np.minimum(1.0, ratio.min(axis=1, initial=np.inf))


def _kkt_matrix(H, A, At, E, Et, s, z):
    """Reduced Newton matrix [[H + A'(z/s)A, E'], [E, 0]] (regularized) and its diagonal scaling.

    Returns ``(K, d)`` with ``K`` already scaled as ``diag(d) K diag(d)``; the
    scaling keeps the solves accurate when z/s spans many orders of magnitude.
    """
    n, ne = H.shape[1], E.shape[1]
    K = np.zeros((H.shape[0], n + ne, n + ne))
    K[:, :n, :n] = H + np.matmul(At, (z / s)[:, :, None] * A)
    K[:, np.arange(n), np.arange(n)] += REG
    if ne:
        K[:, :n, n:] = Et
        K[:, n:, :n] = E
        K[:, np.arange(n, n + ne), np.arange(n, n + ne)] = -REG
    d = 1.0 / np.sqrt(np.maximum(np.abs(np.diagonal(K, axis1=1, axis2=2)), 1.0))
    return d[:, :, None] * K * d[:, None, :], d


def _solve_stack(K, rhs):
    """Batched ``K x = rhs``; instances with an exactly singular factorization fall back to least squares."""
    try:
        return np.linalg.solve(K, rhs[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(rhs)
        for b in range(K.shape[0]):
            try:
                out[b] = np.linalg.solve(K[b], rhs[b])
            except np.linalg.LinAlgError:
                out[b] = np.linalg.lstsq(K[b], rhs[b], rcond=None)[0]
        return out


def _newton(K, d, A, At, s, z, rd, rp, re, rc):
    """One Newton direction from the scaled system of ``_kkt_matrix``; returns (dx, dy, ds, dz)."""
    n = At.shape[1]
    rhs = -rd - np.matmul(At, ((rc + z * rp) / s)[:, :, None])[:, :, 0]
    sol = d * _solve_stack(K, d * np.concatenate([rhs, -re], axis=1))
    dx, dy = sol[:, :n], -sol[:, n:]
    ds = np.matmul(A, dx[:, :, None])[:, :, 0] + rp
    dz = -(rc + z * ds) / s
    return dx, dy, ds, dz


def ipm_batch(H, c, A, b, E, e, tol: float = IPM_TOL, max_iter: int = IPM_MAX_ITER) -> dict:
    """Mehrotra predictor-corrector on a stack of QPs ``min 1/2x'Hx + c'x, Ax >= b, Ex = e``.

    All arrays carry a leading batch axis; every instance has the same shape.
    Each instance is iterated only until it converges, and all arithmetic is
    per-instance, so an instance's result does not depend on its batch mates.
    The best iterate seen (by scaled KKT merit) is returned. Returns a dict
    with ``x, y, z, s, iterations, merit, converged``.
    """
    H, c, A, b, E, e = (np.ascontiguousarray(a, dtype=float) for a in (H, c, A, b, E, e))
    B, n = c.shape
    p = A.shape[1]
    x = np.zeros((B, n))
    s = np.maximum(-b, 1.0) if p else np.zeros((B, 0))
    z = np.ones((B, p))
    y = np.zeros((B, E.shape[1]))
    iters = np.zeros(B, dtype=np.int64)
    scale_p = 1.0 + np.abs(b).max(axis=1, initial=0.0)
    scale_e = 1.0 + np.abs(e).max(axis=1, initial=0.0)
    At, Et = A.transpose(0, 2, 1).copy(), E.transpose(0, 2, 1).copy()

    best = {k: v.copy() for k, v in (("x", x), ("y", y), ("z", z), ("s", s))}
    best_merit = np.full(B, np.inf)
    since_best = np.zeros(B, dtype=np.int64)

    active = np.arange(B)
    for it in range(max_iter + 1):
        if active.size == 0:
            break
        Ha, ca, Aa, ba, Ea, ea = H[active], c[active], A[active], b[active], E[active], e[active]
        Ata, Eta = At[active], Et[active]
        xa, sa, za, ya = x[active], s[active], z[active], y[active]
        Hx = np.matmul(Ha, xa[:, :, None])[:, :, 0]
        Atz = np.matmul(Ata, za[:, :, None])[:, :, 0]
        Ety = np.matmul(Eta, ya[:, :, None])[:, :, 0]
        rd = Hx + ca - Atz - Ety
        rp = np.matmul(Aa, xa[:, :, None])[:, :, 0] - sa - ba
        re = np.matmul(Ea, xa[:, :, None])[:, :, 0] - ea
        gap = np.einsum("bi,bi->b", sa, za) if p else np.zeros(active.size)
        obj = 0.5 * np.einsum("bi,bi->b", xa, Hx) + np.einsum("bi,bi->b", ca, xa)
        # the dual residual is judged against the size of the terms it balances
        scale_d = 1.0 + np.maximum.reduce([np.abs(t).max(axis=1, initial=0.0) for t in (ca, Hx, Atz, Ety)])
        merit = np.maximum.reduce([
            np.abs(rp).max(axis=1, initial=0.0) / scale_p[active],
            np.abs(re).max(axis=1, initial=0.0) / scale_e[active],
            np.abs(rd).max(axis=1, initial=0.0) / scale_d,
            gap / (1.0 + np.abs(obj)),
        ])
        better = merit < best_merit[active]
        idx = active[better]
        best_merit[idx] = merit[better]
        since_best[idx] = 0
        since_best[active[~better]] += 1
        for key, val in (("x", xa), ("y", ya), ("z", za), ("s", sa)):
            best[key][idx] = val[better]
        done = (merit <= tol) | (since_best[active] >= STALL_ITER)
        keep = ~done
        if it == max_iter or not keep.any():
            break
        active = active[keep]
        Ha, Aa, Ea, Ata, Eta = Ha[keep], Aa[keep], Ea[keep], Ata[keep], Eta[keep]
        xa, sa, za, ya = xa[keep], sa[keep], za[keep], ya[keep]
        rd, rp, re = rd[keep], rp[keep], re[keep]
        mu = (gap[keep] / p)[:, None] if p else np.zeros((active.size, 1))

        # predictor
        K, dk = _kkt_matrix(Ha, Aa, Ata, Ea, Eta, sa, za)
        dx, dy, ds, dz = _newton(K, dk, Aa, Ata, sa, za, rd, rp, re, sa * za)
        alpha = np.minimum(_max_step(sa, ds), _max_step(za, dz))[:, None]
        if p:
            mu_aff = np.einsum("bi,bi->b", sa + alpha * ds, za + alpha * dz)[:, None] / p
            sigma = np.clip(mu_aff / np.maximum(mu, 1e-300), 0.0, 1.0) ** 3
            rc = sa * za + ds * dz - sigma * mu
            dx, dy, ds, dz = _newton(K, dk, Aa, Ata, sa, za, rd, rp, re, rc)
            alpha = np.minimum(1.0, 0.995 * np.minimum(_max_step(sa, ds), _max_step(za, dz)))[:, None]
        x[active] = xa + alpha * dx
        y[active] = ya + alpha * dy
        s[active] = sa + alpha * ds
        z[active] = za + alpha * dz
        iters[active] += 1
    converged = best_merit <= tol
    x, y, z, s = best["x"], best["y"], best["z"], best["s"]
    return {"x": x, "y": y, "z": z, "s": s, "iterations": iters, "merit": best_merit, "converged": converged}


# --------------------------------------------------------- single problems


def _lp_feasible_point(p: QPProblem) -> bool:
    A, b = p.stacked()
    res = linprog(
        np.zeros(p.n),
        A_ub=-A if A.shape[0] else None,
        b_ub=-b if A.shape[0] else None,
        A_eq=p.A_eq if p.A_eq.shape[0] else None,
        b_eq=p.b_eq if p.A_eq.shape[0] else None,
        bounds=[(None, None)] * p.n,
        method="highs",
    )
    return res.status == 0


def farkas_certificate(p: QPProblem) -> np.ndarray | None:
    """Multipliers ``(y >= 0 on A x >= b incl. sign rows, u on E x = e)`` proving infeasibility.

    They satisfy ``A'y + E'u = 0`` and ``b'y + e'u = 1``; returns None if the
    constraints are feasible.
    """
    A, b = p.stacked()
    mi, me = A.shape[0], p.A_eq.shape[0]
    M = np.hstack([A.T, p.A_eq.T])
    res = linprog(
        np.zeros(mi + me),
        A_eq=np.vstack([M, np.concatenate([b, p.b_eq])[None, :]]),
        b_eq=np.concatenate([np.zeros(p.n), [1.0]]),
        bounds=[(0, None)] * mi + [(None, None)] * me,
        method="highs",
    )
    return res.x if res.status == 0 else None


def unbounded_direction(p: QPProblem) -> np.ndarray | None:
    """A recession direction ``d`` with ``Hd = 0`` along which the objective decreases."""
    Z = null_space(p.H, rcond=1e-12)
    if Z.shape[1] == 0:
        return None
    A, _ = p.stacked()
    rows = [A @ Z] if A.shape[0] else []
    res = linprog(
        np.zeros(Z.shape[1]),
        A_ub=-np.vstack(rows) if rows else None,
        b_ub=np.zeros(sum(r.shape[0] for r in rows)) if rows else None,
        A_eq=np.vstack([p.A_eq @ Z, (p.c @ Z)[None, :]]),
        b_eq=np.concatenate([np.zeros(p.A_eq.shape[0]), [-1.0]]),
        bounds=[(None, None)] * Z.shape[1],
        method="highs",
    )
    return Z @ res.x if res.status == 0 else None


def kkt_residual(p: QPProblem, x, z, y) -> tuple[float, float]:
    """(KKT residual, dual objective) at primal ``x`` with stacked multipliers ``z`` and ``y``."""
    A, b = p.stacked()
    z = np.maximum(np.asarray(z, dtype=float), 0.0)
    slack = A @ x - b
    stat = p.H @ x + p.c - A.T @ z - p.A_eq.T @ y
    parts = [
        np.abs(stat).max(initial=0.0),
        p.violation(x),
        np.abs(z * slack).max(initial=0.0),
    ]
    dual = float(-0.5 * x @ p.H @ x + b @ z + p.b_eq @ y)
    return float(max(parts)), dual


def polish(p: QPProblem, x, z, y, s, ratio: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Refine an interior-point solution by solving the KKT equations on its active set.

    Rows with ``z > ratio * s`` are treated as equalities and the resulting square
    (possibly singular) linear system is solved in the least-squares sense.
    The caller decides whether the refined point is better.
    """
    A, b = p.stacked()
    act = np.flatnonzero(z > ratio * s)
    Aa, E = A[act], p.A_eq
    n, na, ne = p.n, act.size, E.shape[0]
    K = np.zeros((n + na + ne,) * 2)
    K[:n, :n] = p.H
    K[:n, n:n + na] = -Aa.T
    K[:n, n + na:] = -E.T
    K[n:n + na, :n] = Aa
    K[n + na:, :n] = E
    rhs = np.concatenate([-p.c, b[act], p.b_eq])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    x_new, z_act, y_new = sol[:n], sol[n:n + na], sol[n + na:]
    if np.any(z_act < 0):
        # dependent active rows: the minimum-norm multipliers may have the wrong sign,
        # so refit them for the fixed x with z >= 0
        G = np.hstack([Aa.T, E.T])
        fit = lsq_linear(G, p.H @ x_new + p.c, bounds=(np.r_[np.zeros(na), np.full(ne, -np.inf)], np.inf),
                         method="bvls", tol=1e-14)
        z_act, y_new = fit.x[:na], fit.x[na:]
    z_new = np.zeros_like(z)
    z_new[act] = np.maximum(z_act, 0.0)
    return x_new, z_new, y_new


def implicit_equalities(p: QPProblem) -> np.ndarray:
    """Mask of stacked inequality rows that hold with equality on the whole feasible set.

    Repeatedly maximizes the capped slack ``min(a'x - b, 1)`` summed over the
    rows not yet shown to be loose; rows whose slack stays zero at the
    optimum are implicit equalities. Assumes the problem is feasible.
    """
    A, b = p.stacked()
    mi, n = A.shape
    tight = np.ones(mi, bool)
    E = p.A_eq
    while tight.any():
        idx = np.flatnonzero(tight)
        nt = idx.size
        # variables (x, w) with A x - b >= w on the open rows, 0 <= w <= 1
        sel = np.zeros((mi, nt))
        sel[idx, np.arange(nt)] = 1.0
        res = linprog(
            np.r_[np.zeros(n), -np.ones(nt)],
            A_ub=np.hstack([-A, sel]), b_ub=-b,
            A_eq=np.hstack([E, np.zeros((E.shape[0], nt))]) if E.shape[0] else None,
            b_eq=p.b_eq if E.shape[0] else None,
            bounds=[(None, None)] * n + [(0.0, 1.0)] * nt, method="highs",
        )
        if res.status != 0:
            break
        loose = res.x[n:] > LOOSE_TOL
        if not loose.any():
            break
        tight[idx[loose]] = False
    return tight


def _solve_without_interior(p: QPProblem, tol: float, max_iter: int):
    """Re-solve with implicit equalities moved into the equality block.

    Used when the feasible set has no interior, which stalls the
    interior-point method. Multipliers for the original rows are refitted
    with sign bounds at the reduced solution. Returns ``(x, z, y, res, dual)``
    or None.
    """
    A, b = p.stacked()
    tight = implicit_equalities(p)
    if not tight.any():
        return None
    # an independent row set describing the equalities, from the SVD of the consistent system
    Eall = np.vstack([p.A_eq, A[tight]])
    eall = np.concatenate([p.b_eq, b[tight]])
    U, sv, Vt = np.linalg.svd(Eall, full_matrices=False)
    rank = int(np.sum(sv > sv.max(initial=0.0) * 1e-12))
    Er, er = sv[:rank, None] * Vt[:rank], U[:, :rank].T @ eall
    Ar, br = A[~tight], b[~tight]
    out = ipm_batch(p.H[None], p.c[None], Ar[None], br[None], Er[None], er[None], tol, max_iter)
    red = QPProblem(p.H, p.c, Ar, br, Er, er)
    x, zr, yr = out["x"][0], out["z"][0], out["y"][0]
    best = kkt_residual(red, x, zr, yr)[0]
    for ratio in POLISH_RATIOS:
        xp, zp, yp = polish(red, out["x"][0], out["z"][0], out["y"][0], out["s"][0], ratio)
        res_p = kkt_residual(red, xp, zp, yp)[0]
        if res_p < best:
            x, best = xp, res_p
    # multipliers of the original rows: z >= 0 on rows that are tight at x, y free
    slack = A @ x - b
    act = tight | (slack <= ACTIVE_TOL * (1.0 + np.abs(b)))
    na, ne = int(act.sum()), p.A_eq.shape[0]
    G = np.hstack([A[act].T, p.A_eq.T])
    if G.shape[1]:
        fit = lsq_linear(G, p.H @ x + p.c, bounds=(np.r_[np.zeros(na), np.full(ne, -np.inf)], np.inf),
                         method="bvls", tol=1e-14)
        coef = fit.x
    else:
        coef = np.zeros(0)
    z = np.zeros(A.shape[0])
    z[act] = np.maximum(coef[:na], 0.0)
    y = coef[na:]
    res, dual = kkt_residual(p, x, z, y)
    return x, z, y, res, dual


def solve_qp(p: QPProblem, tol: float = IPM_TOL, max_iter: int = IPM_MAX_ITER) -> QPSolution:
    """Solve one QP; checks feasibility and boundedness with LPs first."""
    p.validate()
    if not _lp_feasible_point(p):
        cert = farkas_certificate(p)
        return QPSolution("infeasible", None, np.inf, np.inf, np.nan, certificate=cert)
    d = unbounded_direction(p)
    if d is not None:
        return QPSolution("unbounded", None, -np.inf, -np.inf, np.nan, certificate=d)
    A, b = p.stacked()
    out = ipm_batch(p.H[None], p.c[None], A[None], b[None], p.A_eq[None], p.b_eq[None], tol, max_iter)
    x, z, y = out["x"][0], out["z"][0], out["y"][0]
    res, dual = kkt_residual(p, x, z, y)
    for ratio in POLISH_RATIOS:
        xp, zp, yp = polish(p, out["x"][0], out["z"][0], out["y"][0], out["s"][0], ratio)
        res_p, dual_p = kkt_residual(p, xp, zp, yp)
        if res_p < res:
            x, z, y, res, dual = xp, zp, yp, res_p, dual_p
    converged = bool(out["converged"][0]) or res <= KKT_TOL
    if not converged:
        alt = _solve_without_interior(p, tol, max_iter)
        if alt is not None and alt[3] < res:
            x, z, y, res, dual = alt
            converged = res <= KKT_TOL
    mi = p.A_ineq.shape[0]
    w = np.zeros(p.n)
    w[p.nonneg_mask] = z[mi:]
    status = "optimal" if converged else "failed"
    return QPSolution(status, x, p.objective(x), dual, res, int(out["iterations"][0]),
                      z_ineq=z[:mi], y_eq=y, w_bound=w)


# --------------------------------------------------------------- Dorn dual


def dorn_dual(p: QPProblem) -> QPProblem:
    """Dorn dual of ``p`` written as a minimization over ``(x, v, u)``.

    The dual reads ``max -1/2 x'Hx + b'v + e'u`` subject to
    ``Hx + c - A'v - E'u >= 0`` on the sign-constrained coordinates, ``= 0``
    on the free ones, and ``v >= 0``. The returned problem minimizes the
    negated objective, so the dual value is minus its optimal objective.
    """
    n, mi, me = p.n, p.A_ineq.shape[0], p.A_eq.shape[0]
    N = p.nonneg_mask
    H = np.zeros((n + mi + me,) * 2)
    H[:n, :n] = p.H
    c = np.concatenate([np.zeros(n), -p.b_ineq, -p.b_eq])
    G = np.hstack([p.H, -p.A_ineq.T, -p.A_eq.T])
    mask = np.concatenate([np.zeros(n, bool), np.ones(mi, bool), np.zeros(me, bool)])
    return QPProblem(H=H, c=c, A_ineq=G[N], b_ineq=-p.c[N], A_eq=G[~N], b_eq=-p.c[~N], nonneg_mask=mask)


def dorn_dual_value(p: QPProblem, x, v, u) -> float:
    x = np.asarray(x, dtype=float)
    return float(-0.5 * x @ p.H @ x + p.b_ineq @ np.asarray(v, float) + p.b_eq @ np.asarray(u, float))


def dorn_dual_violation(p: QPProblem, x, v, u) -> float:
    """Largest violation of the Dorn dual constraints at ``(x, v, u)``."""
    d = dorn_dual(p)
    return d.violation(np.concatenate([np.asarray(x, float), np.asarray(v, float), np.asarray(u, float)]))
