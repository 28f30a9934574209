"""Consistency levels and the dual certificate behind the pairwise lower bound."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..losses import LossMatrix
from ..qpsolve import QPProblem, dorn_dual_value, dorn_dual_violation
from ..subspaces import ScoreSubspace
from .bounds import bound_zero_exit, pair_term, projected_loss
from .exact import _unit_rows, exact_consistency_level, lp_solve, pair_calibration, score_facets
from .risks import excess_task, predict
from .symmetry import find_symmetry

# the certificate may undershoot the bound by this much and overshoot the QP value by CERT_QP_TOL
CERT_BOUND_TOL = 1e-9
CERT_QP_TOL = 1e-7
DUAL_FEAS_TOL = 1e-9
# strict score margin required of certifying distributions, far above the predictor's tie tolerance
CERT_MARGIN = 1e-7


def _jsonable(label):
    if isinstance(label, (tuple, list, np.ndarray)):
        return [_jsonable(x) for x in label]
    if isinstance(label, (np.integer,)):
        return int(label)
    if isinstance(label, (np.floating,)):
        return float(label)
    return label


@dataclass(frozen=True)
class ConsistencyReport:
    """Bracket ``eta_lower <= eta <= eta_upper`` on the consistency level.

    ``eta_lower`` is certified by a distribution ``q`` at which the surrogate
    minimizer predicts an output with that much excess task loss. ``witness``
    holds the ground-truth label (the support labels when ``q`` is not a
    point mass), the predicted output and an optimal output; ``weights`` holds
    the mixture weights of a mixed witness. ``eta_upper`` is the largest
    zero-exit point of the pairwise lower bound; ``eta_exact`` is filled in
    when the exact level was computed.
    """

    eta_lower: float
    eta_upper: float
    witness: tuple
    upper_pair: tuple[int, int]
    eta_exact: float | None = None
    weights: tuple | None = None

    def as_dict(self) -> dict:
        label, predicted, optimal = self.witness
        wit = {"label": _jsonable(label), "predicted": _jsonable(predicted), "optimal": _jsonable(optimal)}
        if self.weights is not None:
            wit["weights"] = list(self.weights)
        out = {"eta_lower": self.eta_lower, "eta_upper": self.eta_upper, "witness": wit}
        if self.eta_exact is not None:
            out["eta_exact"] = self.eta_exact
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"


def _labels(m: int, label_policy: str):
    """Ground-truth columns to scan: ``exhaustive`` or ``sampled:N:SEED``."""
    if label_policy == "exhaustive":
        return np.arange(m)
    parts = label_policy.split(":")
    if parts[0] == "sampled" and len(parts) == 3:
        try:
            n, seed = int(parts[1]), int(parts[2])
        except ValueError:
            n = 0
        if n >= 1:
            if n >= m:
                return np.arange(m)
            return np.sort(np.random.default_rng(seed).choice(m, size=n, replace=False))
    raise ValueError(f"bad label policy {label_policy!r}; use 'exhaustive' or 'sampled:N:SEED'")


def point_mass_level(S: ScoreSubspace, L: LossMatrix, label_policy: str = "exhaustive") -> tuple[float, tuple]:
    """max_y of the task excess of the surrogate minimizer under q = e_y, with its witness (0-based)."""
    PL = projected_loss(S, L)
    best, witness = -1.0, (0, 0, 0)
    for y in _labels(L.m, label_policy):
        col = L.L[:, y]
        pred = predict(-PL[:, y])
        gap = float(col[pred] - col.min())
        if gap > best:
            best, witness = gap, (int(y), pred, int(np.argmin(col)))
    return max(best, 0.0), witness


def mixture_level(S: ScoreSubspace, L: LossMatrix, margin: float = CERT_MARGIN,
                  use_symmetry: bool = True) -> tuple[float, np.ndarray | None]:
    """Largest task excess found at distributions where the surrogate minimizer predicts strictly.

    For each predicted output ``j`` and competitor ``i`` an LP maximizes
    ``(L_j - L_i) q`` over distributions whose minimizer scores ``-P L q``
    beat every other output by ``margin`` (on the normalized facet rows of
    ``j``'s cone). The excess is then re-evaluated at the LP solution with the
    actual predictor, so every returned value is attained. Returns the best
    value and its distribution.
    """
    sym = find_symmetry(S, L) if use_symmetry else None
    targets = [0] if sym is not None else range(L.k)
    Lm, m = L.L, L.m
    M = S.U.T @ Lm
    PL = projected_loss(S, L)
    simplex = (np.ones((1, m)), np.ones(1))
    best, arg = 0.0, None
    for j in targets:
        facets = score_facets(S.U, j)
        rows = -_unit_rows(S.U[j] - S.U[facets]) @ M if facets.size else np.zeros((0, m))
        gain = Lm[j] - Lm
        # competitors whose loss gap can beat the current best somewhere, largest first
        reach = gain.max(axis=1)
        for i in np.argsort(-reach, kind="stable"):
            if i == j or reach[i] <= best:
                continue
            status, _, x = lp_solve(-gain[i], rows, np.full(len(rows), margin), *simplex, bounds=(0.0, None))
            if status != "optimal":
                continue
            q = np.maximum(x, 0.0)
            q /= q.sum()
            value = excess_task(L, -(PL @ q), q)
            if value > best:
                best, arg = value, q
    return best, arg


def consistency_report(S: ScoreSubspace, L: LossMatrix, label_policy: str = "exhaustive",
                       exact: bool = False, workers: int | None = None, mixtures: bool = True) -> ConsistencyReport:
    """Lower and upper estimates of the consistency level (optionally the exact one).

    The lower estimate is the larger of the point-mass search (over the labels
    chosen by ``label_policy``) and, with ``mixtures``, the LP search of
    ``mixture_level``.
    """
    lower, (y, pred, opt) = point_mass_level(S, L, label_policy)
    witness = (L.gt_labels[y], L.output_labels[pred], L.output_labels[opt])
    weights = None
    if mixtures:
        mix, q = mixture_level(S, L)
        if q is not None and mix > lower:
            risk = L.L @ q
            support = np.flatnonzero(q > 0)
            lower, weights = mix, tuple(float(w) for w in q[support])
            witness = (tuple(L.gt_labels[s] for s in support), L.output_labels[predict(-(projected_loss(S, L) @ q))],
                       L.output_labels[int(np.argmin(risk))])
    upper, pair = bound_zero_exit(S, L)
    eta_exact = exact_consistency_level(S, L, workers=workers)[0] if exact else None
    return ConsistencyReport(lower, float(upper), witness, pair, eta_exact, weights)


# ------------------------------------------------------- dual certificate


def pair_qp(S: ScoreSubspace, L: LossMatrix, i: int, j: int, eps: float) -> QPProblem:
    """The pair problem over ``x = (theta, q)`` with all facet rows, no pruning.

    Row 0 is the eps row, rows ``1..k-1`` the loss rows ``c != i`` in
    increasing ``c``, then the score rows ``c != j``.
    """
    if i == j or not (0 <= i < L.k and 0 <= j < L.k):
        raise ValueError(f"invalid output pair ({i}, {j})")
    F, Lm = S.F, L.L
    d, m = F.shape[1], L.m
    G = np.hstack([F, projected_loss(S, L)])
    H = G.T @ G / S.k
    others_i = [c for c in range(L.k) if c != i]
    others_j = [c for c in range(L.k) if c != j]
    rows = [np.r_[np.zeros(d), Lm[j] - Lm[i]]]
    rows += [np.r_[np.zeros(d), Lm[c] - Lm[i]] for c in others_i]
    rows += [np.r_[F[j] - F[c], np.zeros(m)] for c in others_j]
    b = np.r_[eps, np.zeros(len(rows) - 1)]
    E = np.r_[np.zeros(d), np.ones(m)][None, :]
    return QPProblem(H, np.zeros(d + m), np.array(rows), b, E, np.ones(1), np.r_[np.zeros(d, bool), np.ones(m, bool)])


@dataclass(frozen=True)
class DornCheck:
    """Outcome of checking the analytic dual point of one pair at (eps, v)."""

    i: int
    j: int
    eps: float
    v: float
    status: str  # "ok", "failed" or "excluded" (pair with zero projected difference)
    certificate: float = math.nan
    bound: float = math.nan
    qp_value: float = math.nan
    violation: float = math.nan

    @property
    def passed(self) -> bool:
        return self.status in ("ok", "excluded")


def dorn_point(S: ScoreSubspace, L: LossMatrix, i: int, j: int, eps: float, v: float):
    """Analytic dual-feasible point ``(x, v_ineq, u_eq)`` for ``pair_qp(S, L, i, j, eps)``, or None if excluded."""
    term = pair_term(S, L, i, j)
    if term.w == 0.0:
        return None
    k, d = S.k, S.d
    delta = np.zeros(k)
    delta[i], delta[j] = 1.0, -1.0
    sq = term.w / (2 * k)  # ||P delta||^2
    xi = float(term.xi(v))
    scale = max(eps * v - xi, 0.0) / sq
    theta = -scale * (S.projector.gram_pinv @ (S.F.T @ delta))
    x = np.r_[theta, np.zeros(L.m)]
    mult = np.zeros(1 + 2 * (k - 1))
    mult[0] = v * scale / k
    # score row c = i among the rows c != j
    others_j = [c for c in range(k) if c != j]
    mult[k + others_j.index(i)] = scale / k
    return x, mult, np.array([-xi * scale / k])


def dorn_certificate_check(S: ScoreSubspace, L: LossMatrix, i: int, j: int, eps: float, v: float) -> DornCheck:
    """Check that the analytic dual point is feasible and lies between the bound term and the QP value."""
    if eps < 0 or v < 0:
        raise ValueError("eps and v must be non-negative")
    point = dorn_point(S, L, i, j, eps, v)
    if point is None:
        return DornCheck(i, j, eps, v, "excluded")
    p = pair_qp(S, L, i, j, eps)
    x, mult, u = point
    cert = dorn_dual_value(p, x, mult, u)
    viol = dorn_dual_violation(p, x, mult, u)
    term = pair_term(S, L, i, j)
    gain = max(eps * v - float(term.xi(v)), 0.0)
    bound = gain * gain / term.w
    qp = pair_calibration(S, L, i, j, eps)
    ok = viol <= DUAL_FEAS_TOL and cert >= bound - CERT_BOUND_TOL and cert <= qp + CERT_QP_TOL
    return DornCheck(i, j, eps, v, "ok" if ok else "failed", cert, bound, qp, viol)
