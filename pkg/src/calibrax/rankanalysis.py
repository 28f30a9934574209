"""Closed forms for the mAP loss with sort-based scores.

The product ``L_mAP' F_sort`` has, in row ``y``, only two distinct values:
``alpha(|y|)`` where ``y_p = 1`` and ``beta(|y|)`` elsewhere. Together with
the structure of ``F_sort' F_sort`` this gives every projected quantity of a
pair of permutations in ``O(2^r r)`` time without ``r!``-sized objects. All
factorials are divided out before evaluation, so the scaled forms work for
very large ``r``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .losses import check_permutation
from .special import float_factorial, harmonic
from .subspaces import kappa_f_sort

__all__ = [
    "MapClosedForms",
    "asymptotic_csv",
    "asymptotic_report",
    "canonical_proj_term",
    "harmonic",
    "log_spaced_r",
    "map_closed_forms",
    "map_losses_for_labelings",
    "proj_term",
    "sort_predict",
    "xi_map_sort",
    "XI_EXHAUSTIVE_MAX",
    "XiValue",
]

# above this many items the labeling scan in xi_map_sort is sampled
XI_EXHAUSTIVE_MAX = 25
XI_SAMPLES = 10**6
# labelings are scanned in blocks of this many rows
LABEL_BLOCK = 1 << 16


@dataclass(frozen=True)
class MapClosedForms:
    """``A_r, B_r, C_r`` and ``alpha, beta, gamma`` of the Hamming weight ``h``.

    Names ending in ``_s`` are the plain quantities divided by ``(r - 2)!``:
    ``A_s = (r - 1) H1``, ``B_s = H1^2 - H2``, ``C_s = (r - 1) H2``.
    """

    r: int
    H1: float
    H2: float

    @property
    def A_s(self) -> float:
        return (self.r - 1) * self.H1

    @property
    def B_s(self) -> float:
        return self.H1 * self.H1 - self.H2

    @property
    def C_s(self) -> float:
        return (self.r - 1) * self.H2

    @property
    def eigen_gap_s(self) -> float:
        """r H2 - H1^2, the repeated eigenvalue of F_sort' F_sort over (r - 2)!."""
        return self.r * self.H2 - self.H1 * self.H1

    def _scale(self) -> float:
        return float_factorial(self.r - 2)

    @property
    def A(self) -> float:
        return self._scale() * self.A_s

    @property
    def B(self) -> float:
        return self._scale() * self.B_s

    @property
    def C(self) -> float:
        return self._scale() * self.C_s

    def _check_h(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        if np.any(h < 1) or np.any(h > self.r) or np.any(h != np.round(h)):
            raise ValueError(f"Hamming weight must be an integer in [1, {self.r}]")
        return h

    def alpha_s(self, h):
        h = self._check_h(h)
        r = self.r
        t = (h - 1) / (r - 2)
        return (self.A_s * (1 - t * (1 - r / (h * (r - 1))))
                - self.B_s * 1.5 * t * (r - h) / h
                - self.C_s * (r - h) / (h * (r - 1)))

    def beta_s(self, h):
        h = self._check_h(h)
        t = (h - 1) / (self.r - 2)
        return self.A_s * (1 - t) - self.B_s * (1 - 1.5 * t)

    def alpha(self, h):
        return self._scale() * self.alpha_s(h)

    def beta(self, h):
        return self._scale() * self.beta_s(h)

    def diff_s(self, h):
        """(alpha - beta) / (r - 2)! with the common terms cancelled."""
        h = self._check_h(h)
        r = self.r
        return (self.A_s * r * (h - 1) / ((r - 2) * h * (r - 1))
                - self.B_s * (1.5 * (h - 1) * r / ((r - 2) * h) - 1)
                - self.C_s * (r - h) / (h * (r - 1)))

    def gamma(self, h):
        return self.diff_s(h) / self.eigen_gap_s


def map_closed_forms(r: int) -> MapClosedForms:
    if r < 3:
        raise ValueError(f"closed forms need r >= 3, got {r}")
    return MapClosedForms(r, harmonic(r, 1), harmonic(r, 2))


def proj_term(pi, omega) -> float:
    """2 (r-1)! ||P_sort Delta||^2 = 2 (r-1) sum_p (1/pi(p) - 1/omega(p))^2 / (r H2 - H1^2)."""
    pi, omega = check_permutation(pi), check_permutation(omega)
    r = pi.size
    if omega.size != r:
        raise ValueError("permutations of different sizes")
    cf = map_closed_forms(r)
    diff = 1.0 / pi - 1.0 / omega
    return 2.0 * (r - 1) * math.fsum(diff * diff) / cf.eigen_gap_s


def canonical_proj_term(r: int) -> float:
    """proj_term for the identity against the reversal, without materializing them."""
    cf = map_closed_forms(r)
    p = np.arange(1, r + 1, dtype=float)
    diff = 1.0 / p - 1.0 / (r + 1 - p)
    return 2.0 * (r - 1) * math.fsum(diff * diff) / cf.eigen_gap_s


def sort_predict(theta) -> np.ndarray:
    """Positions array ranking items by decreasing score; ties go to the smaller item index."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if not np.all(np.isfinite(theta)):
        raise ValueError("scores must be finite")
    order = np.lexsort((np.arange(theta.size), -theta))  # item at each position
    pos = np.empty(theta.size, dtype=np.int64)
    pos[order] = np.arange(1, theta.size + 1)
    return pos


def map_losses_for_labelings(sigma, Y: np.ndarray) -> np.ndarray:
    """mAP loss of positions ``sigma`` against every (non-empty) row of ``Y``."""
    pos = check_permutation(sigma)
    ranked = Y[:, np.argsort(pos)]
    prec = np.cumsum(ranked, axis=1) / np.arange(1, pos.size + 1)
    return 1.0 - np.sum(prec * ranked, axis=1) / Y.sum(axis=1)


def _labeling_blocks(r: int, samples: int | None, seed: int):
    if samples is None:
        for start in range(1, 2**r, LABEL_BLOCK):
            codes = np.arange(start, min(start + LABEL_BLOCK, 2**r), dtype=np.int64)
            yield ((codes[:, None] >> np.arange(r)) & 1).astype(float)
        return
    rng = np.random.default_rng(seed)
    left = samples
    while left > 0:
        n = min(left, LABEL_BLOCK)
        Y = rng.integers(0, 2, size=(n, r)).astype(float)
        Y = Y[Y.sum(axis=1) > 0]
        left -= n
        if Y.size:
            yield Y


@dataclass(frozen=True)
class XiValue:
    """Value of xi; ``exact`` is False when the labelings were sampled (then it is a lower bound)."""

    value: float
    exact: bool

    def __float__(self) -> float:
        return self.value


def xi_map_sort(pi, omega, v: float, r: int | None = None, samples: int = XI_SAMPLES, seed: int = 0) -> XiValue:
    """max_y |v (L(pi, y) - L(omega, y)) - gamma(|y|) ((F_sort y)_pi - (F_sort y)_omega)|.

    Exhaustive over all non-empty labelings up to ``XI_EXHAUSTIVE_MAX`` items,
    seeded sampling beyond.
    """
    pi, omega = check_permutation(pi), check_permutation(omega)
    r = pi.size if r is None else r
    if pi.size != r or omega.size != r:
        raise ValueError(f"permutations must have {r} items")
    if np.array_equal(pi, omega):
        raise ValueError("pi and omega must differ")
    if v < 0:
        raise ValueError("v must be non-negative")
    cf = map_closed_forms(r)
    exact = r <= XI_EXHAUSTIVE_MAX
    diff_scores = 1.0 / pi - 1.0 / omega
    best = 0.0
    for Y in _labeling_blocks(r, None if exact else samples, seed):
        loss_gap = map_losses_for_labelings(pi, Y) - map_losses_for_labelings(omega, Y)
        proj = cf.gamma(Y.sum(axis=1)) * (Y @ diff_scores)
        best = max(best, float(np.abs(v * loss_gap - proj).max()))
    return XiValue(best, exact)


def asymptotic_report(r_values) -> list[dict]:
    """Per r: kappa(F_sort), gamma(ceil(r/2)) and the canonical projection term, from closed forms."""
    rows = []
    for r in r_values:
        r = int(r)
        cf = map_closed_forms(r)
        rows.append({"r": r, "kappa": kappa_f_sort(r), "gamma_mid": float(cf.gamma(math.ceil(r / 2))),
                     "proj_term": canonical_proj_term(r)})
    return rows


def asymptotic_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "kappa", "gamma_mid", "proj_term"])
    for row in rows:
        w.writerow([row["r"], repr(row["kappa"]), repr(row["gamma_mid"]), repr(row["proj_term"])])
    return buf.getvalue()


def log_spaced_r(lo: int = 10, hi: int = 10**4, n: int = 13) -> list[int]:
    """Distinct integers roughly log-spaced on [lo, hi]."""
    return sorted({int(round(x)) for x in np.geomspace(lo, hi, n)})
