"""Calibration curves, their convex minorants and the sample-complexity calculator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

META_TAGS = ("exact_qp", "bound_vopt", "bound_v1", "tree_closed", "minorant")
# tolerance for the non-decreasing check on stored values
MONOTONE_RTOL = 1e-12


class ConsistencyLevelError(ValueError):
    """The target accuracy lies where the calibration function vanishes."""


@dataclass(frozen=True)
class CalibrationCurve:
    """Values of a calibration function (or a bound on it) on a grid of eps.

    ``values`` may contain ``+inf`` (empty feasible set). ``info`` carries
    free-form provenance written to the ``# meta`` line of the CSV file.
    """

    eps: np.ndarray
    values: np.ndarray
    meta: str = "exact_qp"
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        eps = np.array(self.eps, dtype=float).reshape(-1)
        val = np.array(self.values, dtype=float).reshape(-1)
        if eps.size != val.size or eps.size == 0:
            raise ValueError("eps and values must be non-empty and of equal length")
        if np.any(np.diff(eps) <= 0) or eps[0] < 0:
            raise ValueError("eps grid must be non-negative and strictly increasing")
        if np.any(np.isnan(val)) or np.any(val < 0):
            raise ValueError("curve values must be non-negative (or +inf)")
        n = _finite_prefix(val)
        if np.any(np.isfinite(val[n:])):
            raise ValueError("+inf values must form a tail of the curve")
        head = val[:n]
        if np.any(np.diff(head) < -MONOTONE_RTOL * np.maximum(1.0, head[1:])):
            raise ValueError("curve values must be non-decreasing in eps")
        if self.meta not in META_TAGS:
            raise ValueError(f"unknown meta tag {self.meta!r}")
        eps.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "values", val)

    def __len__(self) -> int:
        return self.eps.size

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.eps.tolist(), self.values.tolist()))

    def __call__(self, x: float) -> float:
        """Piecewise-linear interpolation; ``+inf`` once any neighbour is infinite."""
        if x < self.eps[0] or x > self.eps[-1]:
            raise ValueError(f"eps {x} outside the grid [{self.eps[0]}, {self.eps[-1]}]")
        k = int(np.searchsorted(self.eps, x, side="left"))
        if self.eps[k] == x:
            return float(self.values[k])
        lo, hi = self.values[k - 1], self.values[k]
        if np.isinf(hi):
            return math.inf
        w = (x - self.eps[k - 1]) / (self.eps[k] - self.eps[k - 1])
        return float(lo + w * (hi - lo))

    def zero_exit(self) -> tuple[float, float]:
        """(last grid eps with value 0, first grid eps with positive value)."""
        pos = np.flatnonzero(self.values > 0)
        zero = np.flatnonzero(self.values == 0)
        last_zero = float(self.eps[zero[-1]]) if zero.size else math.nan
        first_pos = float(self.eps[pos[0]]) if pos.size else math.inf
        return last_zero, first_pos

    # ------------------------------------------------------------ CSV

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv_text())

    def to_csv_text(self) -> str:
        extras = "".join(f" {k}={v}" for k, v in self.info.items())
        lines = [f"# meta: {self.meta}{extras}", "epsilon,value"]
        lines += [f"{_fmt(e)},{_fmt(v)}" for e, v in zip(self.eps, self.values)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, path) -> "CalibrationCurve":
        meta, info, eps, val = "exact_qp", {}, [], []
        with open(path, encoding="utf-8") as fh:
            header_seen = False
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if body.startswith("meta:"):
                        words = body[5:].split()
                        if words:
                            meta = words[0]
                            info = dict(w.split("=", 1) for w in words[1:] if "=" in w)
                    continue
                if not header_seen:
                    if line.replace(" ", "") != "epsilon,value":
                        raise ValueError(f"{path}: line {lineno}: expected header 'epsilon,value'")
                    header_seen = True
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise ValueError(f"{path}: line {lineno}: expected two columns")
                try:
                    eps.append(float(parts[0]))
                    val.append(float(parts[1]))
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: not a number") from None
        return cls(np.array(eps), np.array(val), meta, info)


def _finite_prefix(values: np.ndarray) -> int:
    fin = np.isfinite(values)
    return int(fin.size if fin.all() else np.argmin(fin))


def _fmt(x: float) -> str:
    """Shortest round-tripping decimal (17 significant digits at most), ``inf`` for +inf."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def uniform_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """``n`` uniform points from ``lo`` to ``hi`` inclusive."""
    if n < 2 or lo < 0 or hi <= lo:
        raise ValueError(f"invalid grid {lo}:{hi}:{n} (need n >= 2, 0 <= lo < hi)")
    return np.linspace(lo, hi, n)


# ------------------------------------------------------------ minorant


def _lower_hull(x: np.ndarray, y: np.ndarray) -> list[int]:
    hull: list[int] = []
    for k in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or above the chord a -> k
            if (y[b] - y[a]) * (x[k] - x[a]) >= (y[k] - y[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def convex_minorant(curve: CalibrationCurve) -> CalibrationCurve:
    """Greatest convex non-decreasing minorant of the sampled curve; the +inf tail is kept."""
    n = _finite_prefix(curve.values)
    out = curve.values.copy()
    if n:
        x, y = curve.eps[:n], curve.values[:n]
        h = _lower_hull(x, y)
        hull = np.interp(x, x[h], y[h])
        # non-decreasing: g(x) = min_{t >= x} hull(t)
        out[:n] = np.minimum(np.minimum.accumulate(hull[::-1])[::-1], y)
    return CalibrationCurve(curve.eps, out, "minorant", dict(curve.info, source=curve.meta))


# ---------------------------------------------------- sample complexity


@dataclass(frozen=True)
class SampleComplexity:
    eps: float
    delta: float
    dm: float
    n_star: float
    # n_star rounded up, ignoring round-off below 1e-9 relative
    n_samples: int
    breakdown: dict

    def as_dict(self) -> dict:
        return {"eps": self.eps, "delta": self.delta, "DM": self.dm, "n_star": self.n_star,
                "n_samples": self.n_samples, "breakdown": self.breakdown}


def dm_constant(l_max: float, kappa: float, d: int, R: float, Q: float) -> tuple[float, dict]:
    """DM = L_max^2 xi(kappa sqrt(d) R Q) with xi(z) = z^2 + z."""
    for name, v in (("l_max", l_max), ("kappa", kappa), ("d", d), ("R", R), ("Q", Q)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    z = kappa * math.sqrt(d) * R * Q
    xi = z * z + z
    return l_max**2 * xi, {"l_max": l_max, "kappa": kappa, "d": d, "R": R, "Q": Q, "z": z, "xi": xi}


def sample_complexity(minorant: CalibrationCurve, eps: float, l_max: float | None = None,
                      kappa: float | None = None, d: int | None = None, R: float | None = None,
                      Q: float | None = None, dm: float | None = None) -> SampleComplexity:
    """N* = 4 (DM)^2 / minorant(eps)^2.

    ``dm`` overrides the product DM; otherwise all of ``l_max, kappa, d, R, Q``
    are required.
    """
    if not eps > 0:
        raise ConsistencyLevelError(f"target accuracy {eps} below consistency level (must be positive)")
    if dm is None:
        if None in (l_max, kappa, d, R, Q):
            raise ValueError("either dm or all of l_max, kappa, d, R, Q must be given")
        dm, breakdown = dm_constant(l_max, kappa, d, R, Q)
    else:
        if not dm > 0:
            raise ValueError(f"dm must be positive, got {dm}")
        breakdown = {"dm_override": dm}
    delta = minorant(eps)
    if not delta > 0:
        raise ConsistencyLevelError(
            f"target accuracy below consistency level: calibration function is zero at eps={eps}")
    n_star = 0.0 if math.isinf(delta) else 4.0 * dm * dm / (delta * delta)
    n_samples = math.ceil(n_star * (1.0 - 1e-9))
    return SampleComplexity(float(eps), float(delta), float(dm), n_star, n_samples, breakdown)
