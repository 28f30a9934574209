"""Command-line interface: exact curves, bounds, consistency reports and diagnostics.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 target
accuracy below the consistency level.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rankanalysis
from .calibration import (
    CalibrationCurve,
    ConsistencyLevelError,
    PairPolicy,
    calibration_curve,
    consistency_report,
    convex_minorant,
    sample_complexity,
    theorem1_bound,
    tree_bound_closed,
    uniform_grid,
)
from .losses import LossFormatError, LossMatrix, TreeSpec, load_loss_matrix, map_loss_matrix, tree_loss_matrix
from .parallel import resolve_workers
from .qpsolve import SolverError
from .subspaces import (
    ScoreSubspace,
    condition_number,
    f_map,
    f_sort,
    identity,
    load_score_basis,
    tree_block_basis,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_LEVEL = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid command-line configuration."""


@dataclass
class RunConfig:
    command: str
    loss: str | None = None
    scores: str | None = None
    eps: str | None = None
    pairs: str = "all"
    v_mode: str = "optimal"
    out: str | None = None
    workers: int | None = None
    seed: int = 0
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        known = {"command", "loss", "scores", "eps", "pairs", "v_mode", "out", "workers", "seed"}
        values = {k: v for k, v in vars(ns).items() if k in known and v is not None}
        extra = {k: v for k, v in vars(ns).items() if k not in known and k != "func"}
        cfg = cls(**values, extra=extra)
        if cfg.workers is not None and cfg.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {cfg.workers}")
        return cfg


# ------------------------------------------------------------------ inputs


def _tree_spec(source: str) -> TreeSpec | None:
    if source.endswith(".json"):
        try:
            return TreeSpec.from_json(source)
        except FileNotFoundError:
            raise ConfigError(f"tree spec not found: {source}") from None
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: {exc}") from None
    return None


def build_loss(source: str) -> tuple[LossMatrix, TreeSpec | None]:
    """``tree.json`` spec, ``map:r`` or a CSV matrix."""
    if source is None:
        raise ConfigError("--loss is required")
    spec = _tree_spec(source)
    if spec is not None:
        return tree_loss_matrix(spec), spec
    if source.startswith("map:"):
        try:
            return map_loss_matrix(int(source[4:])), None
        except ValueError as exc:
            raise ConfigError(f"bad mAP loss {source!r}: {exc}") from None
    try:
        return load_loss_matrix(source), None
    except FileNotFoundError:
        raise ConfigError(f"loss file not found: {source}") from None
    except (LossFormatError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def build_scores(source: str, loss: LossMatrix, spec: TreeSpec | None) -> ScoreSubspace:
    """``tree:t``, ``map_full``, ``map_sort``, ``identity`` or a CSV basis."""
    if source is None:
        raise ConfigError("--scores is required")
    if source == "identity":
        S = identity(loss.k)
    elif source.startswith("tree:"):
        if spec is None:
            raise ConfigError("tree:t scores need a tree.json loss")
        try:
            S = tree_block_basis(spec, int(source[5:]))
        except ValueError as exc:
            raise ConfigError(f"bad tree scores {source!r}: {exc}") from None
    elif source in ("map_full", "map_sort"):
        if not loss.kind.startswith("map:"):
            raise ConfigError(f"{source} scores need a map:r loss")
        r = int(loss.kind[4:])
        S = f_map(r) if source == "map_full" else f_sort(r)
    else:
        try:
            S = load_score_basis(source)
        except FileNotFoundError:
            raise ConfigError(f"score basis file not found: {source}") from None
        except (LossFormatError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    if S.k != loss.k:
        raise ConfigError(f"dimension mismatch: score basis has {S.k} rows but the loss has {loss.k} outputs")
    return S


def build_grid(text: str | None, loss: LossMatrix) -> np.ndarray:
    """``a:b:n`` (n uniform points, both ends included); default 101 points on [0, L_max]."""
    if text is None:
        return uniform_grid(0.0, loss.l_max, 101)
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        return uniform_grid(lo, hi, n)
    except ValueError as exc:
        detail = f": {exc}" if str(exc) else ""
        raise ConfigError(f"bad --eps {text!r}; expected a:b:n with n >= 2 and 0 <= a < b{detail}") from None


def _problem(cfg: RunConfig):
    loss, spec = build_loss(cfg.loss)
    S = build_scores(cfg.scores, loss, spec)
    return loss, spec, S, build_grid(cfg.eps, loss)


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _source_info(cfg: RunConfig) -> dict:
    return {"loss": Path(cfg.loss).name if cfg.loss.endswith((".json", ".csv")) else cfg.loss,
            "scores": Path(cfg.scores).name if cfg.scores.endswith(".csv") else cfg.scores}


# ---------------------------------------------------------------- commands


def cmd_calibration(cfg: RunConfig) -> int:
    loss, _, S, grid = _problem(cfg)
    try:
        policy = PairPolicy.parse(cfg.pairs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    curve = calibration_curve(S, loss, grid, policy, resolve_workers(cfg.workers),
                              use_symmetry=not cfg.extra.get("literal", False))
    curve = CalibrationCurve(curve.eps, curve.values, curve.meta, dict(_source_info(cfg), **curve.info))
    _write_text(cfg.out, curve.to_csv_text())
    return EXIT_OK


def cmd_bound(cfg: RunConfig) -> int:
    loss, _, S, grid = _problem(cfg)
    if cfg.v_mode not in ("optimal", "fixed_one"):
        raise ConfigError(f"--v-mode must be optimal or fixed_one, got {cfg.v_mode!r}")
    values = theorem1_bound(S, loss, grid, cfg.v_mode)
    meta = "bound_vopt" if cfg.v_mode == "optimal" else "bound_v1"
    curve = CalibrationCurve(grid, values, meta, dict(_source_info(cfg), v_mode=cfg.v_mode))
    _write_text(cfg.out, curve.to_csv_text())
    return EXIT_OK


def cmd_tree_bound(cfg: RunConfig) -> int:
    loss, spec = build_loss(cfg.loss)
    if spec is None:
        raise ConfigError("tree-bound needs a tree.json loss")
    if cfg.scores is None or not cfg.scores.startswith("tree:"):
        raise ConfigError("tree-bound needs --scores tree:t")
    try:
        t = int(cfg.scores[5:])
        values = tree_bound_closed(spec, t, build_grid(cfg.eps, loss),
                                   nearest_block_only=cfg.extra.get("nearest_block", False))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    curve = CalibrationCurve(build_grid(cfg.eps, loss), values, "tree_closed", _source_info(cfg))
    _write_text(cfg.out, curve.to_csv_text())
    return EXIT_OK


def cmd_consistency(cfg: RunConfig) -> int:
    loss, spec = build_loss(cfg.loss)
    S = build_scores(cfg.scores, loss, spec)
    try:
        report = consistency_report(S, loss, cfg.extra.get("labels", "exhaustive"),
                                    exact=cfg.extra.get("exact", False), workers=resolve_workers(cfg.workers))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _write_text(cfg.out, report.to_json())
    return EXIT_OK


def cmd_sample_complexity(cfg: RunConfig) -> int:
    x = cfg.extra
    if x.get("curve") is None:
        raise ConfigError("--curve is required")
    try:
        curve = CalibrationCurve.from_csv(x["curve"])
    except FileNotFoundError:
        raise ConfigError(f"curve file not found: {x['curve']}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if x.get("target") is None:
        raise ConfigError("--target is required")
    minorant = convex_minorant(curve)
    eps = x["target"]
    if not curve.eps[0] <= eps <= curve.eps[-1]:
        raise ConfigError(f"--target {eps} lies outside the curve grid [{curve.eps[0]}, {curve.eps[-1]}]")
    try:
        res = sample_complexity(minorant, eps, x.get("l_max"), x.get("kappa"), x.get("d"), x.get("R"), x.get("Q"),
                                dm=x.get("dm"))
    except ConsistencyLevelError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _write_text(cfg.out, json.dumps(res.as_dict(), indent=2) + "\n")
    return EXIT_OK


def _r_values(text: str | None) -> list[int]:
    if text is None:
        return rankanalysis.log_spaced_r()
    try:
        if text.startswith("log:"):
            lo, hi, n = text[4:].split(":")
            return rankanalysis.log_spaced_r(int(lo), int(hi), int(n))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad --r-values {text!r}; use a comma list or log:lo:hi:n") from None


def cmd_map_analysis(cfg: RunConfig) -> int:
    x = cfg.extra
    r = x.get("r")
    try:
        cf = rankanalysis.map_closed_forms(r)
        rows = rankanalysis.asymptotic_report(_r_values(x.get("r_values")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    table = [{"h": h, "alpha_scaled": float(cf.alpha_s(h)), "beta_scaled": float(cf.beta_s(h)),
              "gamma": float(cf.gamma(h))} for h in range(1, r + 1)]
    summary = {"r": r, "kappa": rankanalysis.kappa_f_sort(r), "H1": cf.H1, "H2": cf.H2,
               "scale": "alpha and beta divided by (r-2)!", "log10_scale": math.lgamma(r - 1) / math.log(10),
               "table": table}
    if x.get("table"):
        lines = ["h,alpha_scaled,beta_scaled,gamma"]
        lines += [f"{t['h']},{t['alpha_scaled']!r},{t['beta_scaled']!r},{t['gamma']!r}" for t in table]
        _write_text(x["table"], "\n".join(lines) + "\n")
    if cfg.out:
        _write_text(cfg.out, rankanalysis.asymptotic_csv(rows))
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_info(cfg: RunConfig) -> int:
    loss, spec = build_loss(cfg.loss)
    S = build_scores(cfg.scores, loss, spec)
    try:
        kappa = condition_number(S)
    except ValueError:
        kappa = None  # rank-deficient basis
    info = {"k": loss.k, "m": loss.m, "d": S.d, "rank": S.rank, "l_max": loss.l_max, "kappa": kappa}
    sys.stdout.write(json.dumps(info, indent=2) + "\n")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser, grid: bool = True) -> None:
    p.add_argument("--loss", help="tree.json spec, map:r, or a CSV loss matrix")
    p.add_argument("--scores", help="tree:t, map_full, map_sort, identity, or a CSV score basis")
    if grid:
        p.add_argument("--eps", help="grid a:b:n (n points from a to b inclusive); default 0:L_max:101")
    p.add_argument("--out", help="output file (default: standard output)")
    p.add_argument("--workers", type=int, help="worker processes (overridden by CALIBRAX_WORKERS)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="calibrax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibration", help="exact calibration curve from pairwise QPs")
    _common(p)
    p.add_argument("--pairs", default="all", help="all or sampled:N:SEED")
    p.add_argument("--literal", action="store_true", help="solve every ordered pair even when a symmetry is known")
    p.set_defaults(func=cmd_calibration)

    p = sub.add_parser("bound", help="pairwise lower bound on the calibration function")
    _common(p)
    p.add_argument("--v-mode", dest="v_mode", default="optimal", help="optimal or fixed_one")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("tree-bound", help="closed-form bound for tree losses with tied block scores")
    _common(p)
    p.add_argument("--nearest-block", dest="nearest_block", action="store_true",
                   help="use the nearest-block coefficient for every eps")
    p.set_defaults(func=cmd_tree_bound)

    p = sub.add_parser("consistency", help="bracket on the consistency level (JSON)")
    _common(p, grid=False)
    p.add_argument("--labels", default="exhaustive", help="exhaustive or sampled:N:SEED (point masses)")
    p.add_argument("--exact", action="store_true", help="also compute the exact level from LPs")
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("sample-complexity", help="steps of averaged SGD sufficient for accuracy eps (JSON)")
    p.add_argument("--curve", help="calibration curve CSV; its convex minorant is used")
    p.add_argument("--target", type=float, help="target task accuracy eps")
    p.add_argument("--dm", type=float, help="the product DM directly")
    p.add_argument("--l-max", dest="l_max", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--R", type=float)
    p.add_argument("--Q", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample_complexity)

    p = sub.add_parser("map-analysis", help="mAP closed forms and large-r diagnostics")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--r-values", dest="r_values", help="comma list or log:lo:hi:n (default log:10:10000:13)")
    p.add_argument("--table", help="write the alpha/beta/gamma table CSV here")
    p.add_argument("--out", help="write the asymptotic report CSV here")
    p.set_defaults(func=cmd_map_analysis)

    p = sub.add_parser("info", help="sizes, rank and condition number of a setting")
    _common(p, grid=False)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = RunConfig.from_args(ns)
        return ns.func(cfg)
    except ConfigError as exc:
        print(f"calibrax: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConsistencyLevelError as exc:
        print(f"calibrax: {exc}", file=sys.stderr)
        return EXIT_LEVEL
    except SolverError as exc:
        print(f"calibrax: solver failure ({exc.status}): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except BrokenPipeError:
        # the reader went away (e.g. piped into head); nothing left to report
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except OSError as exc:
        print(f"calibrax: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
