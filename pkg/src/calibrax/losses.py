"""Task-loss matrices: tree-structured multi-class losses, the mAP ranking loss
and explicit matrices read from CSV.

Conventions used throughout the package:

* outputs, labels, leaves and items are indexed from 0 in arrays;
* a permutation is stored as its *positions* array, ``positions[p]`` being the
  1-based position of item ``p``;
* the r! permutations are enumerated in lexicographic order of the positions
  array and the 2^r - 1 non-empty labelings in increasing integer order, item
  ``p`` being bit ``p`` of the integer (item 0 is the least significant bit).
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_MAP_ITEMS = 7


class LossFormatError(ValueError):
    """Raised for malformed loss or score files."""


@dataclass(frozen=True)
class TreeSpec:
    """Level-homogeneous label tree.

    ``children[s]`` is the number of children of every node at depth ``s`` and
    each such edge has weight ``weights[s] / 2``; the weights sum to one so the
    largest leaf-to-leaf distance is one.
    """

    children: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(int(n) for n in self.children))
        object.__setattr__(self, "weights", tuple(float(a) for a in self.weights))
        if len(self.children) < 1:
            raise ValueError("tree needs at least one level")
        if len(self.children) != len(self.weights):
            raise ValueError("children and weights must have the same length")
        if any(n < 2 for n in self.children):
            raise ValueError(f"every level needs at least 2 children, got {self.children}")
        if any(a < 0 or not math.isfinite(a) for a in self.weights):
            raise ValueError(f"weights must be finite and non-negative, got {self.weights}")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {math.fsum(self.weights)!r})")

    @property
    def depth(self) -> int:
        return len(self.children)

    @property
    def n_leaves(self) -> int:
        return math.prod(self.children)

    def n_blocks(self, t: int) -> int:
        """Number of depth-``t`` ancestors, i.e. blocks when cut at depth ``t``."""
        self._check_depth(t)
        return math.prod(self.children[:t])

    def block_size(self, t: int) -> int:
        self._check_depth(t)
        return math.prod(self.children[t:])

    def block_of(self, leaf: int, t: int) -> int:
        return leaf // self.block_size(t)

    def digits(self, leaf: int) -> tuple[int, ...]:
        """Child index taken at every level on the way from the root to ``leaf``."""
        out = []
        for n in reversed(self.children):
            leaf, c = divmod(leaf, n)
            out.append(c)
        return tuple(reversed(out))

    def _check_depth(self, t: int) -> None:
        if not 0 <= t <= self.depth:
            raise ValueError(f"depth {t} outside [0, {self.depth}]")

    @classmethod
    def from_dict(cls, d: dict) -> "TreeSpec":
        try:
            return cls(children=tuple(d["children"]), weights=tuple(d["weights"]))
        except KeyError as exc:
            raise LossFormatError(f"tree spec misses key {exc}") from None

    @classmethod
    def from_json(cls, path) -> "TreeSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"children": list(self.children), "weights": list(self.weights)}


@dataclass(frozen=True)
class LossMatrix:
    """k x m task-loss matrix with its output and ground-truth label sets."""

    L: np.ndarray
    output_labels: tuple = ()
    gt_labels: tuple = ()
    kind: str = "explicit"
    # (out_maps, label_maps) generators of index maps leaving L unchanged
    symmetry: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        L = np.array(self.L, dtype=float)
        if L.ndim != 2 or L.size == 0:
            raise ValueError(f"loss matrix must be a non-empty 2-D array, got shape {L.shape}")
        if not np.all(np.isfinite(L)):
            raise ValueError("loss matrix has non-finite entries")
        if np.any(L < 0):
            raise ValueError("loss matrix has negative entries")
        L.setflags(write=False)
        object.__setattr__(self, "L", L)
        if not self.output_labels:
            object.__setattr__(self, "output_labels", tuple(range(1, L.shape[0] + 1)))
        if not self.gt_labels:
            object.__setattr__(self, "gt_labels", tuple(range(1, L.shape[1] + 1)))
        if len(self.output_labels) != L.shape[0] or len(self.gt_labels) != L.shape[1]:
            raise ValueError("label sets do not match the matrix shape")

    @property
    def k(self) -> int:
        return self.L.shape[0]

    @property
    def m(self) -> int:
        return self.L.shape[1]

    @property
    def l_max(self) -> float:
        return float(self.L.max())


# ---------------------------------------------------------------- tree losses


def tree_distance(spec: TreeSpec, i: int, j: int) -> float:
    """Weighted path length between leaves ``i`` and ``j`` (0-based)."""
    k = spec.n_leaves
    if not (0 <= i < k and 0 <= j < k):
        raise IndexError(f"leaf index out of range [0, {k})")
    di, dj = spec.digits(i), spec.digits(j)
    for s, (a, b) in enumerate(zip(di, dj)):
        if a != b:
            return math.fsum(spec.weights[s:])
    return 0.0


def tree_loss_matrix(spec: TreeSpec) -> LossMatrix:
    k = spec.n_leaves
    digits = np.array([spec.digits(i) for i in range(k)])
    # tails[s] = sum of weights from level s down; tails[D] = 0
    tails = np.array([math.fsum(spec.weights[s:]) for s in range(spec.depth)] + [0.0])
    differ = digits[:, None, :] != digits[None, :, :]
    first = np.where(differ.any(axis=2), differ.argmax(axis=2), spec.depth)
    return LossMatrix(L=tails[first], kind="tree")


# ----------------------------------------------------------------- mAP losses


def permutations(r: int) -> np.ndarray:
    """All r! positions arrays in lexicographic order, shape (r!, r), 1-based."""
    return np.array(list(itertools.permutations(range(1, r + 1))), dtype=np.int64)


def labelings(r: int) -> np.ndarray:
    """All non-empty binary labelings, shape (2^r - 1, r), row c encodes c + 1."""
    codes = np.arange(1, 2**r, dtype=np.int64)
    return ((codes[:, None] >> np.arange(r)) & 1).astype(np.int64)


def check_permutation(positions) -> np.ndarray:
    pos = np.asarray(positions, dtype=np.int64)
    if pos.ndim != 1 or sorted(pos.tolist()) != list(range(1, pos.size + 1)):
        raise ValueError(f"{positions!r} is not a positions array of a permutation")
    return pos


def _check_labeling(y, r: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (r,) or np.any((y != 0) & (y != 1)):
        raise ValueError(f"labeling must be a binary vector of length {r}")
    if y.sum() == 0:
        raise ValueError("mAP loss is undefined for a labeling with no relevant item")
    return y


def map_loss(sigma, y) -> float:
    """One minus the average precision of ranking ``sigma`` for relevance ``y``.

    Evaluated through the precision-at-each-relevant-item average.
    """
    pos = check_permutation(sigma)
    y = _check_labeling(y, pos.size)
    order = np.argsort(pos)  # items sorted by position
    hits = np.cumsum(y[order])
    prec = hits / np.arange(1, pos.size + 1)
    return float(1.0 - np.sum(prec * y[order]) / y.sum())


def map_loss_pairwise(sigma, y) -> float:
    """Same value as :func:`map_loss` through the 1/max(sigma(p), sigma(q)) form."""
    pos = check_permutation(sigma)
    y = _check_labeling(y, pos.size)
    total = 0.0
    for p in range(pos.size):
        for q in range(p + 1):
            total += y[p] * y[q] / max(pos[p], pos[q])
    return float(1.0 - total / y.sum())


def map_loss_matrix(r: int) -> LossMatrix:
    """Dense r! x (2^r - 1) mAP loss matrix."""
    if not 2 <= r <= MAX_MAP_ITEMS:
        raise ValueError(f"r must lie in [2, {MAX_MAP_ITEMS}], got {r}")
    perms = permutations(r)
    ys = labelings(r)
    sizes = ys.sum(axis=1)
    steps = np.arange(1, r + 1)
    L = np.empty((perms.shape[0], ys.shape[0]))
    for row, pos in enumerate(perms):
        ranked = ys[:, np.argsort(pos)]
        prec = np.cumsum(ranked, axis=1) / steps
        L[row] = 1.0 - np.sum(prec * ranked, axis=1) / sizes
    L[:, -1] = 0.0  # all-relevant column is exactly zero
    return LossMatrix(
        L=L,
        output_labels=tuple(tuple(int(v) for v in p) for p in perms),
        gt_labels=tuple(tuple(int(v) for v in y) for y in ys),
        kind=f"map:{r}",
        symmetry=map_symmetry(r),
    )


def map_symmetry(r: int) -> tuple[np.ndarray, np.ndarray]:
    """Generators of the item-relabeling symmetry of the mAP loss.

    Returns ``(out_maps, label_maps)`` of shapes (r-1, r!) and (r-1, 2^r - 1).
    Generator ``g`` swaps items ``g`` and ``g + 1``; it sends output ``a`` to
    ``out_maps[g, a]`` and label ``c`` to ``label_maps[g, c]``, and the loss
    satisfies ``L[out_maps[g]][:, label_maps[g]] == L``.
    """
    perms = permutations(r)
    index = {p: a for a, p in enumerate(map(tuple, perms.tolist()))}
    codes = np.arange(1, 2**r, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(r)) & 1
    out_maps = np.empty((r - 1, perms.shape[0]), dtype=np.int64)
    label_maps = np.empty((r - 1, codes.size), dtype=np.int64)
    for g in range(r - 1):
        swap = np.arange(r)
        swap[[g, g + 1]] = swap[[g + 1, g]]
        out_maps[g] = [index[p] for p in map(tuple, perms[:, swap].tolist())]
        label_maps[g] = (bits[:, swap] << np.arange(r)).sum(axis=1) - 1
    return out_maps, label_maps


# -------------------------------------------------------------- file formats


def read_matrix_csv(path, what: str = "loss") -> np.ndarray:
    """Parse a header-less CSV of finite reals, reporting bad cells by location."""
    rows: list[list[float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for r, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            values = []
            for c, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise LossFormatError(f"{path}: row {r}, column {c}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise LossFormatError(f"{path}: row {r}, column {c}: non-finite value {cell!r}")
                values.append(v)
            if rows and len(values) != len(rows[0]):
                raise LossFormatError(
                    f"{path}: row {r} has {len(values)} columns, expected {len(rows[0])}"
                )
            rows.append(values)
    if not rows:
        raise LossFormatError(f"{path}: empty {what} file")
    return np.array(rows)


def load_loss_matrix(path) -> LossMatrix:
    L = read_matrix_csv(path, "loss")
    bad = np.argwhere(L < 0)
    if bad.size:
        r, c = bad[0] + 1
        raise LossFormatError(f"{path}: row {r}, column {c}: negative loss {L[r - 1, c - 1]!r}")
    return LossMatrix(L=L, kind=f"csv:{Path(path).name}")


def write_matrix_csv(path, a: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(a, dtype=float):
            w.writerow([repr(float(v)) for v in row])
