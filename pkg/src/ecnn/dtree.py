"""Decision tree with randomized split thresholds.

Candidate thresholds are drawn uniformly over each variable's node-local
range rather than enumerated, which regularizes the tree; a node stops
splitting once it holds at most a fixed fraction of the training rows, is
pure, or no sampled split yields any information gain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError
from .util import atomic_write_text, derive_rng

FORMAT_VERSION = 1


@dataclass
class DtConfig:
    n_s: int = 25  # threshold draws per variable
    p_min: float = 0.06  # minimal node fraction still worth splitting
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_s < 1:
            raise ConfigError(f"n_s must be >= 1, got {self.n_s}")
        if not 0.0 < self.p_min < 1.0:
            raise ConfigError(f"p_min must be in (0,1), got {self.p_min}")

    def to_dict(self) -> dict:
        return {"n_s": self.n_s, "p_min": self.p_min, "seed": self.seed}


@dataclass
class Leaf:
    label: int
    counts: tuple[int, int]


@dataclass
class Split:
    feature: int
    threshold: float
    left: "Leaf | Split"
    right: "Leaf | Split"


DtNode = Leaf | Split


@dataclass
class DtModel:
    root: DtNode
    n_features: int

    def split_count(self) -> int:
        def count(node: DtNode) -> int:
            if isinstance(node, Leaf):
                return 0
            return 1 + count(node.left) + count(node.right)

        return count(self.root)

    def leaves(self) -> list[Leaf]:
        out: list[Leaf] = []

        def walk(node: DtNode) -> None:
            if isinstance(node, Leaf):
                out.append(node)
            else:
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out

    def feature_set(self) -> frozenset[int]:
        feats: set[int] = set()

        def walk(node: DtNode) -> None:
            if isinstance(node, Split):
                feats.add(node.feature)
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return frozenset(feats)

    def to_json_dict(self) -> dict:
        def encode(node: DtNode) -> dict:
            if isinstance(node, Leaf):
                return {"leaf": {"class": node.label, "counts": list(node.counts)}}
            return {
                "split": {
                    "feature": node.feature,
                    "threshold": node.threshold,
                    "left": encode(node.left),
                    "right": encode(node.right),
                }
            }

        return {
            "format_version": FORMAT_VERSION,
            "n_features": self.n_features,
            "root": encode(self.root),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, d: dict) -> "DtModel":
        def decode(nd: dict) -> DtNode:
            if "leaf" in nd:
                leaf = nd["leaf"]
                return Leaf(int(leaf["class"]), (int(leaf["counts"][0]), int(leaf["counts"][1])))
            sp = nd["split"]
            return Split(
                int(sp["feature"]), float(sp["threshold"]), decode(sp["left"]), decode(sp["right"])
            )

        return cls(decode(d["root"]), int(d["n_features"]))

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "DtModel":
        path = Path(path)
        if not path.exists():
            raise DataError(f"model file not found: {path}")
        return cls.from_json_dict(json.loads(path.read_text()))


def entropy(counts) -> float:
    """Shannon entropy (base 2) of a class-count vector; zero counts
    contribute nothing."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise DataError("entropy of an empty count vector is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def info_gain(parent_labels, left_labels, right_labels) -> float:
    """Entropy drop achieved by partitioning parent into left/right."""
    parent = np.asarray(parent_labels, dtype=np.int64)
    left = np.asarray(left_labels, dtype=np.int64)
    right = np.asarray(right_labels, dtype=np.int64)
    if len(parent) == 0:
        raise DataError("information gain of an empty parent is undefined")
    if len(left) + len(right) != len(parent):
        raise ValueError("left and right must partition the parent")
    h_parent = entropy(np.bincount(parent, minlength=2))
    weighted = 0.0
    for side in (left, right):
        if len(side):
            weighted += len(side) / len(parent) * entropy(np.bincount(side, minlength=2))
    return h_parent - weighted


def sample_threshold(values, rng: np.random.Generator) -> float:
    """One uniform draw over the node-local [min, max] of a variable."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("cannot sample a threshold from no values")
    lo, hi = float(values.min()), float(values.max())
    return float(rng.uniform(lo, hi))


def _entropy_per_split(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    # vectorized binary entropy for arrays of (positive, total) counts
    with np.errstate(divide="ignore", invalid="ignore"):
        p1 = np.where(total > 0, pos / np.maximum(total, 1), 0.0)
        p0 = 1.0 - p1
        h = np.zeros_like(p1)
        for p in (p0, p1):
            mask = p > 0
            h[mask] -= p[mask] * np.log2(p[mask])
    return h


def best_partition(
    x: np.ndarray, y: np.ndarray, cfg: DtConfig, rng: np.random.Generator
) -> tuple[int, float, float]:
    """Best of ``n_s`` random thresholds per variable, then best variable.

    Ties break to the lower feature index, then the smaller threshold.
    Returns (feature, threshold, gain); a gain of 0 means no sampled split
    separates anything (the caller should make a leaf).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if n < 2 or len(np.unique(y)) < 2:
        raise ValueError("best_partition needs at least 2 rows and 2 classes")
    h_parent = entropy(np.bincount(y, minlength=2))
    total_pos = int(y.sum())

    best_feature, best_threshold, best_gain = -1, 0.0, -np.inf
    is_pos = y == 1
    for i in range(x.shape[1]):
        col = x[:, i]
        lo, hi = float(col.min()), float(col.max())
        thresholds = rng.uniform(lo, hi, size=cfg.n_s)
        left_mask = col[:, None] <= thresholds[None, :]
        left_total = left_mask.sum(axis=0)
        left_pos = (left_mask & is_pos[:, None]).sum(axis=0)
        right_total = n - left_total
        right_pos = total_pos - left_pos
        weighted = (left_total / n) * _entropy_per_split(left_pos, left_total) + (
            right_total / n
        ) * _entropy_per_split(right_pos, right_total)
        gains = h_parent - weighted
        top = float(gains.max())
        candidates = thresholds[gains == top]
        thr = float(candidates.min())
        if top > best_gain:
            best_feature, best_threshold, best_gain = i, thr, top
    return best_feature, best_threshold, max(best_gain, 0.0)


def build(d: Dataset, cfg: DtConfig, seed: int | None = None) -> DtModel:
    """Grow a tree on dataset ``d``.

    A node becomes a leaf when it holds at most ``p_min`` of the training
    rows, is pure, or the best sampled split has zero gain. Rows with the
    split variable equal to the threshold go left. Leaf label is the
    majority class, ties to class 0.
    """
    if d.n < 2:
        raise DataError(f"need at least 2 rows to build a tree, got {d.n}")
    rng = derive_rng(cfg.seed if seed is None else seed, "tree")
    floor = cfg.p_min * d.n

    def leaf_for(ys: np.ndarray) -> Leaf:
        counts = np.bincount(ys, minlength=2)
        label = 0 if counts[0] >= counts[1] else 1
        return Leaf(label, (int(counts[0]), int(counts[1])))

    def grow(idx: np.ndarray) -> DtNode:
        ys = d.y[idx]
        if len(idx) <= floor or len(np.unique(ys)) < 2:
            return leaf_for(ys)
        feature, threshold, gain = best_partition(d.x[idx], ys, cfg, rng)
        if gain <= 0.0:
            return leaf_for(ys)
        go_left = d.x[idx, feature] <= threshold
        if not go_left.any() or go_left.all():  # roundoff can report a hair of gain
            return leaf_for(ys)
        return Split(feature, threshold, grow(idx[go_left]), grow(idx[~go_left]))

    return DtModel(grow(np.arange(d.n)), d.m)


def dt_predict(model: DtModel, x: np.ndarray) -> int:
    """Route one raw input vector to a leaf; values equal to a threshold
    go left."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise DataError(f"expected {model.n_features} features, got shape {x.shape}")
    node = model.root
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.label


def evaluate(model: DtModel, d: Dataset) -> float:
    """Fraction of rows of ``d`` the tree misclassifies."""
    if d.n == 0:
        raise DataError("cannot evaluate on an empty dataset")
    preds = np.fromiter((dt_predict(model, row) for row in d.x), dtype=np.int64, count=d.n)
    return float(np.mean(preds != d.y))
