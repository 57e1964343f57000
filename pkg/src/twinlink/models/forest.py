"""CART random forest with Gini splits and majority voting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 50
    max_depth: int = 10
    min_leaf: int = 2
    feature_subsample: int | None = None  # None -> round(sqrt(d))
    bootstrap: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_leaf < 1 or self.max_depth < 0:
            raise ValueError("min_leaf must be >= 1 and max_depth >= 0")


def gini(counts) -> float:
    """Gini impurity 1 - sum p_c^2 of a node given per-class counts."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


def _best_split(x: np.ndarray, y: np.ndarray, features, min_leaf: int):
    """Best (feature, threshold, impurity decrease) over ``features``, or None."""
    n = len(y)
    n1 = y.sum()
    parent = 1.0 - (n1 / n) ** 2 - ((n - n1) / n) ** 2
    best = None
    for f in features:
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        ys = y[order]
        left_n = np.arange(1, n)
        left_1 = np.cumsum(ys)[:-1]
        right_n = n - left_n
        right_1 = n1 - left_1
        valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        gl = 1.0 - (left_1 / left_n) ** 2 - ((left_n - left_1) / left_n) ** 2
        gr = 1.0 - (right_1 / right_n) ** 2 - ((right_n - right_1) / right_n) ** 2
        decrease = parent - (left_n * gl + right_n * gr) / n
        decrease = np.where(valid, decrease, -np.inf)
        k = int(np.argmax(decrease))
        if best is None or decrease[k] > best[2]:
            best = (int(f), 0.5 * (xs[k] + xs[k + 1]), float(decrease[k]))
    return best


@dataclass
class DecisionTree:
    """Array-encoded binary tree; leaves have feature == -1."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[int] = field(default_factory=list)

    def _node(self, label: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(label)
        return len(self.feature) - 1

    @classmethod
    def grow(cls, x, y, rng: np.random.Generator, max_depth: int, min_leaf: int, max_features: int):
        tree = cls()
        d = x.shape[1]
        stack = [(np.arange(len(y)), 0, None, None)]
        while stack:
            idx, depth, parent, side = stack.pop()
            ys = y[idx]
            n1 = int(ys.sum())
            # majority class; ties go to NLoS (1)
            node = tree._node(1 if 2 * n1 >= len(ys) else 0)
            if parent is not None:
                (tree.left if side == 0 else tree.right)[parent] = node
            if depth >= max_depth or n1 == 0 or n1 == len(ys) or len(ys) < 2 * min_leaf:
                continue
            perm = rng.permutation(d)
            split = _best_split(x[idx], ys, perm[:max_features], min_leaf)
            if split is None and max_features < d:
                split = _best_split(x[idx], ys, perm[max_features:], min_leaf)
            if split is None:
                continue
            f, thr, _ = split
            tree.feature[node] = f
            tree.threshold[node] = thr
            go_left = x[idx, f] <= thr
            stack.append((idx[~go_left], depth + 1, node, 1))
            stack.append((idx[go_left], depth + 1, node, 0))
        tree._freeze()
        return tree

    def _freeze(self):
        self._f = np.array(self.feature)
        self._t = np.array(self.threshold)
        self._l = np.array(self.left)
        self._r = np.array(self.right)
        self._v = np.array(self.value)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        node = np.zeros(len(x), dtype=int)
        active = self._f[node] >= 0
        while active.any():
            i = np.nonzero(active)[0]
            n = node[i]
            go_left = x[i, self._f[n]] <= self._t[n]
            node[i] = np.where(go_left, self._l[n], self._r[n])
            active = self._f[node] >= 0
        return self._v[node]

    @property
    def depth(self) -> int:
        def walk(n):
            return 0 if self.feature[n] < 0 else 1 + max(walk(self.left[n]), walk(self.right[n]))
        return walk(0)


@dataclass
class RandomForest:
    trees: list[DecisionTree]
    mean: np.ndarray
    scale: np.ndarray

    def votes(self, x) -> np.ndarray:
        """Per-tree predictions, shape (n_trees, n_samples)."""
        z = (np.atleast_2d(np.asarray(x, dtype=float)) - self.mean) / self.scale
        return np.stack([t.predict(z) for t in self.trees])

    def predict_proba(self, x) -> np.ndarray:
        return self.votes(x).mean(axis=0)

    def predict(self, x) -> np.ndarray:
        votes = self.votes(x)
        return (2 * votes.sum(axis=0) >= votes.shape[0]).astype(int)


def standardizer(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    return mean, np.where(scale > 0, scale, 1.0)


def fit_forest(x, y, cfg: ForestConfig = ForestConfig(), standardize: bool = True) -> RandomForest:
    """Grow ``cfg.n_trees`` CART trees on bootstrap resamples of standardized features.

    A single-class input yields single-leaf trees predicting that class.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(y) < 2:
        raise ValueError("need at least two samples")
    mean, scale = standardizer(x) if standardize else (np.zeros(x.shape[1]), np.ones(x.shape[1]))
    z = (x - mean) / scale
    d = x.shape[1]
    max_features = cfg.feature_subsample or max(1, int(round(math.sqrt(d))))
    rng = np.random.default_rng(cfg.rng_seed)
    trees = []
    for _ in range(cfg.n_trees):
        idx = rng.integers(0, len(y), size=len(y)) if cfg.bootstrap else np.arange(len(y))
        trees.append(DecisionTree.grow(z[idx], y[idx], rng, cfg.max_depth, cfg.min_leaf, max_features))
    return RandomForest(trees, mean, scale)


def predict_forest(forest: RandomForest, feature_vector) -> tuple[int, float]:
    """Majority label over trees (ties -> 1) and the fraction of trees voting for it."""
    votes = forest.votes(np.asarray(feature_vector, dtype=float).reshape(1, -1))[:, 0]
    label = int(2 * votes.sum() >= len(votes))
    return label, float(np.mean(votes == label))
