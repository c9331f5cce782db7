"""Random-forest regression with per-tree bootstrap and multi-output CART splits.

Split quality is the summed reduction in squared error over standardized
outputs, so outputs on very different scales get equal say. Leaves store the
raw target means. Ties between splits go to the lowest feature index and then
to the lowest threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..config_space import SpaceSpec
from .data import standardize


@numba.njit(cache=True)
def _best_split(xn, ys, feats, min_leaf):
    n, n_out = ys.shape
    total = np.zeros(n_out)
    for i in range(n):
        for o in range(n_out):
            total[o] += ys[i, o]
    base = 0.0
    for o in range(n_out):
        base += total[o] * total[o] / n
    best_gain = 0.0
    best_feat = -1
    best_thr = 0.0
    left = np.zeros(n_out)
    for f in feats:
        col = xn[:, f]
        order = np.argsort(col, kind="mergesort")
        left[:] = 0.0
        for pos in range(n - 1):
            i = order[pos]
            for o in range(n_out):
                left[o] += ys[i, o]
            n_left = pos + 1
            n_right = n - n_left
            if n_left < min_leaf:
                continue
            if n_right < min_leaf:
                break
            lo = col[i]
            hi = col[order[pos + 1]]
            if hi <= lo:
                continue
            score = 0.0
            for o in range(n_out):
                r = total[o] - left[o]
                score += left[o] * left[o] / n_left + r * r / n_right
            gain = score - base
            if gain > best_gain * (1.0 + 1e-12) + 1e-14:
                best_gain = gain
                best_feat = f
                best_thr = 0.5 * (lo + hi)
    return best_feat, best_thr


@numba.njit(cache=True)
def _grow(x, y_std, y_raw, feat_keys, max_features, min_leaf, max_depth):
    """Grow one tree on (already bootstrapped) rows; returns flat node arrays."""
    n, d = x.shape
    n_out = y_raw.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros((cap, n_out))
    count = np.zeros(cap, np.int64)

    # Explicit stack of (node id, depth, index array start into `rows`, length).
    rows = np.arange(n)
    stack_node = np.zeros(cap, np.int64)
    stack_depth = np.zeros(cap, np.int64)
    stack_start = np.zeros(cap, np.int64)
    stack_len = np.zeros(cap, np.int64)
    top = 0
    stack_len[0] = n
    n_nodes = 1
    scratch = np.empty(n, np.int64)
    while top >= 0:
        node = stack_node[top]
        depth = stack_depth[top]
        start = stack_start[top]
        length = stack_len[top]
        top -= 1
        idx = rows[start : start + length]
        for o in range(n_out):
            acc = 0.0
            for i in idx:
                acc += y_raw[i, o]
            value[node, o] = acc / length
        count[node] = length
        if length < 2 * min_leaf or depth >= max_depth:
            continue
        keys = feat_keys[node % feat_keys.shape[0]]
        feats = np.sort(np.argsort(keys)[:max_features])
        f, thr = _best_split(x[idx], y_std[idx], feats, min_leaf)
        if f < 0:
            continue
        n_left = 0
        for i in idx:
            if x[i, f] <= thr:
                scratch[n_left] = i
                n_left += 1
        k = n_left
        for i in idx:
            if x[i, f] > thr:
                scratch[k] = i
                k += 1
        rows[start : start + length] = scratch[:length]
        feature[node] = f
        threshold[node] = thr
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        top += 1
        stack_node[top] = rc
        stack_depth[top] = depth + 1
        stack_start[top] = start + n_left
        stack_len[top] = length - n_left
        top += 1
        stack_node[top] = lc
        stack_depth[top] = depth + 1
        stack_start[top] = start
        stack_len[top] = n_left
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes], count[:n_nodes]


@numba.njit(cache=True)
def _apply(feature, threshold, left, right, x):
    out = np.empty(x.shape[0], np.int64)
    for i in range(x.shape[0]):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray

    def leaves(self, x: np.ndarray) -> np.ndarray:
        return _apply(self.feature, self.threshold, self.left, self.right, np.ascontiguousarray(x, dtype=float))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.leaves(x)]

    def dump(self) -> str:
        """Indented text rendering for debugging."""
        lines = []

        def walk(node, depth):
            pad = "  " * depth
            if self.feature[node] < 0:
                vals = ", ".join(f"{v:.4g}" for v in self.value[node])
                lines.append(f"{pad}leaf n={self.count[node]} mean=[{vals}]")
                return
            lines.append(f"{pad}x[{self.feature[node]}] <= {self.threshold[node]:g}")
            walk(self.left[node], depth + 1)
            walk(self.right[node], depth + 1)

        walk(0, 0)
        return "\n".join(lines)


@dataclass(frozen=True)
class RfParams:
    n_trees: int = 16
    min_leaf: int = 2
    max_depth: int = 32
    max_features: float = 5 / 6  # fraction of input features tried at each split

    def __post_init__(self):
        if self.n_trees < 2:
            raise ValueError("need at least two trees for a variance estimate")
        if self.min_leaf < 1 or self.max_depth < 0:
            raise ValueError("min_leaf must be >= 1 and max_depth >= 0")
        if not 0 < self.max_features <= 1:
            raise ValueError("max_features is a fraction in (0, 1]")


@dataclass(frozen=True, eq=False)
class RfModel:
    trees: tuple[Tree, ...]
    params: RfParams
    seed: int

    def tree_predictions(self, x) -> np.ndarray:
        """(n_trees, n, n_out) predictions of every member."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.stack([t.predict(x) for t in self.trees])


def rf_fit(x, y, params: RfParams = RfParams(), seed: int = 0) -> RfModel:
    """Bootstrap ensemble; tree ``b`` draws its rows and feature keys from stream (seed, b)."""
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float)))
    y = np.asarray(y, dtype=float).reshape(len(x), -1)
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least two training samples")
    y_std, _, _ = standardize(y)
    n_feat = max(1, int(round(params.max_features * d)))
    trees = []
    for b in range(params.n_trees):
        rng = np.random.default_rng((seed, b))
        rows = rng.integers(0, n, n)
        keys = rng.random((2 * n + 1, d))
        arrays = _grow(x[rows], np.ascontiguousarray(y_std[rows]), np.ascontiguousarray(y[rows]), keys, n_feat, params.min_leaf, params.max_depth)
        trees.append(Tree(*arrays))
    return RfModel(tuple(trees), params, int(seed))


def rf_predict(model: RfModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean and unbiased across-tree variance per output."""
    preds = model.tree_predictions(x)
    return preds.mean(axis=0), preds.var(axis=0, ddof=1)


def posterior_sample_rf(model: RfModel, x, tree_idx: int) -> np.ndarray:
    return np.clip(model.trees[int(tree_idx)].predict(np.atleast_2d(np.asarray(x, dtype=float))), 0.0, None)


class RfSurrogate:
    """Forest over encoded coordinates, optionally with the slot index as an extra feature."""

    def __init__(self, space: SpaceSpec, params: RfParams = RfParams(), temporal: bool = False, seed: int = 0):
        self.space = space
        self.params = params
        self.temporal = temporal
        self.seed = seed
        self.model: RfModel | None = None
        self.query_time = 0.0
        self._fits = 0

    def _features(self, coords, times=None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(coords, dtype=float))
        if not self.temporal:
            return x
        t = self.query_time if times is None else times
        return np.column_stack([x, np.broadcast_to(np.asarray(t, dtype=float), (len(x),))])

    def fit(self, coords, y, times=None, query_time=None) -> "RfSurrogate":
        if self.temporal:
            times = np.zeros(len(y)) if times is None else np.asarray(times, dtype=float)
            self.query_time = float(times.max()) if query_time is None else float(query_time)
        # A fresh derived seed per refit keeps successive forests decorrelated yet reproducible.
        self.model = rf_fit(self._features(coords, times), y, self.params, seed=self.seed * 100_003 + self._fits)
        self._fits += 1
        return self

    def predict(self, coords):
        return rf_predict(self.model, self._features(coords))

    @property
    def n_outputs(self) -> int:
        return self.model.trees[0].value.shape[1]

    def draw_eps(self, n_mc: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.params.n_trees, n_mc)

    def sample(self, coords, eps) -> np.ndarray:
        """Prediction of tree eps[j] for each draw j; shape (n_mc, n, n_out)."""
        preds = self.model.tree_predictions(self._features(coords))
        return np.clip(preds[np.asarray(eps, dtype=np.int64)], 0.0, None)
