"""Variance-reduction regression tree with per-node feature subsampling.

Stored as flat parallel arrays so a fitted forest serializes compactly to
JSON. Growth order is depth-first (left child first), which fixes the RNG
draw order and makes fits bit-reproducible for a given generator state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LEAF = -1


@dataclass
class RegressionTree:
    """feature[i] == LEAF marks a leaf; its prediction sits in value[i]."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def n_nodes(self) -> int:
        return len(self.feature)

    def to_dict(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": list(self.threshold),
            "left": list(self.left),
            "right": list(self.right),
            "value": list(self.value),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RegressionTree":
        return cls(
            feature=list(payload["feature"]),
            threshold=list(payload["threshold"]),
            left=list(payload["left"]),
            right=list(payload["right"]),
            value=list(payload["value"]),
        )


def _best_split(
    X: np.ndarray, y: np.ndarray, feature_ids: Sequence[int], min_leaf: int
) -> tuple[int, float, float] | None:
    """Lowest-SSE axis split, or None. Ties go to the lowest feature index,
    then the lowest threshold (argmin picks the first qualifying position)."""
    best_sse = np.inf
    best: tuple[int, float, float] | None = None
    n = len(y)
    for j in feature_ids:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        nl = np.arange(1, n)
        nr = n - nl
        sl = csum[:-1]
        sse_left = csq[:-1] - sl * sl / nl
        sr = csum[-1] - sl
        sse_right = (csq[-1] - csq[:-1]) - sr * sr / nr
        sse = sse_left + sse_right
        invalid = (xs[:-1] >= xs[1:]) | (nl < min_leaf) | (nr < min_leaf)
        if invalid.all():
            continue
        sse[invalid] = np.inf
        i = int(np.argmin(sse))
        if sse[i] < best_sse:
            best_sse = float(sse[i])
            best = (j, float((xs[i] + xs[i + 1]) / 2.0), best_sse)
    return best


def fit_regression_tree(
    X: np.ndarray,
    y: np.ndarray,
    *,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> RegressionTree:
    """Grow greedily on SSE reduction; subsample max_features per node."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    tree = RegressionTree()

    def new_node() -> int:
        tree.feature.append(LEAF)
        tree.threshold.append(0.0)
        tree.left.append(LEAF)
        tree.right.append(LEAF)
        tree.value.append(0.0)
        return len(tree.feature) - 1

    # explicit pre-order stack: deep unbalanced trees must not hit the
    # interpreter recursion limit, and the RNG draw order must stay fixed
    stack: list[tuple[np.ndarray, int, int, str]] = [(np.arange(n), 0, -1, "")]
    while stack:
        rows, depth, parent, side = stack.pop()
        node = new_node()
        if parent >= 0:
            if side == "left":
                tree.left[parent] = node
            else:
                tree.right[parent] = node
        ys = y[rows]
        tree.value[node] = float(ys.mean())
        if len(rows) < 2 * min_samples_leaf or len(rows) < 2:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if ys.min() == ys.max():
            continue
        if max_features is not None and max_features < p:
            assert rng is not None, "feature subsampling requires a generator"
            feature_ids = np.sort(rng.choice(p, size=max_features, replace=False))
        else:
            feature_ids = np.arange(p)
        split = _best_split(X[rows], ys, feature_ids, min_samples_leaf)
        if split is None:
            continue
        j, threshold, _ = split
        mask = X[rows, j] <= threshold
        tree.feature[node] = int(j)
        tree.threshold[node] = threshold
        stack.append((rows[~mask], depth + 1, node, "right"))
        stack.append((rows[mask], depth + 1, node, "left"))
    return tree


def predict_tree(tree: RegressionTree, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0], dtype=float)
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        j = tree.feature[node]
        if j == LEAF:
            out[rows] = tree.value[node]
            continue
        mask = X[rows, j] <= tree.threshold[node]
        stack.append((tree.left[node], rows[mask]))
        stack.append((tree.right[node], rows[~mask]))
    return out
