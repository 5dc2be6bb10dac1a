"""Small CART regression tree backed by the array kernels."""
from __future__ import annotations

import numpy as np

from . import kernels


class RegressionTree:
    """Depth-limited squared-error CART with vector-valued leaves."""

    def __init__(self, max_depth: int = 4, min_leaf: int = 1):
        if max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        self.max_depth = int(max_depth)
        self.min_leaf = int(min_leaf)
        self.nodes = None

    def fit(self, X, Y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        Y = np.ascontiguousarray(Y)
        if X.shape[0] == 0:
            raise ValueError("cannot fit a tree on zero samples")
        self.nodes = kernels.build_tree(X, Y, self.max_depth, self.min_leaf)
        return self

    @classmethod
    def from_arrays(cls, feature, threshold, left, right, value, max_depth=0, min_leaf=1):
        tree = cls(max_depth, min_leaf)
        tree.nodes = (np.asarray(feature, dtype=np.int64), np.asarray(threshold, dtype=np.float64),
                      np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
                      np.ascontiguousarray(value, dtype=np.float64))
        return tree

    @property
    def n_nodes(self) -> int:
        return 0 if self.nodes is None else len(self.nodes[0])

    def predict_one(self, x) -> np.ndarray:
        return kernels.tree_predict_one(*self.nodes, np.asarray(x, dtype=np.float64))

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        return kernels.tree_predict(*self.nodes, X)
