"""Synthetic datasets with a known generating function."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset


@dataclass(frozen=True)
class LinearOracle:
    """``x -> W x + b``, optionally reduced to a sign or an argmax label."""

    weights: np.ndarray
    bias: np.ndarray
    output: str = "value"  # value | sign | argmax

    def scores(self, X):
        return np.atleast_2d(X) @ self.weights.T + self.bias

    def __call__(self, X):
        z = self.scores(X)
        if self.output == "sign":
            return np.where(z[:, 0] >= 0, 1, -1)
        if self.output == "argmax":
            return np.argmax(z, axis=1)
        return z


def _features(rng, n, d):
    return rng.uniform(-1.0, 1.0, size=(n, d))


def linear_regression(n=2000, d=5, m=1, noise=0.0, seed=0) -> Dataset:
    """Targets ``W x + b (+ gaussian noise)`` with x uniform on [-1, 1]^d."""
    rng = np.random.default_rng(seed)
    oracle = LinearOracle(rng.normal(size=(m, d)) / np.sqrt(d), rng.normal(size=m) * 0.1)
    X = _features(rng, n, d)
    Z = oracle(X)
    if noise > 0:
        Z = Z + noise * rng.normal(size=Z.shape)
    return Dataset(X, "regression", targets=Z, oracle=oracle, name="synthetic:linear")


def linear_binary(n=2000, d=5, seed=0) -> Dataset:
    """Labels ``sign(w x + b)``."""
    rng = np.random.default_rng(seed)
    oracle = LinearOracle(rng.normal(size=(1, d)) / np.sqrt(d), rng.normal(size=1) * 0.1, "sign")
    X = _features(rng, n, d)
    return Dataset(X, "binary", labels=oracle(X), oracle=oracle, name="synthetic:binary")


def linear_multiclass(n=2000, d=5, k=3, seed=0) -> Dataset:
    """Labels ``argmax(W x + b)`` over k classes."""
    rng = np.random.default_rng(seed)
    oracle = LinearOracle(rng.normal(size=(k, d)) / np.sqrt(d), rng.normal(size=k) * 0.1, "argmax")
    X = _features(rng, n, d)
    return Dataset(X, "multiclass", labels=oracle(X), num_classes=k, oracle=oracle,
                   name="synthetic:multiclass")


GENERATORS = {
    "linear": linear_regression,
    "binary": linear_binary,
    "multiclass": linear_multiclass,
}
