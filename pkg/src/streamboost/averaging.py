"""Running averages of hypotheses over time."""
from __future__ import annotations

import numpy as np


class ParamAverage:
    """Exact time average for a learner whose output is linear in its parameters."""

    def __init__(self):
        self.total = None
        self.count = 0

    def record(self, learner):
        p = learner.params()
        self.total = p.copy() if self.total is None else self.total + p
        self.count += 1

    def add_sum(self, param_sum, count):
        self.total = param_sum.copy() if self.total is None else self.total + param_sum
        self.count += int(count)

    def mean_params(self):
        return self.total / self.count

    def predict(self, learner, x):
        return learner.predict_params(self.mean_params(), x)

    def predict_many(self, learner, X):
        return learner.predict_params_many(self.mean_params(), X)


class ThinnedSnapshots:
    """Keep at most ``capacity`` items sampled at a doubling stride.

    Items are offered once per step. Every ``stride``-th offer is kept; when
    the store overflows, every other kept item is dropped and the stride
    doubles, so the survivors stay evenly spaced over the whole history.
    """

    def __init__(self, capacity: int = 32):
        if capacity < 1:
            raise ValueError("snapshot capacity must be >= 1")
        self.capacity = int(capacity)
        self.stride = 1
        self.count = 0
        self.items = []
        self.times = []

    def offer(self, make):
        if self.count % self.stride == 0:
            self.items.append(make())
            self.times.append(self.count)
            if len(self.items) > self.capacity:
                self.items = self.items[::2]
                self.times = self.times[::2]
                self.stride *= 2
        self.count += 1

    def __len__(self):
        return len(self.items)


class SnapshotAverage(ThinnedSnapshots):
    """Approximate time average of a learner from thinned frozen copies."""

    def record(self, learner):
        self.offer(learner.snapshot)

    def predict(self, learner, x):
        return np.mean([s.predict_frozen(x) for s in self.items], axis=0)

    def predict_many(self, learner, X):
        return np.mean([s.predict_many(X) for s in self.items], axis=0)


def averager_for(learner, capacity: int = 32):
    return ParamAverage() if learner.averageable else SnapshotAverage(capacity)
