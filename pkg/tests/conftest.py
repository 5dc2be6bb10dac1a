import sys

import numpy as np
import pytest

from streamboost.weak_learners import WeakLearner


class ConstantLearner(WeakLearner):
    """Predicts a fixed vector; updates are counted but ignored."""

    kind = "constant"

    def __init__(self, d, value):
        value = np.atleast_1d(np.asarray(value, dtype=np.float64))
        super().__init__(d, value.shape[0])
        self.value = value
        self.seen = []

    def _predict(self, x):
        return self.value.copy()

    def _update(self, x, target):
        self.seen.append(target.copy())


class FeatureLearner(WeakLearner):
    """Outputs ``x[column] * scale``: lets a test plant any per-sample prediction."""

    kind = "feature"

    def __init__(self, d, column, scale=1.0):
        super().__init__(d, 1)
        self.column = column
        self.scale = scale

    def _predict(self, x):
        return np.array([x[self.column] * self.scale])

    def _update(self, x, target):
        pass


class ExactGradient(WeakLearner):
    """Stage-i learner that outputs the exact square-loss gradient at partial sum i-1.

    Inputs carry the target as their only feature. Assuming every earlier stage
    is exact, partial sum i-1 equals z + (1 - 2 eta)^(i-1) (y0 - z).
    """

    kind = "exact"

    def __init__(self, stage, eta, y0):
        super().__init__(1, 1)
        self.stage, self.eta, self.y0 = stage, eta, y0

    def _predict(self, x):
        z = x[0]
        prev = z + (1 - 2 * self.eta) ** (self.stage - 1) * (self.y0 - z)
        return np.array([2 * (prev - z)])

    def _update(self, x, target):
        pass


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
