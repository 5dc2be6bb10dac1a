"""Stage-wise batch gradient boosting baseline with unit-cost accounting.

Stage i trains learner i to convergence on the negative-gradient targets of
the frozen first i-1 learners, sweeping the training set repeatedly. Every
sample visit in stage i costs i-1 units to re-predict the frozen prefix (no
cached predictions), one unit for learner i's prediction and two for its
update, so a stage with T_i visits costs T_i (i + 2) units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError
from .losses import LossSpec
from .weak_learners import WeakLearner


@dataclass
class StageLog:
    passes: int
    samples: int
    pass_losses: list


@dataclass
class BatchGBModel:
    loss: LossSpec
    eta: float
    y0: np.ndarray
    hypotheses: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    cost_units: int = 0
    prediction_units: int = 0

    @property
    def stage_samples(self) -> list[int]:
        return [s.samples for s in self.stages]

    def predict(self, x) -> np.ndarray:
        """``y0 - eta * sum_i h_i(x)``; charges one unit per hypothesis."""
        x = np.asarray(x, dtype=np.float64)
        out = self.y0.copy()
        for h in self.hypotheses:
            out -= self.eta * h.predict_frozen(x)
        self.prediction_units += len(self.hypotheses)
        return out

    def predict_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.tile(self.y0, (len(X), 1))
        for h in self.hypotheses:
            out -= self.eta * h.predict_many(X)
        self.prediction_units += len(self.hypotheses) * len(X)
        return out


def closed_form_cost(stage_samples) -> int:
    """Sum over stages of T_i (i + 2), with stages numbered from 1."""
    return sum(int(T) * (i + 2) for i, T in enumerate(stage_samples, start=1))


def train_batch_gb(X, S, loss: LossSpec, N: int, make_learner: Callable[[], WeakLearner],
                   eta: float, y0=None, tolerance: float = 1e-4, max_passes: int = 50,
                   seed: int = 0, shuffle: bool = True) -> BatchGBModel:
    """Fit N stages; each stage sweeps the data until its pass loss stalls.

    A stage stops after the first pass whose mean square fit loss improves on
    the previous pass (the zero predictor's loss before pass 1) by a relative
    amount below ``tolerance``, or after ``max_passes`` passes.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if max_passes < 1:
        raise ValueError("max_passes must be >= 1")
    X = np.ascontiguousarray(X, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64).reshape(len(X), loss.m)
    if len(X) == 0:
        raise ValueError("empty training set")
    y0 = np.zeros(loss.m) if y0 is None else np.asarray(y0, dtype=np.float64).reshape(loss.m)
    model = BatchGBModel(loss, float(eta), y0)
    rng = np.random.default_rng(seed)
    n = len(X)
    for stage in range(1, N + 1):
        # frozen prefix, recomputed (and charged) on every pass
        prefix = np.tile(y0, (n, 1))
        for h in model.hypotheses:
            prefix -= eta * h.predict_many(X)
        if not np.all(np.isfinite(prefix)):
            raise DivergenceError(f"stage {stage}: non-finite ensemble prediction", stage=stage)
        targets = np.stack([loss.gradient(S[r], prefix[r]) for r in range(n)])
        learner = make_learner()
        previous = float(np.mean(np.sum(targets * targets, axis=1)))
        losses = []
        samples = 0
        for _ in range(max_passes):
            order = rng.permutation(n) if shuffle else np.arange(n)
            preds = learner.run_sequence(X[order], targets[order])
            current = float(np.mean(np.sum((targets[order] - preds) ** 2, axis=1)))
            if not math.isfinite(current):
                raise DivergenceError(f"stage {stage}: non-finite fit loss", stage=stage)
            losses.append(current)
            samples += n
            model.cost_units += n * (stage - 1)
            improvement = (previous - current) / previous if previous > 0 else 0.0
            previous = current
            if improvement < tolerance:
                break
        model.cost_units += learner.cost_units
        model.hypotheses.append(learner.snapshot())
        model.stages.append(StageLog(len(losses), samples, losses))
    return model
