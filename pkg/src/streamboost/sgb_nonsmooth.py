"""Residual-projection streaming boosting for strongly convex, non-smooth losses.

Partial sums take shrinking steps ``eta_i = 1 / (lambda i)`` and are projected
back onto an L2 ball after every step. Learner i is trained toward the
subgradient at partial sum i-1 plus the residual its predecessors failed to
fit, and passes its own fit error on as the next residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .averaging import ThinnedSnapshots
from .errors import DivergenceError
from .losses import LossAtSample, LossSpec
from .trace import StreamTrace
from .weak_learners import WeakLearner, shares_linear_settings

AVG_DENOMINATORS = ("n", "n_plus_1")


def project(y, radius: float) -> np.ndarray:
    """Euclidean projection onto the ball of the given radius."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    return kernels.project_ball(y, float(radius), np.empty_like(y))


def c_constant(gamma: float, R_T: float, T: int, G: float) -> tuple[float, float]:
    """Residual growth constant and its cap ``2/gamma - 1``.

    c = (1 - gamma + sqrt(1 - gamma (1 - R_T / (T G^2)))) / gamma
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if not G > 0 or T < 1 or R_T < 0:
        raise ValueError("need G > 0, T >= 1 and R_T >= 0")
    ratio = R_T / (T * G * G)
    if ratio > 1.0:
        raise ValueError(f"R_T / (T G^2) = {ratio:.6g} exceeds 1")
    inner = 1.0 - gamma * (1.0 - ratio)
    if inner < 0:
        raise ValueError("negative square-root argument")
    return (1.0 - gamma + math.sqrt(inner)) / gamma, 2.0 / gamma - 1.0


def nonsmooth_bound(c: float, G: float, lambda_sc: float, N: int) -> float:
    """Average-regret bound 4 c^2 G^2 / (lambda N) * (1 + ln N + 1 / (8N))."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return 4.0 * c * c * G * G / (lambda_sc * N) * (1.0 + math.log(N) + 1.0 / (8.0 * N))


@dataclass
class ResidualStats:
    sum_sq_resid: np.ndarray
    sum_sq_pred: np.ndarray
    T: int = 0

    @classmethod
    def zeros(cls, N):
        return cls(np.zeros(N), np.zeros(N), 0)

    def add(self, sq_resid, sq_pred):
        sq_resid = np.atleast_2d(sq_resid)
        self.sum_sq_resid += sq_resid.sum(axis=0)
        self.sum_sq_pred += np.atleast_2d(sq_pred).sum(axis=0)
        self.T += sq_resid.shape[0]


class SGBResidual:
    """Projected ensemble with per-learner step sizes ``1 / (lambda i)``.

    The emitted prediction averages the N+1 projected partial sums and by
    default divides by N (``avg_denominator="n"``); ``"n_plus_1"`` gives the
    plain mean. ``snapshots > 0`` keeps that many thinned ensemble copies for
    :meth:`predict_test_full`.
    """

    def __init__(self, learners: Sequence[WeakLearner], loss: LossSpec, radius: float,
                 y0=None, lambda_sc: Optional[float] = None, avg_denominator: str = "n",
                 snapshots: int = 0):
        if len(learners) < 1:
            raise ValueError("need at least one weak learner")
        lam = loss.lambda_sc if lambda_sc is None else float(lambda_sc)
        if not lam > 0:
            raise ValueError(f"{loss.kind} with reg_lambda={loss.reg_lambda} is not strongly convex; "
                             "residual projection needs lambda_sc > 0")
        if not (radius > 0 and math.isfinite(radius)):
            raise ValueError("projection radius must be finite and positive")
        if avg_denominator not in AVG_DENOMINATORS:
            raise ValueError(f"avg_denominator must be one of {AVG_DENOMINATORS}")
        self.learners = list(learners)
        self.loss = loss
        self.m = loss.m
        self.lambda_sc = lam
        self.radius = float(radius)
        self.y0 = np.zeros(self.m) if y0 is None else np.asarray(y0, dtype=np.float64).reshape(self.m)
        self.avg_denominator = avg_denominator
        self.etas = 1.0 / (lam * np.arange(1, self.N + 1))
        self.snapshot_store = ThinnedSnapshots(snapshots) if snapshots > 0 else None
        self.stats = ResidualStats.zeros(self.N)
        self.t = 0

    @property
    def N(self) -> int:
        return len(self.learners)

    @property
    def denominator(self) -> float:
        return float(self.N if self.avg_denominator == "n" else self.N + 1)

    @property
    def cost_units(self) -> int:
        return sum(l.cost_units for l in self.learners)

    # ------------------------------------------------------------------
    def _forward(self, x, hyp):
        partial = np.empty((self.N + 1, self.m))
        H = np.empty((self.N, self.m))
        kernels.project_ball(self.y0, self.radius, partial[0])
        for i in range(self.N):
            H[i] = hyp(i, x)
            kernels.project_ball(partial[i] - self.etas[i] * H[i], self.radius, partial[i + 1])
        y = partial.sum(axis=0) / self.denominator
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite prediction at step {self.t}", step=self.t)
        return partial, H, y

    def _snapshot(self):
        return [l.snapshot() for l in self.learners]

    def _step(self, x, spec: LossSpec, s):
        partial, H, y = self._forward(x, lambda i, x: self.learners[i].predict(x))
        if self.snapshot_store is not None:
            self.snapshot_store.offer(self._snapshot)
        stage_loss = np.array([spec.value(s, p) for p in partial])
        stats = np.empty((5, self.N))
        resid = np.zeros(self.m)
        targets = np.empty((self.N, self.m))
        for i in range(self.N):
            g = spec.gradient(s, partial[i])
            targets[i] = resid + g
            err = H[i] - targets[i]
            resid = targets[i] - H[i]
            stats[:, i] = err @ err, targets[i] @ targets[i], H[i] @ H[i], resid @ resid, g @ g
        # targets depend only on the forward pass, so updates can follow in any order
        for i, learner in enumerate(self.learners):
            learner.update(x, targets[i])
        self.stats.add(stats[3], stats[2])
        self.t += 1
        return y, spec.value(s, y), stage_loss, stats

    def step(self, x, loss_t: LossAtSample) -> np.ndarray:
        """One prequential step; returns the prediction made before any update."""
        return self._step(np.asarray(x, dtype=np.float64), loss_t.spec, loss_t.supervision)[0]

    def fit_stream(self, X, S, fused: Optional[bool] = None) -> StreamTrace:
        X = np.ascontiguousarray(X, dtype=np.float64)
        S = np.ascontiguousarray(np.asarray(S, dtype=np.float64).reshape(len(X), self.m))
        T = len(X)
        trace = StreamTrace.empty(T, self.N, self.m, residual=True)
        if fused is None:
            fused = shares_linear_settings(self.learners) and self.snapshot_store is None
        if fused:
            self._fit_fused(X, S, trace)
            return trace
        for t in range(T):
            y, loss, stage_loss, stats = self._step(X[t], self.loss, S[t])
            trace.preds[t] = y
            trace.pred_loss[t] = loss
            trace.stage_loss[t] = stage_loss
            (trace.sq_err[t], trace.sq_tgt[t], trace.sq_pred[t], trace.sq_resid[t],
             trace.sq_grad[t]) = stats
        return trace

    def _fit_fused(self, X, S, trace):
        first = self.learners[0]
        W = np.ascontiguousarray(np.stack([l.W for l in self.learners]))
        bad = kernels.sgb_residual_linear_pass(
            X, S, self.loss.code, float(self.loss.reg_lambda), W, float(first.n_updates),
            self.etas, self.y0, self.radius, self.denominator, first.step, first.power,
            first.radius or 0.0, trace.pred_loss, trace.stage_loss, trace.preds,
            trace.sq_err, trace.sq_tgt, trace.sq_pred, trace.sq_resid, trace.sq_grad)
        done = len(X) if bad == kernels.DIVERGED_NONE else bad
        for i, learner in enumerate(self.learners):
            learner.W = W[i].copy()
            learner.n_predictions += done
            learner.update_units += 2 * done
        self.stats.add(trace.sq_resid[:done], trace.sq_pred[:done])
        self.t += done
        if bad != kernels.DIVERGED_NONE:
            raise DivergenceError(f"non-finite prediction at step {self.t}", step=self.t)

    # ------------------------------------------------------------------
    def predict_test_final(self, x) -> np.ndarray:
        """One projected forward pass with the final hypotheses."""
        return self._forward(np.asarray(x, dtype=np.float64),
                             lambda i, x: self.learners[i].predict_frozen(x))[2]

    def predict_test_full(self, x) -> np.ndarray:
        """Mean over stored snapshots of the projected forward-pass prediction."""
        store = self.snapshot_store
        if store is None or len(store) == 0:
            raise RuntimeError("no snapshots stored; construct the model with snapshots > 0")
        x = np.asarray(x, dtype=np.float64)
        outs = [self._forward(x, lambda i, x, snap=snap: snap[i].predict_frozen(x))[2]
                for snap in store.items]
        return np.mean(outs, axis=0)

    def _forward_many(self, X, outputs):
        n = len(X)
        partial = np.empty((n, self.m))
        partial[:] = project(self.y0, self.radius)
        total = partial.copy()
        for i in range(self.N):
            partial = partial - self.etas[i] * outputs[i]
            norms = np.linalg.norm(partial, axis=1, keepdims=True)
            partial = partial * np.where(norms > self.radius,
                                         self.radius / np.maximum(norms, 1e-300), 1.0)
            total += partial
        return total / self.denominator

    def predict_test_final_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self._forward_many(X, [l.predict_many(X) for l in self.learners])

    def predict_test_full_many(self, X) -> np.ndarray:
        store = self.snapshot_store
        if store is None or len(store) == 0:
            raise RuntimeError("no snapshots stored; construct the model with snapshots > 0")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.mean([self._forward_many(X, [l.predict_many(X) for l in snap])
                        for snap in store.items], axis=0)


def residual_energy_terms(trace: StreamTrace, c: float, G: float):
    """Per learner: (sum ||residual||^2, c^2 G^2 T, sum ||h||^2, 4 c^2 G^2 T)."""
    T = trace.T
    cap = c * c * G * G * T
    return [(float(trace.sq_resid[:, i].sum()), cap, float(trace.sq_pred[:, i].sum()), 4.0 * cap)
            for i in range(trace.n_learners)]
