"""Streaming gradient boosting for strongly convex, smooth losses.

Each step runs a forward pass through N weak learners, building partial sums
``y^i = y^{i-1} - eta * h_i(x)``. Learner i is then trained (square loss) to
predict the loss gradient at partial sum i-1. Because every target comes from
the forward pass, the N updates are independent of one another.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .averaging import averager_for
from .errors import DivergenceError
from .losses import LossAtSample, LossSpec
from .trace import StreamTrace
from .weak_learners import WeakLearner, shares_linear_settings, edge_from_terms

DIVERGENCE_GUARD = 1e6


def default_eta(gamma: float, beta_sm: float) -> float:
    """Step size gamma / (beta (8 - 4 gamma))."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if not beta_sm > 0:
        raise ValueError("beta_sm must be positive")
    return gamma / (beta_sm * (8.0 - 4.0 * gamma))


def stage_contraction(eta: float, gamma: float, lambda_sc: float, beta_sm: float) -> float:
    """Per-learner factor 1 - eta gamma lambda + beta eta^2 lambda (4 - 2 gamma)."""
    return 1.0 - eta * gamma * lambda_sc + beta_sm * eta * eta * lambda_sc * (4.0 - 2.0 * gamma)


def smooth_contraction(gamma: float, lambda_sc: float, beta_sm: float) -> float:
    """The per-learner factor at the default step size: 1 - gamma^2 lambda / (beta (16 - 8 gamma))."""
    return 1.0 - gamma * gamma * lambda_sc / (beta_sm * (16.0 - 8.0 * gamma))


def smooth_bound(B: float, gamma: float, lambda_sc: float, beta_sm: float, N: int) -> float:
    """Asymptotic average-regret bound 2B (1 - gamma^2 lambda / (16 beta))^N."""
    if N < 0:
        raise ValueError("N must be >= 0")
    return 2.0 * B * (1.0 - gamma * gamma * lambda_sc / (16.0 * beta_sm)) ** N


def estimate_gamma(make_learner, X, S, loss: LossSpec, y0=None, warmup: int = 500,
                   window_fraction: float = 0.25, floor: float = 0.01) -> float:
    """Edge of a throwaway first-stage learner over the first ``warmup`` rows.

    The first learner's targets are gradients at ``y0`` whatever the step size,
    so this is available before eta is chosen. Clipped to ``[floor, 1]``.
    """
    X = np.asarray(X, dtype=np.float64)[:warmup]
    S = np.asarray(S, dtype=np.float64)[:warmup]
    y0 = np.zeros(loss.m) if y0 is None else np.asarray(y0, dtype=np.float64)
    targets = np.stack([loss.gradient(s, y0) for s in S])
    preds = make_learner().run_sequence(X, targets)
    rep = edge_from_terms(np.sum((targets - preds) ** 2, axis=1), np.sum(targets ** 2, axis=1),
                          window_fraction=window_fraction)
    return float(min(1.0, max(floor, rep.gamma_window)))


class SGBSmooth:
    """Ensemble of N weak learners combined with a fixed step size ``eta``."""

    def __init__(self, learners: Sequence[WeakLearner], eta: float, loss: LossSpec,
                 y0=None, snapshots: int = 32, guard: float = DIVERGENCE_GUARD,
                 allow_nonsmooth: bool = False):
        if len(learners) < 1:
            raise ValueError("need at least one weak learner")
        if eta < 0 or not math.isfinite(eta):
            raise ValueError("eta must be finite and >= 0")
        if not (loss.smooth or allow_nonsmooth):
            raise ValueError(f"{loss.kind} is non-smooth; use the residual-projection booster")
        self.learners = list(learners)
        self.eta = float(eta)
        self.loss = loss
        self.m = loss.m
        self.y0 = np.zeros(self.m) if y0 is None else np.asarray(y0, dtype=np.float64).reshape(self.m)
        self.guard = float(guard)
        self.averages = [averager_for(l, snapshots) for l in self.learners]
        self.t = 0

    @property
    def N(self) -> int:
        return len(self.learners)

    @property
    def cost_units(self) -> int:
        return sum(l.cost_units for l in self.learners)

    # ------------------------------------------------------------------
    def _forward(self, x, hyp):
        partial = np.empty((self.N + 1, self.m))
        H = np.empty((self.N, self.m))
        partial[0] = self.y0
        for i in range(self.N):
            H[i] = hyp(i, x)
            partial[i + 1] = partial[i] - self.eta * H[i]
            norm = float(np.linalg.norm(partial[i + 1]))
            if not norm <= self.guard:
                raise DivergenceError(
                    f"partial sum {i + 1} has norm {norm:.3g} at step {self.t} "
                    f"(guard {self.guard:g}); lower eta or the learner step size",
                    step=self.t, stage=i + 1, value=norm)
        return partial, H

    def _step(self, x, spec: LossSpec, s):
        partial, H = self._forward(x, lambda i, x: self.learners[i].predict(x))
        stage_loss = np.array([spec.value(s, p) for p in partial])
        stats = np.empty((3, self.N))
        for i, learner in enumerate(self.learners):
            g = spec.gradient(s, partial[i])
            err = H[i] - g
            stats[:, i] = err @ err, g @ g, H[i] @ H[i]
            self.averages[i].record(learner)
            learner.update(x, g)
        self.t += 1
        return partial[self.N].copy(), stage_loss, stats

    def step(self, x, loss_t: LossAtSample) -> np.ndarray:
        """One prequential step; returns the prediction made before any update."""
        return self._step(np.asarray(x, dtype=np.float64), loss_t.spec, loss_t.supervision)[0]

    def fit_stream(self, X, S, fused: Optional[bool] = None) -> StreamTrace:
        """Run :meth:`step` over rows of ``X`` with supervision rows ``S``.

        Uses the compiled loop when every learner is online-linear with shared
        settings (``fused=None``); both paths give the same numbers.
        """
        X = np.ascontiguousarray(X, dtype=np.float64)
        S = np.ascontiguousarray(np.asarray(S, dtype=np.float64).reshape(len(X), self.m))
        T = len(X)
        trace = StreamTrace.empty(T, self.N, self.m)
        if fused is None:
            fused = shares_linear_settings(self.learners)
        if fused:
            self._fit_fused(X, S, trace)
            return trace
        for t in range(T):
            y, stage_loss, stats = self._step(X[t], self.loss, S[t])
            trace.preds[t] = y
            trace.stage_loss[t] = stage_loss
            trace.sq_err[t], trace.sq_tgt[t], trace.sq_pred[t] = stats
        trace.pred_loss[:] = trace.stage_loss[:, self.N]
        return trace

    def _fit_fused(self, X, S, trace):
        first = self.learners[0]
        W = np.ascontiguousarray(np.stack([l.W for l in self.learners]))
        Wsum = np.zeros_like(W)
        bad = kernels.sgb_smooth_linear_pass(
            X, S, self.loss.code, float(self.loss.reg_lambda), W, Wsum, float(first.n_updates),
            self.eta, self.y0, first.step, first.power, first.radius or 0.0, self.guard,
            trace.stage_loss, trace.preds, trace.sq_err, trace.sq_tgt, trace.sq_pred)
        done = len(X) if bad == kernels.DIVERGED_NONE else bad
        for i, learner in enumerate(self.learners):
            learner.W = W[i].copy()
            learner.n_predictions += done
            learner.update_units += 2 * done
            if done:
                self.averages[i].add_sum(Wsum[i], done)
        self.t += done
        if bad != kernels.DIVERGED_NONE:
            # replay the offending step for the diagnostic
            self._forward(X[bad], lambda i, x: self.learners[i].predict_frozen(x))
            raise DivergenceError(f"non-finite partial sum at step {self.t}", step=self.t)
        trace.pred_loss[:] = trace.stage_loss[:, self.N]

    # ------------------------------------------------------------------
    def predict_online(self, x) -> np.ndarray:
        """``y0 - eta * sum_i h_i(x)`` with the current hypotheses."""
        return self._forward(np.asarray(x, dtype=np.float64),
                             lambda i, x: self.learners[i].predict_frozen(x))[0][self.N]

    def predict_average(self, x) -> np.ndarray:
        """``y0 - eta * sum_i hbar_i(x)`` with time-averaged hypotheses."""
        self._require_steps()
        x = np.asarray(x, dtype=np.float64)
        total = sum(a.predict(l, x) for a, l in zip(self.averages, self.learners))
        return self.y0 - self.eta * total

    def predict_online_many(self, X) -> np.ndarray:
        total = sum(l.predict_many(X) for l in self.learners)
        return self.y0 - self.eta * total

    def predict_average_many(self, X) -> np.ndarray:
        self._require_steps()
        total = sum(a.predict_many(l, X) for a, l in zip(self.averages, self.learners))
        return self.y0 - self.eta * total

    def _require_steps(self):
        if self.t == 0:
            raise RuntimeError("the averaged predictor needs at least one step")


def prediction_energy_terms(trace: StreamTrace, window_fraction: float = 0.25):
    """Per learner: (sum ||h||^2, (4 - 2 gamma) sum ||grad||^2 + 2 R) with measured gamma, R."""
    out = []
    for rep in trace.edge_reports(window_fraction):
        lhs = rep.sum_sq_pred
        rhs = (4.0 - 2.0 * rep.gamma_window) * rep.sum_sq_target + 2.0 * rep.excess_estimate
        out.append((lhs, rhs))
    return out
