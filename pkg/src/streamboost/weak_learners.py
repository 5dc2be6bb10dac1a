"""No-regret online square-loss regressors and edge measurement.

Every learner maps R^d -> R^m and follows a predict-then-update protocol:
``predict(x)`` costs one unit, ``update(x, target)`` costs two. Learners
expose ``snapshot()`` (a frozen copy that predicts without touching the cost
counters) and, when their hypothesis is linear in a parameter array,
``params()`` / ``predict_params(params, x)`` so callers can average
hypotheses exactly by averaging parameters.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .tree import RegressionTree

UPDATE_UNITS = 2

# config name -> internal kind
CONFIG_NAMES = {
    "linear_ogd": "online_linear",
    "linear_ftrl": "ftrl_linear",
    "tree": "buffered_tree",
    "axis": "axis_restricted",
}

SCHEDULE_POWERS = {"sqrt": 0.5, "inv": 1.0, "const": 0.0}


class EdgeUndefined(ValueError):
    """Raised when every target is zero, so the edge has no meaning."""


class WeakLearner:
    kind = "base"

    def __init__(self, d: int, m: int):
        if d < 1 or m < 1:
            raise ValueError("dimensions must be positive")
        self.d = int(d)
        self.m = int(m)
        self.n_predictions = 0
        self.update_units = 0

    @property
    def n_updates(self) -> int:
        return self.update_units // UPDATE_UNITS

    @property
    def cost_units(self) -> int:
        return self.n_predictions + self.update_units

    def _check_x(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.d:
            raise ValueError(f"input has dimension {x.shape[0]}, learner expects {self.d}")
        return x

    def _check_target(self, target):
        target = np.asarray(target, dtype=np.float64).reshape(-1)
        if target.shape[0] != self.m:
            raise ValueError(f"target has dimension {target.shape[0]}, learner expects {self.m}")
        return target

    def predict(self, x) -> np.ndarray:
        x = self._check_x(x)
        self.n_predictions += 1
        return self._predict(x)

    def update(self, x, target):
        x = self._check_x(x)
        target = self._check_target(target)
        self._update(x, target)
        self.update_units += UPDATE_UNITS
        return self

    def snapshot(self) -> "WeakLearner":
        return copy.deepcopy(self)

    def predict_frozen(self, x) -> np.ndarray:
        """Prediction that leaves the cost counters alone."""
        return self._predict(self._check_x(x))

    def predict_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.stack([self._predict(x) for x in X]) if len(X) else np.zeros((0, self.m))

    def run_sequence(self, X, targets) -> np.ndarray:
        """Predict-then-update over a sequence; returns the pre-update predictions."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        targets = np.asarray(targets, dtype=np.float64).reshape(len(X), self.m)
        out = np.empty((len(X), self.m))
        for r in range(len(X)):
            out[r] = self.predict(X[r])
            self.update(X[r], targets[r])
        return out

    averageable = False

    # serialisation hooks
    def hyperparams(self) -> dict:
        return {"d": self.d, "m": self.m}

    def state_arrays(self) -> dict:
        return {"counters": np.array([self.n_predictions, self.update_units], dtype=np.int64)}

    def load_state(self, arrays: dict):
        c = arrays.get("counters")
        if c is not None:
            self.n_predictions, self.update_units = int(c[0]), int(c[1])


# ---------------------------------------------------------------------------


class OnlineLinear(WeakLearner):
    """Projected online gradient descent on ||W [x;1] - y||^2.

    Step size at the t-th update is ``step / t**power`` where the power comes
    from ``schedule`` ("sqrt" -> 1/2, "inv" -> 1 for strongly convex use,
    "const" -> 0). ``radius`` bounds the Frobenius norm of W (None: no bound).
    """

    kind = "online_linear"
    averageable = True

    def __init__(self, d, m, step=0.05, schedule="sqrt", radius=None, intercept=True):
        super().__init__(d, m)
        if schedule not in SCHEDULE_POWERS:
            raise ValueError(f"unknown schedule {schedule!r}")
        if not step >= 0:
            raise ValueError("step must be >= 0")
        self.step = float(step)
        self.schedule = schedule
        self.radius = None if radius is None else float(radius)
        self.intercept = bool(intercept)
        self.W = np.zeros((self.m, self.d + int(self.intercept)))

    @property
    def power(self) -> float:
        return SCHEDULE_POWERS[self.schedule]

    def _xt(self, x):
        return np.append(x, 1.0) if self.intercept else x

    def _predict(self, x):
        return self.W @ self._xt(x)

    def learning_rate(self, t: int) -> float:
        return self.step / t ** self.power

    def _update(self, x, target):
        lr = self.learning_rate(self.n_updates + 1)
        kernels.ogd_square_step(self.W, self._xt(x), target, lr, self.radius or 0.0)

    def params(self):
        return self.W.copy()

    def predict_params(self, params, x):
        return params @ self._xt(self._check_x(x))

    def _design(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.d:
            raise ValueError(f"input has dimension {X.shape[1]}, learner expects {self.d}")
        return np.hstack([X, np.ones((len(X), 1))]) if self.intercept else X

    def predict_params_many(self, params, X):
        return self._design(X) @ params.T

    def predict_many(self, X):
        return self._design(X) @ self.W.T

    def run_sequence(self, X, targets):
        X = self._design(X)
        targets = np.ascontiguousarray(np.asarray(targets, dtype=np.float64).reshape(len(X), self.m))
        out = np.empty((len(X), self.m))
        kernels.ogd_square_pass(X, targets, self.W, float(self.n_updates), self.step, self.power,
                                self.radius or 0.0, out)
        self.n_predictions += len(X)
        self.update_units += UPDATE_UNITS * len(X)
        return out

    def hyperparams(self):
        return {**super().hyperparams(), "step": self.step, "schedule": self.schedule,
                "radius": self.radius, "intercept": self.intercept}

    def state_arrays(self):
        return {**super().state_arrays(), "W": self.W}

    def load_state(self, arrays):
        super().load_state(arrays)
        self.W = np.array(arrays["W"], dtype=np.float64)


class FTRLLinear(WeakLearner):
    """Follow-the-regularised-leader for linear least squares.

    The hypothesis after t updates is the ridge solution
    ``W = (sum y x^T)(reg I + sum x x^T)^-1``; the inverse is kept current
    with rank-one Sherman-Morrison updates.
    """

    kind = "ftrl_linear"
    averageable = True

    def __init__(self, d, m, reg=1.0, intercept=True):
        super().__init__(d, m)
        if not reg > 0:
            raise ValueError("FTRL regularisation must be positive")
        self.reg = float(reg)
        self.intercept = bool(intercept)
        p = self.d + int(self.intercept)
        self.P = np.eye(p) / self.reg
        self.B = np.zeros((self.m, p))
        self.W = np.zeros((self.m, p))

    def _xt(self, x):
        return np.append(x, 1.0) if self.intercept else x

    def _predict(self, x):
        return self.W @ self._xt(x)

    def _update(self, x, target):
        xt = self._xt(x)
        self.B += np.outer(target, xt)
        kernels.sherman_morrison_update(self.P, xt)
        self.W = self.B @ self.P

    def params(self):
        return self.W.copy()

    def predict_params(self, params, x):
        return params @ self._xt(self._check_x(x))

    def _design(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.d:
            raise ValueError(f"input has dimension {X.shape[1]}, learner expects {self.d}")
        return np.hstack([X, np.ones((len(X), 1))]) if self.intercept else X

    def predict_params_many(self, params, X):
        return self._design(X) @ params.T

    def predict_many(self, X):
        return self._design(X) @ self.W.T

    def hyperparams(self):
        return {**super().hyperparams(), "reg": self.reg, "intercept": self.intercept}

    def state_arrays(self):
        return {**super().state_arrays(), "P": self.P, "B": self.B, "W": self.W}

    def load_state(self, arrays):
        super().load_state(arrays)
        self.P = np.array(arrays["P"], dtype=np.float64)
        self.B = np.array(arrays["B"], dtype=np.float64)
        self.W = np.array(arrays["W"], dtype=np.float64)


class BufferedTree(WeakLearner):
    """Regression tree refit every ``refit_every`` updates on a sliding window.

    The window is a ring buffer holding the most recent ``buffer`` (x, target)
    pairs. Before the first refit the tree predicts zero.
    """

    kind = "buffered_tree"

    def __init__(self, d, m, depth=4, buffer=512, refit_every=64, min_leaf=1):
        super().__init__(d, m)
        if buffer < 1 or refit_every < 1:
            raise ValueError("buffer and refit_every must be >= 1")
        self.depth = int(depth)
        self.buffer = int(buffer)
        self.refit_every = int(refit_every)
        self.min_leaf = int(min_leaf)
        self.X = np.zeros((self.buffer, self.d))
        self.Y = np.zeros((self.buffer, self.m))
        self.filled = 0
        self.cursor = 0
        self.tree: Optional[RegressionTree] = None
        self.n_refits = 0

    def _predict(self, x):
        if self.tree is None:
            return np.zeros(self.m)
        return self.tree.predict_one(x).copy()

    def _update(self, x, target):
        self.X[self.cursor] = x
        self.Y[self.cursor] = target
        self.cursor = (self.cursor + 1) % self.buffer
        self.filled = min(self.filled + 1, self.buffer)
        if (self.n_updates + 1) % self.refit_every == 0:
            self.refit()

    def run_sequence(self, X, targets):
        # the tree only changes at refits, so predict each block between refits at once
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        targets = np.asarray(targets, dtype=np.float64).reshape(len(X), self.m)
        out = np.empty((len(X), self.m))
        r = 0
        while r < len(X):
            block = min(len(X) - r, self.refit_every - self.n_updates % self.refit_every)
            out[r:r + block] = self.predict_many(X[r:r + block])
            self.n_predictions += block
            for k in range(r, r + block):
                self.update(X[k], targets[k])
            r += block
        return out

    def refit(self):
        n = self.filled
        self.tree = RegressionTree(self.depth, self.min_leaf).fit(self.X[:n], self.Y[:n])
        self.n_refits += 1

    def snapshot(self):
        # trees are replaced, never mutated, so the buffers need not be copied
        snap = copy.copy(self)
        snap.X = snap.Y = None
        return snap

    def predict_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.tree is None:
            return np.zeros((len(X), self.m))
        return self.tree.predict(X)

    def hyperparams(self):
        return {**super().hyperparams(), "depth": self.depth, "buffer": self.buffer,
                "refit_every": self.refit_every, "min_leaf": self.min_leaf}

    def state_arrays(self):
        out = {**super().state_arrays(),
               "ring": np.array([self.filled, self.cursor, self.n_refits], dtype=np.int64)}
        if self.X is not None:  # frozen snapshots carry no buffer
            out.update(X=self.X, Y=self.Y)
        if self.tree is not None:
            f, thr, lft, rgt, val = self.tree.nodes
            out.update(tree_feature=f, tree_threshold=thr, tree_left=lft, tree_right=rgt,
                       tree_value=val)
        return out

    def load_state(self, arrays):
        super().load_state(arrays)
        if "X" in arrays:
            self.X = np.array(arrays["X"], dtype=np.float64)
            self.Y = np.array(arrays["Y"], dtype=np.float64)
        else:
            self.X = self.Y = None
        self.filled, self.cursor, self.n_refits = (int(v) for v in arrays["ring"])
        if "tree_feature" in arrays:
            self.tree = RegressionTree.from_arrays(
                arrays["tree_feature"], arrays["tree_threshold"], arrays["tree_left"],
                arrays["tree_right"], arrays["tree_value"], self.depth, self.min_leaf)


class AxisRestricted(WeakLearner):
    """Follow-the-leader over constant hypotheses [a, 0] and [0, a].

    ``a`` is confined to ``[-alpha_cap, alpha_cap]``. ``types`` restricts the
    class (``(0,)`` gives only scalings of the first axis). Ties go to the
    lower type index.
    """

    kind = "axis_restricted"

    def __init__(self, d, m=2, alpha_cap=2.0, types=(0, 1), init_type=0, init_alpha=0.0):
        super().__init__(d, m)
        if self.m != 2:
            raise ValueError("axis-restricted learners output R^2")
        self.alpha_cap = float(alpha_cap)
        self.types = tuple(int(k) for k in types)
        if not self.types or any(k not in (0, 1) for k in self.types):
            raise ValueError("types must be a non-empty subset of (0, 1)")
        self.sums = np.zeros(2)
        self.sumsq = np.zeros(2)
        self.count = 0
        self.choice = (int(init_type), float(init_alpha))

    def _predict(self, x):
        out = np.zeros(2)
        k, a = self.choice
        out[k] = a
        return out

    def accumulated_loss(self, k: int, alpha: float) -> float:
        other = 1 - k
        return (alpha * alpha * self.count - 2.0 * alpha * self.sums[k] + self.sumsq[k]
                + self.sumsq[other])

    def leader(self):
        best = None
        for k in self.types:
            a = float(np.clip(self.sums[k] / self.count, -self.alpha_cap, self.alpha_cap))
            loss = self.accumulated_loss(k, a)
            if best is None or loss < best[0]:
                best = (loss, k, a)
        return best[1], best[2]

    def _update(self, x, target):
        self.sums += target
        self.sumsq += target * target
        self.count += 1
        self.choice = self.leader()

    def hyperparams(self):
        return {**super().hyperparams(), "alpha_cap": self.alpha_cap, "types": list(self.types)}

    def state_arrays(self):
        return {**super().state_arrays(), "sums": self.sums, "sumsq": self.sumsq,
                "ftl": np.array([self.count, self.choice[0], self.choice[1]], dtype=np.float64)}

    def load_state(self, arrays):
        super().load_state(arrays)
        self.sums = np.array(arrays["sums"], dtype=np.float64)
        self.sumsq = np.array(arrays["sumsq"], dtype=np.float64)
        count, k, a = arrays["ftl"]
        self.count = int(count)
        self.choice = (int(k), float(a))


def shares_linear_settings(learners) -> bool:
    """True when every learner is online-linear with identical settings and age.

    Such ensembles can run through the compiled streaming loops.
    """
    first = learners[0]
    if type(first) is not OnlineLinear:
        return False
    key = (first.d, first.m, first.step, first.schedule, first.radius, first.intercept,
           first.n_updates)
    return all(type(l) is OnlineLinear and
               (l.d, l.m, l.step, l.schedule, l.radius, l.intercept, l.n_updates) == key
               for l in learners)


LEARNER_CLASSES = {cls.kind: cls for cls in (OnlineLinear, FTRLLinear, BufferedTree, AxisRestricted)}


def make_learner(kind: str, d: int, m: int, **hyper) -> WeakLearner:
    kind = CONFIG_NAMES.get(kind, kind)
    try:
        cls = LEARNER_CLASSES[kind]
    except KeyError:
        raise ValueError(f"unknown learner kind {kind!r}") from None
    return cls(d, m, **hyper)


def learner_from_state(kind: str, hyper: dict, arrays: dict) -> WeakLearner:
    hyper = dict(hyper)
    d, m = hyper.pop("d"), hyper.pop("m")
    if "types" in hyper:
        hyper["types"] = tuple(hyper["types"])
    learner = make_learner(kind, d, m, **hyper)
    learner.load_state(arrays)
    return learner


# ---------------------------------------------------------------------------
# edge measurement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeReport:
    gamma_hat: float
    sum_sq_error: float
    sum_sq_target: float
    T: int
    excess_estimate: float
    gamma_window: float
    sum_cross: float = math.nan  # sum of 2 y_t^T h_t(x_t)
    sum_sq_pred: float = math.nan

    @property
    def holds(self) -> bool:
        """True when the learner beat the zero predictor over the window."""
        return self.gamma_window > 0


def edge_from_terms(sq_err, sq_tgt, sq_pred=None, window_fraction: float = 0.25) -> EdgeReport:
    """Edge statistics from per-step squared error / target / prediction norms.

    ``gamma_window`` is the edge over the trailing ``window_fraction`` of the
    steps; ``excess_estimate`` is the slack ``R`` that makes
    ``SSE <= (1 - gamma_window) * SST + R`` hold with equality (floored at 0).
    """
    sq_err = np.asarray(sq_err, dtype=np.float64)
    sq_tgt = np.asarray(sq_tgt, dtype=np.float64)
    T = sq_err.shape[0]
    if T == 0:
        raise ValueError("edge needs at least one (target, prediction) pair")
    sse = float(sq_err.sum())
    sst = float(sq_tgt.sum())
    if sst <= 0.0:
        raise EdgeUndefined("all targets are zero; the edge is undefined")
    gamma = 1.0 - sse / sst
    w = max(1, int(math.ceil(window_fraction * T)))
    win_t = float(sq_tgt[-w:].sum())
    gamma_w = 1.0 - float(sq_err[-w:].sum()) / win_t if win_t > 0 else gamma
    excess = max(0.0, sse - (1.0 - gamma_w) * sst)
    sum_sq_pred = math.nan
    cross = math.nan
    if sq_pred is not None:
        sum_sq_pred = float(np.sum(sq_pred))
        # ||y - h||^2 = ||y||^2 - 2 y.h + ||h||^2
        cross = sst - sse + sum_sq_pred
    return EdgeReport(gamma, sse, sst, T, excess, gamma_w, cross, sum_sq_pred)


def measure_edge(targets, predictions, window_fraction: float = 0.25) -> EdgeReport:
    """Edge of a prediction sequence against its targets (rows are steps)."""
    Y = np.asarray(targets, dtype=np.float64)
    H = np.asarray(predictions, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if H.ndim == 1:
        H = H[:, None]
    if Y.shape != H.shape:
        raise ValueError(f"targets {Y.shape} and predictions {H.shape} differ in shape")
    if Y.shape[0] == 0:
        raise ValueError("edge needs at least one (target, prediction) pair")
    rep = edge_from_terms(np.sum((Y - H) ** 2, axis=1), np.sum(Y * Y, axis=1),
                          np.sum(H * H, axis=1), window_fraction)
    # exact cross term from the pairs themselves
    return EdgeReport(rep.gamma_hat, rep.sum_sq_error, rep.sum_sq_target, rep.T,
                      rep.excess_estimate, rep.gamma_window, float(np.sum(2.0 * Y * H)),
                      rep.sum_sq_pred)


def edge_existence_check(basis, f_star) -> float:
    """Squared cosine between ``f_star`` and its projection onto span(basis).

    ``basis`` is (K, T, m) (or (T, m) for one function): K hypotheses
    evaluated on T inputs. Inner products are empirical averages over the T
    inputs. The result lower-bounds the achievable edge.
    """
    F = np.asarray(f_star, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    Bs = np.asarray(basis, dtype=np.float64)
    if Bs.ndim == 2:
        Bs = Bs[None]
    if Bs.ndim == 3 and Bs.shape[2:] != F.shape[1:]:
        Bs = Bs.reshape(Bs.shape[0], F.shape[0], F.shape[1])
    f = F.reshape(-1)
    norm_sq = float(f @ f)
    if norm_sq == 0.0:
        raise ValueError("f_star has zero norm")
    A = Bs.reshape(Bs.shape[0], -1).T
    coef, *_ = np.linalg.lstsq(A, f, rcond=None)
    proj = A @ coef
    return float(min(1.0, max(0.0, (proj @ proj) / norm_sq)))
