"""Regret, cost and sweep accounting, plus the axis-restricted counterexample."""
from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Dataset
from .losses import LossSpec
from .sgb_nonsmooth import SGBResidual
from .sgb_smooth import SGBSmooth
from .tree import RegressionTree
from .weak_learners import AxisRestricted

CSV_FORMAT = "{:.9g}"


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return CSV_FORMAT.format(float(value))


def write_csv(path_or_buffer, header, rows) -> str:
    """Write rows with 9-significant-digit floats; returns the text written."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if path_or_buffer is not None:
        if hasattr(path_or_buffer, "write"):
            path_or_buffer.write(text)
        else:
            with open(path_or_buffer, "w", newline="") as fh:
                fh.write(text)
    return text


# ---------------------------------------------------------------------------


@dataclass
class RegretRecord:
    """Per-step losses of the learner and of a fixed comparator."""

    learner_loss: np.ndarray
    comparator_loss: np.ndarray

    def __post_init__(self):
        self.learner_loss = np.asarray(self.learner_loss, dtype=np.float64)
        self.comparator_loss = np.asarray(self.comparator_loss, dtype=np.float64)
        if self.learner_loss.shape != self.comparator_loss.shape:
            raise ValueError("learner and comparator loss sequences differ in length")

    @property
    def T(self) -> int:
        return self.learner_loss.shape[0]

    @property
    def cum_learner(self) -> np.ndarray:
        return np.cumsum(self.learner_loss)

    @property
    def cum_comparator(self) -> np.ndarray:
        return np.cumsum(self.comparator_loss)

    @property
    def avg_regret_curve(self) -> np.ndarray:
        t = np.arange(1, self.T + 1)
        return (self.cum_learner - self.cum_comparator) / t

    @property
    def total_regret(self) -> float:
        return float(np.sum(self.learner_loss) - np.sum(self.comparator_loss))

    @property
    def average_regret(self) -> float:
        if self.T == 0:
            raise ValueError("no steps recorded")
        return self.total_regret / self.T

    def at(self, t: int) -> float:
        """Average regret over the first ``t`` steps."""
        if not 1 <= t <= self.T:
            raise ValueError(f"checkpoint {t} outside 1..{self.T}")
        return float(np.sum(self.learner_loss[:t]) - np.sum(self.comparator_loss[:t])) / t


@dataclass
class CostCounter:
    """Unit costs: one per weak-learner prediction, two per update."""

    predictions: int = 0
    update_units: int = 0

    def predict(self, count: int = 1):
        self.predictions += count

    def update(self, count: int = 1):
        self.update_units += 2 * count

    @property
    def total(self) -> int:
        return self.predictions + self.update_units

    @classmethod
    def from_learners(cls, learners) -> "CostCounter":
        return cls(sum(l.n_predictions for l in learners), sum(l.update_units for l in learners))


# ---------------------------------------------------------------------------


@dataclass
class Comparator:
    """Frozen predictor in the loss's output space, used only as a regret baseline."""

    kind: str
    loss: LossSpec
    supervision_fn: object

    def predict(self, X) -> np.ndarray:
        S = np.asarray(self.supervision_fn(np.atleast_2d(X)), dtype=np.float64)
        return self.loss.optimal_predictions(S)

    def losses(self, X, S) -> np.ndarray:
        return self.loss.values(S, self.predict(X))


def _labels_to_supervision(task, labels, k):
    labels = np.asarray(labels)
    if task == "regression":
        return labels.reshape(len(labels), -1).astype(np.float64)
    if task == "binary":
        return labels.astype(np.float64).reshape(-1, 1)
    onehot = np.zeros((len(labels), k))
    onehot[np.arange(len(labels)), labels.astype(np.int64)] = 1.0
    return onehot


def comparator_fit(train: Dataset, kind: str, loss: LossSpec, depth: int = 15,
                   min_leaf: int = 1) -> Comparator:
    """Fit a hindsight comparator on the whole training split.

    ``oracle`` uses the known generating function; ``deep_tree`` a CART tree
    of the given depth and ``best_linear`` least squares, both fit to the
    supervision. Each comparator's supervision estimate is mapped to the
    loss-minimising prediction.
    """
    if kind == "oracle":
        if train.oracle is None:
            raise ValueError("oracle comparator needs a dataset with a known generating function")
        oracle = train.oracle
        fn = lambda X: _labels_to_supervision(train.task, oracle(X), train.num_classes)
    elif kind == "deep_tree":
        tree = RegressionTree(depth, min_leaf).fit(train.features, train.supervision())
        fn = tree.predict
    elif kind == "best_linear":
        A = np.hstack([train.features, np.ones((train.n, 1))])
        coef, *_ = np.linalg.lstsq(A, train.supervision(), rcond=None)
        fn = lambda X: np.hstack([X, np.ones((len(X), 1))]) @ coef
        fn.coef = coef
    else:
        raise ValueError(f"unsupported comparator kind {kind!r}")
    return Comparator(kind, loss, fn)


# ---------------------------------------------------------------------------


def _sweep_one(args):
    from .experiment import run_experiment
    cfg, train, N = args
    return run_experiment(cfg, train, n_learners=N)


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


SWEEP_N_HEADER = ["N", "avg_regret", "gamma_hat", "cost_units"]
SWEEP_T_HEADER = ["t", "avg_regret"]


def sweep_n(dataset: Dataset, config, n_list, T: Optional[int] = None, seed: Optional[int] = None,
            jobs: int = 1):
    """One run per ensemble size; returns (rows, results).

    ``gamma_hat`` lists each learner's measured edge separated by ``;``.
    """
    from dataclasses import replace
    cfg = replace(config, T=config.T if T is None else T, seed=config.seed if seed is None else seed)
    results = _map(_sweep_one, [(cfg, dataset, int(N)) for N in n_list], jobs)
    rows = []
    for N, res in zip(n_list, results):
        gammas = ";".join(fmt(g) for g in res.gammas)
        rows.append([int(N), res.regret.average_regret, gammas, res.cost_units])
    return rows, results


def sweep_t(dataset: Dataset, config, N: int, checkpoints, seed: Optional[int] = None):
    """One run; average regret logged at each checkpoint."""
    from dataclasses import replace
    from .experiment import run_experiment
    T = max(checkpoints)
    cfg = replace(config, T=T, seed=config.seed if seed is None else seed)
    res = run_experiment(cfg, dataset, n_learners=N)
    if res.regret.T < T:
        raise ValueError(f"stream has only {res.regret.T} steps, checkpoint {T} requested")
    return [[int(t), res.regret.at(int(t))] for t in checkpoints], res


# ---------------------------------------------------------------------------


@dataclass
class CounterexampleResult:
    preds: np.ndarray  # (T, 2) emitted predictions
    partials: np.ndarray  # (T, N+1, 2)
    targets: np.ndarray  # (T, N, 2) what each learner was asked to fit
    choices: np.ndarray  # (T, N, 2) (type, alpha) used at each step
    losses: np.ndarray  # (T,)
    total_regret: float

    @property
    def average_regret(self) -> float:
        return self.total_regret / len(self.losses)


def counterexample_run(T: int, N: int, y0=(1.0, 1.0), eta: float = 0.025, alpha_cap: float = 2.0,
                       algorithm: str = "smooth", lambda_sc: float = 1.0,
                       radius: Optional[float] = None) -> CounterexampleResult:
    """Boost FTL learners over {[a, 0], [0, a]} on the loss 2|y1| + |y2|.

    Every step sees the same loss, so the comparator (the constant 0) has
    zero loss and the total regret is the learner's cumulative loss.
    ``algorithm="residual"`` runs the residual-projection booster instead
    (with an imposed ``lambda_sc``, since this loss is not strongly convex).
    """
    y0 = np.asarray(y0, dtype=np.float64)
    if np.any(y0 < 0):
        raise ValueError("counterexample needs y0 with non-negative coordinates")
    loss = LossSpec("axis_l1", m=2)
    learners = [AxisRestricted(1, 2, alpha_cap=alpha_cap) for _ in range(N)]
    if algorithm == "smooth":
        model = SGBSmooth(learners, eta, loss, y0=y0, allow_nonsmooth=True)
    elif algorithm == "residual":
        r = radius if radius is not None else 2.0 * max(float(np.linalg.norm(y0)), 1.0)
        model = SGBResidual(learners, loss, r, y0=y0, lambda_sc=lambda_sc)
    else:
        raise ValueError("algorithm must be smooth or residual")
    x = np.zeros(1)
    s = np.zeros(2)
    preds = np.empty((T, 2))
    partials = np.empty((T, N + 1, 2))
    targets = np.empty((T, N, 2))
    choices = np.empty((T, N, 2))
    losses = np.empty(T)
    for t in range(T):
        for i, l in enumerate(learners):
            choices[t, i] = l.choice
        if algorithm == "smooth":
            partial, _ = model._forward(x, lambda i, x: learners[i].predict_frozen(x))
            partials[t] = partial
            for i in range(N):
                targets[t, i] = loss.gradient(s, partial[i])
            preds[t] = model._step(x, loss, s)[0]
        else:
            partial, H, _ = model._forward(x, lambda i, x: learners[i].predict_frozen(x))
            partials[t] = partial
            resid = np.zeros(2)
            for i in range(N):
                targets[t, i] = resid + loss.gradient(s, partial[i])
                resid = targets[t, i] - H[i]
            preds[t] = model._step(x, loss, s)[0]
        losses[t] = loss.value(s, preds[t])
    return CounterexampleResult(preds, partials, targets, choices, losses, float(losses.sum()))
