"""Per-step records produced by the streaming boosters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .weak_learners import EdgeReport, edge_from_terms


@dataclass
class StreamTrace:
    """Arrays indexed by step (rows) and learner / partial-sum stage (columns).

    ``stage_loss[t, i]`` is the loss of partial sum i (0 = initial prediction).
    ``pred_loss[t]`` is the loss of the prediction actually emitted. The
    ``sq_*`` arrays hold, per learner, squared norms of the fit error, the
    target and the learner's output; the residual booster also records the
    residual and the raw subgradient.
    """

    stage_loss: np.ndarray
    pred_loss: np.ndarray
    preds: np.ndarray
    sq_err: np.ndarray
    sq_tgt: np.ndarray
    sq_pred: np.ndarray
    sq_resid: Optional[np.ndarray] = None
    sq_grad: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, T, N, m, residual=False):
        z = lambda *shape: np.zeros(shape)
        return cls(z(T, N + 1), z(T), z(T, m), z(T, N), z(T, N), z(T, N),
                   z(T, N) if residual else None, z(T, N) if residual else None)

    @property
    def T(self) -> int:
        return self.pred_loss.shape[0]

    @property
    def n_learners(self) -> int:
        return self.sq_err.shape[1]

    def head(self, T: int) -> "StreamTrace":
        fields = {k: (None if v is None else v[:T]) for k, v in self.__dict__.items()}
        return StreamTrace(**fields)

    @staticmethod
    def concat(traces) -> "StreamTrace":
        traces = list(traces)
        out = {}
        for k in traces[0].__dict__:
            parts = [getattr(t, k) for t in traces]
            out[k] = None if parts[0] is None else np.concatenate(parts)
        return StreamTrace(**out)

    def edge_reports(self, window_fraction: float = 0.25) -> list[EdgeReport]:
        return [edge_from_terms(self.sq_err[:, i], self.sq_tgt[:, i], self.sq_pred[:, i],
                                window_fraction) for i in range(self.n_learners)]
