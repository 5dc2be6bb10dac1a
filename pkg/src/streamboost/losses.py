"""Strongly convex loss families evaluated on a prediction ``y`` in R^m.

Every kind carries an optional L2 term ``reg_lambda * ||y||^2``. Supervision
is a float vector of the prediction's dimension: regression target ``z``,
a single +-1 label ``u`` for the binary losses, or a one-hot row for
multiclass cross-entropy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels

KINDS = ("square", "l1", "logistic_l2", "hinge_l2", "multiclass_ce")
SMOOTH_KINDS = ("square", "logistic_l2", "multiclass_ce")

# Softmax Hessian spectral bound: diag(p) - p p^T has eigenvalues <= 1/2.
MULTICLASS_SMOOTHNESS = 0.5


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class LossSpec:
    kind: str
    reg_lambda: float = 0.0
    m: int = 1
    domain_bound: Optional[float] = None
    target_bound: Optional[float] = None

    def __post_init__(self):
        if self.kind not in kernels.LOSS_CODES:
            raise LossError(f"unknown loss kind {self.kind!r}")
        if self.reg_lambda < 0:
            raise LossError("reg_lambda must be >= 0")
        if self.kind in ("logistic_l2", "hinge_l2") and self.m != 1:
            raise LossError(f"{self.kind} is a scalar loss (m=1)")
        if self.kind == "axis_l1" and self.m != 2:
            raise LossError("axis_l1 needs m=2")
        if self.domain_bound is not None and not self.domain_bound > 0:
            raise LossError("domain_bound must be positive")

    @property
    def code(self) -> int:
        return kernels.LOSS_CODES[self.kind]

    @property
    def smooth(self) -> bool:
        return self.kind in SMOOTH_KINDS

    def at(self, supervision) -> "LossAtSample":
        return LossAtSample(self, supervision)

    # ------------------------------------------------------------------
    def _check(self, y, s):
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        s = np.asarray(s, dtype=np.float64).reshape(-1)
        if y.shape[0] != self.m:
            raise LossError(f"prediction has dimension {y.shape[0]}, loss expects {self.m}")
        if s.shape[0] != self.m:
            raise LossError(f"supervision has dimension {s.shape[0]}, loss expects {self.m}")
        return y, s

    def value(self, supervision, y) -> float:
        y, s = self._check(y, supervision)
        return float(kernels.loss_value(self.code, y, s, float(self.reg_lambda)))

    def gradient(self, supervision, y) -> np.ndarray:
        y, s = self._check(y, supervision)
        out = np.empty(self.m)
        kernels.loss_grad(self.code, y, s, float(self.reg_lambda), out)
        return out

    def values(self, S, Y) -> np.ndarray:
        """Row-wise losses for supervision ``S`` and predictions ``Y`` (both (n, m))."""
        S = np.ascontiguousarray(S, dtype=np.float64)
        Y = np.ascontiguousarray(Y, dtype=np.float64)
        if S.shape != Y.shape or S.shape[1] != self.m:
            raise LossError(f"shape mismatch {S.shape} vs {Y.shape} (m={self.m})")
        return kernels.loss_values(self.code, Y, S, float(self.reg_lambda))

    # ------------------------------------------------------------------
    def convexity_constants(self) -> tuple[float, Optional[float]]:
        """(strong convexity, smoothness); smoothness is None for non-smooth kinds."""
        r2 = 2.0 * self.reg_lambda
        if self.kind == "square":
            return 2.0 + r2, 2.0 + r2
        if self.kind == "logistic_l2":
            if self.domain_bound is None:
                raise LossError("logistic_l2 needs domain_bound for its strong convexity constant")
            return r2 + 1.0 / (2.0 + 2.0 * math.exp(self.domain_bound)), r2 + 0.25
        if self.kind == "multiclass_ce":
            return r2, MULTICLASS_SMOOTHNESS + r2
        return r2, None

    @property
    def lambda_sc(self) -> float:
        return self.convexity_constants()[0]

    @property
    def beta_sm(self) -> float:
        beta = self.convexity_constants()[1]
        if beta is None:
            raise LossError(f"{self.kind} is not smooth; it has no smoothness constant")
        return beta

    def bound_constants(self, domain_bound: Optional[float] = None) -> tuple[float, float]:
        """Loss bound B and gradient bound G on the ball ``||y|| <= Y``.

        square      B = (Y+Z)^2,          G = 2(Y+Z)
        l1          B = sqrt(m)(Y+Z),     G = sqrt(m)
        logistic    B = ln(1+e^Y),        G = 1
        hinge       B = 1+Y,              G = 1
        multiclass  B = ln k + sqrt(2)Y,  G = sqrt(2)
        axis_l1     B = 2Y,               G = sqrt(5)
        plus reg*Y^2 in B and 2*reg*Y in G. Z bounds ||z|| (``target_bound``).
        """
        Y = self.domain_bound if domain_bound is None else domain_bound
        if Y is None or not Y > 0 or not math.isfinite(Y):
            raise LossError("bound constants need a finite positive domain bound")
        reg_b = self.reg_lambda * Y * Y
        reg_g = 2.0 * self.reg_lambda * Y
        root_m = math.sqrt(self.m)
        if self.kind in ("square", "l1"):
            if self.target_bound is None:
                raise LossError(f"{self.kind} bounds need target_bound")
            Z = self.target_bound
            if self.kind == "square":
                return (Y + Z) ** 2 + reg_b, 2.0 * (Y + Z) + reg_g
            return root_m * (Y + Z) + reg_b, root_m + reg_g
        if self.kind == "logistic_l2":
            return math.log1p(math.exp(Y)) + reg_b, 1.0 + reg_g
        if self.kind == "hinge_l2":
            return 1.0 + Y + reg_b, 1.0 + reg_g
        if self.kind == "multiclass_ce":
            return math.log(self.m) + math.sqrt(2.0) * Y + reg_b, math.sqrt(2.0) + reg_g
        return 2.0 * Y + reg_b, math.sqrt(5.0) + reg_g

    # ------------------------------------------------------------------
    def optimal_predictions(self, S) -> np.ndarray:
        """Row-wise minimiser of the loss inside the domain ball.

        Used as the comparator output when the supervision is a known
        function of the input. Exact for scalar outputs; for the multiclass
        loss the search runs along the symmetric direction ``u - 1/k``, which
        contains the unconstrained minimiser.
        """
        S = np.atleast_2d(np.asarray(S, dtype=np.float64))
        Y = self.domain_bound if self.domain_bound is not None else np.inf
        if self.kind == "square":
            return _project_rows(S, Y)
        if self.kind == "l1":
            out = S.copy()
            if self.reg_lambda > 0:
                cap = 1.0 / (2.0 * self.reg_lambda)
                out = np.clip(out, -cap, cap)
            return _project_rows(out, Y)
        if self.kind == "axis_l1":
            return np.zeros_like(S)
        out = np.empty_like(S)
        uniq, inverse = np.unique(S, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        for r, s in enumerate(uniq):
            out[inverse == r] = self._optimal_single(s, Y)
        return out

    def _optimal_single(self, s, Y):
        if self.kind in ("logistic_l2", "hinge_l2"):
            hi = Y if math.isfinite(Y) else 1e3
            if self.kind == "hinge_l2":
                # piecewise: minimum at u * min(1, 1/(2 reg)) clipped to the domain
                best = 1.0 if self.reg_lambda == 0 else min(1.0, 1.0 / (2.0 * self.reg_lambda))
                return np.array([s[0] * min(best, hi)])
            res = minimize_scalar(lambda v: self.value(s, [v]), bounds=(-hi, hi),
                                  method="bounded", options={"xatol": 1e-12})
            return np.array([res.x])
        direction = s - s.sum() / self.m
        norm = np.linalg.norm(direction)
        if norm == 0:
            return np.zeros(self.m)
        hi = (Y if math.isfinite(Y) else 1e3) / norm
        res = minimize_scalar(lambda a: self.value(s, a * direction), bounds=(0.0, hi),
                              method="bounded", options={"xatol": 1e-12})
        return res.x * direction


def _project_rows(A, radius):
    if not math.isfinite(radius):
        return A.copy()
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    scale = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
    return A * scale


@dataclass(frozen=True)
class LossAtSample:
    """A loss with its supervision fixed: a function of the prediction only."""

    spec: LossSpec
    supervision: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.supervision, dtype=np.float64).reshape(-1)
        if s.shape[0] != self.spec.m:
            raise LossError(f"supervision has dimension {s.shape[0]}, loss expects {self.spec.m}")
        object.__setattr__(self, "supervision", s)

    def value(self, y) -> float:
        return self.spec.value(self.supervision, y)

    def gradient(self, y) -> np.ndarray:
        return self.spec.gradient(self.supervision, y)


def value(loss: LossAtSample, y) -> float:
    return loss.value(y)


def gradient(loss: LossAtSample, y) -> np.ndarray:
    return loss.gradient(y)


def convexity_constants(spec: LossSpec):
    return spec.convexity_constants()


def bound_constants(spec: LossSpec, domain_bound: Optional[float] = None):
    return spec.bound_constants(domain_bound)


def loss_for_data(kind: str, S: np.ndarray, reg_lambda: float = 0.0,
                  domain_bound: Optional[float] = None) -> LossSpec:
    """Build a :class:`LossSpec` sized for supervision ``S`` (n, m).

    The domain bound defaults to twice the largest supervision norm and the
    target bound to the largest supervision norm.
    """
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    biggest = float(np.max(np.linalg.norm(S, axis=1))) if S.size else 1.0
    if domain_bound is None:
        domain_bound = 2.0 * biggest if biggest > 0 else 1.0
    return LossSpec(kind, reg_lambda=reg_lambda, m=S.shape[1], domain_bound=float(domain_bound),
                    target_bound=biggest)
