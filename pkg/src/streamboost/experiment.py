"""Glue between a :class:`RunConfig`, the data and the three algorithms."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dataset as ds
from . import synthetic
from .batch_gb import BatchGBModel, train_batch_gb
from .config import ConfigError, RunConfig
from .losses import LossSpec, loss_for_data
from .metrics import RegretRecord, comparator_fit
from .sgb_nonsmooth import SGBResidual
from .sgb_smooth import SGBSmooth, default_eta, estimate_gamma
from .trace import StreamTrace
from .weak_learners import EdgeUndefined, edge_from_terms, make_learner


def load_data(cfg: RunConfig):
    """Return (train, test) datasets as described by the config."""
    if cfg.data.startswith("synthetic:"):
        name = cfg.data.split(":", 1)[1]
        if name not in synthetic.GENERATORS:
            raise ConfigError(f"unknown synthetic dataset {name!r}; "
                              f"choose from {sorted(synthetic.GENERATORS)}")
        gen = synthetic.GENERATORS[name]
        kwargs = dict(n=cfg.synthetic_n, d=cfg.synthetic_d, seed=cfg.seed)
        if name == "linear":
            kwargs["noise"] = cfg.synthetic_noise
        if name == "multiclass" and cfg.num_classes:
            kwargs["k"] = cfg.num_classes
        full = gen(**kwargs)
        if full.task != cfg.task:
            raise ConfigError(f"synthetic:{name} is a {full.task} dataset but task={cfg.task}")
    else:
        full = _read(cfg, cfg.data)
    if cfg.test_data:
        train = full
        test = _read(cfg, cfg.test_data, n_features=full.d)
    else:
        train, test = ds.split(full, cfg.test_fraction, cfg.seed)
    if cfg.scale:
        apply = ds.minmax_scaler(train)
        train, test = apply(train), apply(test)
    return train, test


def _read(cfg, path, n_features=None):
    fmt = cfg.format
    if fmt == "auto":
        fmt = "csv" if str(path).lower().endswith(".csv") else "libsvm"
    if fmt == "csv":
        return ds.load_csv(path, cfg.target_column, cfg.task, cfg.num_classes)
    n_features = n_features or (cfg.n_features or None)
    return ds.load_libsvm(path, cfg.task, n_features, cfg.num_classes)


def learner_factory(cfg: RunConfig, d: int, m: int):
    if cfg.learner == "linear_ogd":
        hyper = dict(step=cfg.learner_step, schedule=cfg.learner_schedule, radius=cfg.learner_radius)
    elif cfg.learner == "linear_ftrl":
        hyper = dict(reg=cfg.ftrl_reg)
    else:
        hyper = dict(depth=cfg.tree_depth, buffer=cfg.buffer, refit_every=cfg.refit_every,
                     min_leaf=cfg.min_leaf)
    return lambda: make_learner(cfg.learner, d, m, **hyper)


def build_loss(cfg: RunConfig, train) -> LossSpec:
    return loss_for_data(cfg.loss, train.supervision(), cfg.reg_lambda, cfg.domain_bound)


@dataclass
class RunResult:
    algo: str
    N: int
    model: object
    loss: LossSpec
    regret: RegretRecord
    trace: Optional[StreamTrace]
    cost_units: int
    eta: Optional[float] = None
    gamma: Optional[float] = None
    gammas: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    stream_rows: Optional[np.ndarray] = None


def resolve_eta(cfg: RunConfig, loss: LossSpec, make, X, S):
    """(eta, gamma) from the config, estimating gamma on a warmup prefix if needed."""
    eta = cfg.eta_value()
    if eta is not None:
        return eta, cfg.gamma
    gamma = cfg.gamma
    if gamma is None:
        gamma = estimate_gamma(make, X, S, loss, warmup=cfg.gamma_warmup)
    return default_eta(gamma, loss.beta_sm), gamma


def run_experiment(cfg: RunConfig, train, n_learners: Optional[int] = None) -> RunResult:
    """Stream the training split through the configured algorithm.

    The comparator is fit on the whole training split before streaming. For
    the batch baseline, ``regret`` holds the final model's per-sample losses
    on the stream order against the comparator's (an excess empirical risk).
    """
    N = cfg.n_learners if n_learners is None else int(n_learners)
    loss = build_loss(cfg, train)
    order = ds.stream_order(train.n, cfg.seed, cfg.shuffle, cfg.passes)
    if cfg.T:
        order = order[:cfg.T]
    X = train.features[order]
    S = train.supervision()[order]
    make = learner_factory(cfg, train.d, loss.m)
    comp_kind = cfg.comparator
    if comp_kind == "auto":
        comp_kind = "oracle" if train.oracle is not None else "deep_tree"
    comparator = comparator_fit(train, comp_kind, loss, cfg.comparator_depth)
    comp_loss = comparator.losses(X, S)

    trace = None
    eta = gamma = None
    if cfg.algo == "sgb_smooth":
        eta, gamma = resolve_eta(cfg, loss, make, X, S)
        model = SGBSmooth([make() for _ in range(N)], eta, loss, snapshots=max(cfg.snapshots, 1))
        trace = model.fit_stream(X, S)
        cost = model.cost_units
    elif cfg.algo == "sgb_residual":
        radius = cfg.radius if cfg.radius is not None else loss.domain_bound
        model = SGBResidual([make() for _ in range(N)], loss, radius, lambda_sc=cfg.lambda_sc,
                            avg_denominator=cfg.avg_denominator,
                            snapshots=cfg.snapshots if cfg.test_predictor == "full" else 0)
        trace = model.fit_stream(X, S)
        cost = model.cost_units
    else:
        eta = cfg.gb_eta_value()
        if eta is None:
            if loss.smooth:
                eta, gamma = resolve_eta(cfg, loss, make, X, S)
            else:
                eta = 1.0 / loss.lambda_sc
        model = train_batch_gb(train.features, train.supervision(), loss, N, make, eta,
                               tolerance=cfg.gb_tolerance, max_passes=cfg.gb_max_passes,
                               seed=cfg.seed, shuffle=cfg.shuffle)
        cost = model.cost_units
        learner_loss = loss.values(S, model.predict_many(X))
    if trace is not None:
        learner_loss = trace.pred_loss
    regret = RegretRecord(learner_loss, comp_loss)
    edges, gammas = [], []
    if trace is not None:
        for i in range(trace.n_learners):
            try:
                rep = edge_from_terms(trace.sq_err[:, i], trace.sq_tgt[:, i], trace.sq_pred[:, i])
            except EdgeUndefined:
                rep = None
            edges.append(rep)
            gammas.append(float("nan") if rep is None else rep.gamma_hat)
    return RunResult(cfg.algo, N, model, loss, regret, trace, int(cost), eta, gamma, gammas, edges,
                     order)


def heldout_predictions(cfg: RunConfig, model, X) -> np.ndarray:
    """Predictions of a trained model under the configured test-time rule."""
    choice = cfg.test_predictor
    if isinstance(model, SGBSmooth):
        return model.predict_online_many(X) if choice == "online" else model.predict_average_many(X)
    if isinstance(model, SGBResidual):
        return model.predict_test_full_many(X) if choice == "full" else model.predict_test_final_many(X)
    if isinstance(model, BatchGBModel):
        return model.predict_many(X)
    raise TypeError(f"unknown model type {type(model).__name__}")


def evaluate(cfg: RunConfig, model, test) -> dict:
    """Test square error (regression) or misclassification rate (classification)."""
    Y = heldout_predictions(cfg, model, test.features)
    if test.task == "regression":
        err = np.sum((Y - test.targets) ** 2, axis=1)
        return {"task": "regression", "n": test.n, "square_error": float(np.mean(err))}
    if test.task == "binary":
        pred = np.where(Y[:, 0] >= 0, 1, -1)
    else:
        pred = np.argmax(Y, axis=1)
    return {"task": test.task, "n": test.n, "error_rate": float(np.mean(pred != test.labels))}
