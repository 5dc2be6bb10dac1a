"""Command-line entry point: ``streamboost {train,eval,sweep,counterexample}``.

Settings come from an optional ``key = value`` file (``--config``) and are
overridden by flags named after the keys. Exit codes: 0 ok, 2 bad
configuration or input, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_config_file, parse_config_text
from .dataset import DatasetError
from .errors import DivergenceError
from .losses import LossError
from .metrics import SWEEP_N_HEADER, SWEEP_T_HEADER, counterexample_run, fmt, sweep_n, sweep_t, write_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

ALIASES = {"n": "n_learners"}


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file; flags override it")
    for f in dataclasses.fields(RunConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar="VALUE")
    for alias, target in ALIASES.items():
        p.add_argument("--" + alias, dest=target, default=None, metavar="VALUE",
                       help=f"alias for --{target.replace('_', '-')}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamboost", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_config_flags(sub.add_parser("train", help="train one model and log per-step metrics"))
    ev = sub.add_parser("eval", help="score a saved model on the held-out split")
    _add_config_flags(ev)
    _add_config_flags(sub.add_parser("sweep", help="regret versus ensemble size or samples seen"))
    ce = sub.add_parser("counterexample", help="boosting with axis-restricted FTL learners")
    ce.add_argument("--T", type=int, default=5000)
    ce.add_argument("--n-list", default="2,8")
    ce.add_argument("--y0", default="1,1")
    ce.add_argument("--eta", type=float, default=0.025)
    ce.add_argument("--algorithm", choices=("smooth", "residual"), default="smooth")
    ce.add_argument("--lambda-sc", type=float, default=1.0)
    ce.add_argument("--out", default="")
    return parser


def resolve_config(args) -> RunConfig:
    values = load_config_file(args.config) if args.config else {}
    flags = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)
             if getattr(args, f.name) is not None}
    if "seed" not in flags and "seed" not in values and os.environ.get("STREAMBOOST_SEED"):
        values["seed"] = os.environ["STREAMBOOST_SEED"]
    cfg = RunConfig.from_mapping(values)
    cfg = RunConfig.from_mapping(flags, base=cfg)
    return cfg.validate()


def _paths(cfg: RunConfig):
    return (cfg.model or cfg.out + ".model", cfg.metrics or cfg.out + ".metrics.csv",
            cfg.out + ".config")


def step_rows(res):
    m = res.loss.m
    rows = [np.arange(1, res.regret.T + 1)]
    header = ["t"]
    trace = res.trace
    if trace is not None:
        preds = trace.preds
    else:
        preds = np.full((res.regret.T, m), np.nan)
    header += [f"y_{j}" for j in range(m)] + ["loss", "comparator_loss", "avg_regret"]
    cols = [preds[:, j] for j in range(m)]
    cols += [res.regret.learner_loss, res.regret.comparator_loss, res.regret.avg_regret_curve]
    if trace is not None:
        for i in range(trace.n_learners):
            header += [f"sq_err_{i + 1}", f"sq_target_{i + 1}"]
            cols += [trace.sq_err[:, i], trace.sq_tgt[:, i]]
    table = np.column_stack(cols)
    return header, ([int(t)] + list(row) for t, row in zip(rows[0], table))


def cmd_train(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    from .experiment import evaluate, load_data, run_experiment
    from .serialization import dump_text, save_model

    train, test = load_data(cfg)
    res = run_experiment(cfg, train)
    model_path, metrics_path, config_path = _paths(cfg)
    header, rows = step_rows(res)
    write_csv(metrics_path, header, rows)
    save_model(model_path, res.model, {"config": cfg.to_text(), "d": train.d})
    if cfg.dump_text:
        with open(model_path + ".txt", "w") as fh:
            fh.write(dump_text(res.model))
    with open(config_path, "w") as fh:
        fh.write(cfg.to_text())
    report = evaluate(cfg, res.model, test)
    print(f"algo={cfg.algo} N={res.N} T={res.regret.T} eta={fmt(res.eta) if res.eta is not None else '-'} "
          f"avg_regret={fmt(res.regret.average_regret)} cost_units={res.cost_units}", file=out)
    print(" ".join(f"{k}={fmt(v)}" for k, v in report.items()), file=out)
    print(f"wrote {model_path} {metrics_path} {config_path}", file=out)
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args, out=None) -> int:
    out = out or sys.stdout
    from .experiment import evaluate, load_data
    from .serialization import load_model

    model_path = cfg.model or cfg.out + ".model"
    model, extra = load_model(model_path)
    stored = RunConfig.from_mapping(parse_config_text(extra.get("config", "")))
    # flags given now win over the stored training config
    flags = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)
             if getattr(args, f.name) is not None}
    cfg = RunConfig.from_mapping(flags, base=stored).validate()
    train, test = load_data(cfg)
    if train.d != extra.get("d", train.d) or model.loss.m != train.m:
        raise ConfigError(f"model expects d={extra.get('d')}, m={model.loss.m}; "
                          f"data has d={train.d}, m={train.m}")
    report = evaluate(cfg, model, test)
    print(" ".join(f"{k}={fmt(v)}" for k, v in report.items()), file=out)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    from .experiment import load_data

    train, _ = load_data(cfg)
    path = cfg.metrics or cfg.out + f".sweep_{cfg.sweep}.csv"
    if cfg.sweep == "n":
        rows, _ = sweep_n(train, cfg, cfg.n_values, jobs=cfg.jobs)
        text = write_csv(path, SWEEP_N_HEADER, rows)
    else:
        checkpoints = cfg.checkpoint_values
        if not checkpoints:
            raise ConfigError("sweep=t needs checkpoints")
        rows, _ = sweep_t(train, cfg, cfg.n_learners, checkpoints)
        text = write_csv(path, SWEEP_T_HEADER, rows)
    out.write(text)
    return EXIT_OK


def cmd_counterexample(args, out=None) -> int:
    out = out or sys.stdout
    try:
        y0 = [float(v) for v in args.y0.split(",")]
        n_list = [int(v) for v in args.n_list.split(",")]
    except ValueError:
        raise ConfigError("y0 and n-list must be comma-separated numbers") from None
    if len(y0) != 2 or min(y0) < 0:
        raise ConfigError("y0 must be two non-negative numbers")
    if args.T < 1 or min(n_list) < 1:
        raise ConfigError("T and every N must be >= 1")
    rows = []
    for N in n_list:
        r = counterexample_run(args.T, N, y0, eta=args.eta, algorithm=args.algorithm,
                               lambda_sc=args.lambda_sc)
        second = r.preds[:, 1]
        rows.append([N, args.T, r.total_regret, r.average_regret, float(second.min()),
                     float(second.max())])
    text = write_csv(args.out or None,
                     ["N", "T", "total_regret", "avg_regret", "min_second_coord", "max_second_coord"],
                     rows)
    out.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "counterexample":
            return cmd_counterexample(args)
        cfg = resolve_config(args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args)
        return cmd_sweep(cfg)
    except DivergenceError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DatasetError, LossError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
