"""Run configuration: a flat ``key = value`` file overridden by CLI flags."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .losses import KINDS, SMOOTH_KINDS

ALGOS = ("sgb_smooth", "sgb_residual", "batch_gb")
LEARNERS = ("linear_ogd", "linear_ftrl", "tree")
COMPARATORS = ("auto", "oracle", "deep_tree", "best_linear")
TASKS = ("regression", "binary", "multiclass")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # data
    data: str = "synthetic:linear"
    format: str = "auto"
    task: str = "regression"
    target_column: int = -1
    n_features: int = 0
    num_classes: int = 0
    test_data: str = ""
    test_fraction: float = 0.1
    scale: bool = False
    synthetic_n: int = 2000
    synthetic_d: int = 5
    synthetic_noise: float = 0.0
    # stream
    seed: int = 0
    shuffle: bool = True
    passes: int = 1
    T: int = 0
    # loss
    loss: str = "square"
    reg_lambda: float = 0.0
    domain_bound: Optional[float] = None
    # weak learners
    learner: str = "linear_ogd"
    learner_step: float = 0.05
    learner_schedule: str = "sqrt"
    learner_radius: Optional[float] = None
    ftrl_reg: float = 1.0
    tree_depth: int = 4
    buffer: int = 512
    refit_every: int = 64
    min_leaf: int = 1
    # algorithm
    algo: str = "sgb_smooth"
    n_learners: int = 4
    eta: str = "auto"
    gamma: Optional[float] = None
    gamma_warmup: int = 500
    lambda_sc: Optional[float] = None
    radius: Optional[float] = None
    snapshots: int = 32
    avg_denominator: str = "n"
    test_predictor: str = "auto"
    gb_tolerance: float = 1e-4
    gb_max_passes: int = 50
    gb_eta: str = "auto"
    # regret baseline
    comparator: str = "auto"
    comparator_depth: int = 15
    # sweeps
    sweep: str = "n"
    n_list: str = "1,2,4,8"
    checkpoints: str = ""
    jobs: int = 1
    # outputs
    out: str = "run"
    model: str = ""
    metrics: str = ""
    dump_text: bool = False

    # ------------------------------------------------------------------
    @classmethod
    def field_types(cls) -> dict:
        return {f.name: f for f in dataclasses.fields(cls)}

    @classmethod
    def from_mapping(cls, values: dict, base: Optional["RunConfig"] = None) -> "RunConfig":
        cfg = dataclasses.replace(base) if base is not None else cls()
        fields = cls.field_types()
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, _coerce(key, fields[key], raw))
        return cfg

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if v is None else _fmt(v)}")
        return "\n".join(lines) + "\n"

    @property
    def n_values(self) -> list[int]:
        return _int_list(self.n_list, "n_list")

    @property
    def checkpoint_values(self) -> list[int]:
        return _int_list(self.checkpoints, "checkpoints") if self.checkpoints.strip() else []

    def eta_value(self) -> Optional[float]:
        return None if self.eta == "auto" else float(self.eta)

    def gb_eta_value(self) -> Optional[float]:
        return None if self.gb_eta == "auto" else float(self.gb_eta)

    def validate(self) -> "RunConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.algo in ALGOS, f"algo must be one of {ALGOS}")
        need(self.loss in KINDS, f"loss must be one of {KINDS}")
        need(self.learner in LEARNERS, f"learner must be one of {LEARNERS}")
        need(self.task in TASKS, f"task must be one of {TASKS}")
        need(self.comparator in COMPARATORS, f"comparator must be one of {COMPARATORS}")
        need(self.format in ("auto", "libsvm", "csv"), "format must be auto, libsvm or csv")
        need(self.learner_schedule in ("sqrt", "inv", "const"),
             "learner_schedule must be sqrt, inv or const")
        need(self.avg_denominator in ("n", "n_plus_1"), "avg_denominator must be n or n_plus_1")
        need(self.test_predictor in ("auto", "online", "average", "final", "full"),
             "test_predictor must be auto, online, average, final or full")
        need(self.sweep in ("n", "t"), f"unknown sweep axis {self.sweep!r} (use n or t)")
        if self.algo == "sgb_smooth":
            need(self.loss in SMOOTH_KINDS,
                 f"{self.loss} is non-smooth; use sgb_residual")
        if self.algo == "sgb_residual":
            need(self.loss not in ("l1", "hinge_l2", "multiclass_ce") or self.reg_lambda > 0
                 or (self.lambda_sc or 0) > 0,
                 f"{self.loss} needs reg_lambda > 0 to be strongly convex for sgb_residual")
        if self.loss in ("logistic_l2", "hinge_l2"):
            need(self.task == "binary", f"{self.loss} needs task=binary")
        if self.loss == "multiclass_ce":
            need(self.task == "multiclass", "multiclass_ce needs task=multiclass")
        if self.loss in ("square", "l1") and self.task != "regression":
            need(False, f"{self.loss} needs task=regression")
        need(self.n_learners >= 1, "n_learners must be >= 1")
        need(self.passes >= 1, "passes must be >= 1")
        need(self.T >= 0, "T must be >= 0")
        need(0.0 < self.test_fraction < 1.0, "test_fraction must lie in (0, 1)")
        need(self.reg_lambda >= 0, "reg_lambda must be >= 0")
        need(self.learner_step >= 0, "learner_step must be >= 0")
        need(self.ftrl_reg > 0, "ftrl_reg must be > 0")
        need(self.tree_depth >= 0 and self.buffer >= 1 and self.refit_every >= 1 and self.min_leaf >= 1,
             "tree settings must be positive")
        need(self.snapshots >= 0, "snapshots must be >= 0")
        need(self.gamma_warmup >= 1, "gamma_warmup must be >= 1")
        need(self.gamma is None or 0.0 < self.gamma <= 1.0, "gamma must lie in (0, 1]")
        need(self.jobs >= 1, "jobs must be >= 1")
        need(self.gb_max_passes >= 1, "gb_max_passes must be >= 1")
        for name in ("eta", "gb_eta"):
            v = getattr(self, name)
            if v != "auto":
                try:
                    ok = float(v) >= 0
                except ValueError:
                    ok = False
                need(ok, f"{name} must be 'auto' or a non-negative number")
        _ = self.n_values, self.checkpoint_values  # list parse errors surface here
        return self


def _int_list(text: str, name: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of integers") from None
    if not values or any(v < 0 for v in values):
        raise ConfigError(f"{name} must list non-negative integers")
    return values


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key, f, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    try:
        if "Optional" in kind:
            if text in ("", "none", "auto"):
                return None
            kind = kind.replace("Optional[", "").rstrip("]")
        if kind == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key} ({kind})") from None
    return text


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key = value")
        values[key.strip()] = value.strip()
    return values


def load_config_file(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read())
