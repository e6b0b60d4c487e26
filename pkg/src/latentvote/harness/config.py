"""Run configuration: every knob a run needs, serializable as flat dotted keys.

A run is a pure function of its RunConfig; the effective config is printed
before any command acts and stored in checkpoints, so any artifact can be
regenerated from its banner.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from ..errors import ConfigError
from ..puzzles.data import TaskShape, maze_task_shape, sudoku_task_shape
from ..voting import VOTE_METRICS

OPTIMIZERS = ("adamw", "adam")
INIT_SCHEME = "fan_in_gaussian"


@dataclass
class ModelSection:
    kind: str = "itrsa"
    params: dict = field(default_factory=dict)


@dataclass
class TrainSection:
    optimizer: str = "adamw"
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.95
    weight_decay: float = 0.01
    grad_clip: float = 1.0
    ema_decay: float = 0.995
    batch_size: int = 64
    epochs: int = 60
    t_train: int = 8
    t_detach: int = 2
    warmup_steps: int = 100
    eval_every: int = 5
    early_stop_patience: int = 4
    eval_subset: int = 200
    augment: bool = False


@dataclass
class DataSection:
    kind: str = "sudoku"
    box: int = 2
    clues_min: int = 6
    clues_max: int = 9
    height: int = 12
    width: int = 12
    min_path_len: int = 14
    train_count: int = 5000
    test_count: int = 500
    seed: int = 0
    train_path: str = ""
    test_path: str = ""


@dataclass
class EvalSection:
    t_infer: int = 0  # 0 = t_train
    k_list: tuple = (1,)
    metric: str = "top1"
    temperature: float = 1.0
    seed: int = 0


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    data: DataSection = field(default_factory=DataSection)
    eval: EvalSection = field(default_factory=EvalSection)
    seed: int = 0
    init: str = INIT_SCHEME

    def task_shape(self) -> TaskShape:
        if self.data.kind == "sudoku":
            return sudoku_task_shape(self.data.box)
        return maze_task_shape(self.data.height, self.data.width)

    def t_infer(self) -> int:
        return self.eval.t_infer or self.train.t_train

    def to_flat(self) -> dict:
        flat = {"seed": self.seed, "init": self.init, "model.kind": self.model.kind}
        for key, value in sorted(self.model.params.items()):
            flat[f"model.{key}"] = value
        for section in ("train", "data", "eval"):
            for key, value in asdict(getattr(self, section)).items():
                flat[f"{section}.{key}"] = list(value) if isinstance(value, tuple) else value
        return flat

    def banner(self) -> str:
        return json.dumps(self.to_flat(), sort_keys=True, indent=2)

    @classmethod
    def from_flat(cls, flat: dict) -> "RunConfig":
        cfg = cls()
        sections = {"train": cfg.train, "data": cfg.data, "eval": cfg.eval}
        problems = []
        for key, value in flat.items():
            if key == "seed":
                cfg.seed = int(value)
            elif key == "init":
                cfg.init = str(value)
            elif key == "model.kind":
                cfg.model.kind = str(value)
            elif key.startswith("model."):
                cfg.model.params[key.split(".", 1)[1]] = value
            elif "." in key:
                section, name = key.split(".", 1)
                target = sections.get(section)
                if target is None or not hasattr(target, name):
                    problems.append(f"unknown config key {key!r}")
                    continue
                current = getattr(target, name)
                try:
                    if isinstance(current, tuple):
                        setattr(target, name, tuple(int(v) for v in value))
                    else:
                        setattr(target, name, type(current)(value))
                except (TypeError, ValueError):
                    problems.append(f"config key {key!r} got incompatible value {value!r}")
            else:
                problems.append(f"unknown config key {key!r}")
        if problems:
            raise ConfigError("; ".join(problems))
        return cfg

    def validate(self) -> None:
        """Raise one ConfigError listing every problem, not just the first."""
        problems = []
        t = self.train
        if self.model.kind not in ("itrsa", "kuramoto", "baseline"):
            problems.append(f"model.kind {self.model.kind!r} unknown")
        if t.optimizer not in OPTIMIZERS:
            problems.append(f"train.optimizer {t.optimizer!r} not in {OPTIMIZERS}")
        if t.lr <= 0:
            problems.append(f"train.lr must be positive, got {t.lr}")
        for name in ("beta1", "beta2"):
            b = getattr(t, name)
            if not 0.0 <= b < 1.0:
                problems.append(f"train.{name} must be in [0, 1), got {b}")
        if t.weight_decay < 0:
            problems.append(f"train.weight_decay must be non-negative, got {t.weight_decay}")
        if t.grad_clip <= 0:
            problems.append(f"train.grad_clip must be positive, got {t.grad_clip}")
        if not 0.0 < t.ema_decay < 1.0:
            problems.append(f"train.ema_decay must be in (0, 1), got {t.ema_decay}")
        if t.batch_size < 1:
            problems.append(f"train.batch_size must be at least 1, got {t.batch_size}")
        if t.epochs < 1:
            problems.append(f"train.epochs must be at least 1, got {t.epochs}")
        if t.t_train < 1:
            problems.append(f"train.t_train must be at least 1, got {t.t_train}")
        if not 1 <= t.t_detach <= t.t_train:
            problems.append(
                f"train.t_detach must be in [1, t_train={t.t_train}], got {t.t_detach}"
            )
        d = self.data
        if d.kind not in ("sudoku", "maze"):
            problems.append(f"data.kind {d.kind!r} unknown")
        if d.kind == "sudoku" and d.box not in (2, 3):
            problems.append(f"data.box must be 2 or 3, got {d.box}")
        if d.train_count < 1 or d.test_count < 1:
            problems.append("data.train_count and data.test_count must be at least 1")
        e = self.eval
        if e.temperature <= 0:
            problems.append(f"eval.temperature must be positive, got {e.temperature}")
        ks = list(e.k_list)
        if not ks or ks != sorted(ks) or any(k < 1 for k in ks):
            problems.append(f"eval.k_list must be ascending positive integers, got {ks}")
        if e.metric not in VOTE_METRICS:
            problems.append(f"eval.metric {e.metric!r} not in {VOTE_METRICS}")
        if e.metric == "energy" and self.model.kind != "kuramoto":
            problems.append("eval.metric 'energy' needs a model with an energy function")
        if problems:
            raise ConfigError("invalid config: " + "; ".join(problems))


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            flat = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(flat, dict):
        raise ConfigError(f"config file {path} must hold a JSON object of dotted keys")
    return RunConfig.from_flat(flat)


def apply_overrides(cfg: RunConfig, pairs) -> RunConfig:
    """Apply key=value overrides (values parsed as JSON, falling back to str)."""
    flat = cfg.to_flat()
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        flat[key.strip()] = value
    return RunConfig.from_flat(flat)
