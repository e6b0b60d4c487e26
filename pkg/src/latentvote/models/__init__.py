"""Recurrent architectures behind one model interface, plus checkpoints."""

from ..errors import ConfigError
from ..puzzles.data import TaskShape
from ..tensor.rng import Rng
from .base import LatentState, RecurrentModel, rollout
from .baseline import BaselineConfig, BaselineTransformer
from .checkpoint import load_checkpoint, save_checkpoint
from .itrsa import ItrSAConfig, ItrSAModel
from .kuramoto import KuramotoConfig, KuramotoModel

MODEL_KINDS = ("itrsa", "kuramoto", "baseline")


def build_model(kind: str, model_cfg: dict, task: TaskShape, rng: Rng):
    """Construct a freshly initialized model of the given kind."""
    cfg = dict(model_cfg or {})
    try:
        if kind == "itrsa":
            return ItrSAModel(ItrSAConfig(**cfg), task, rng)
        if kind == "kuramoto":
            return KuramotoModel(KuramotoConfig(**cfg), task, rng)
        if kind == "baseline":
            return BaselineTransformer(BaselineConfig(**cfg), task, rng)
    except TypeError as exc:
        raise ConfigError(f"bad {kind} model config {sorted(cfg)}: {exc}") from None
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def task_from_dict(d: dict) -> TaskShape:
    return TaskShape(
        kind=d["kind"],
        length=int(d["length"]),
        vocab=int(d["vocab"]),
        classes=int(d["classes"]),
        box=int(d.get("box", 0)),
        dims=tuple(d.get("dims", ())),
    )


def task_to_dict(task: TaskShape) -> dict:
    return {
        "kind": task.kind,
        "length": task.length,
        "vocab": task.vocab,
        "classes": task.classes,
        "box": task.box,
        "dims": list(task.dims),
    }


def model_from_checkpoint(path, section: str = "ema"):
    """Rebuild the model from a checkpoint, loading the requested parameter
    set ('ema' for evaluation, 'live' for resumed training)."""
    header, sections = load_checkpoint(path)
    task = task_from_dict(header["task"])
    model = build_model(header["model"]["kind"], header["model"]["config"], task, Rng(0))
    if section not in sections:
        raise ConfigError(f"checkpoint has no {section!r} parameter set")
    model.load_parameters(sections[section])
    return model, header, sections


__all__ = [
    "MODEL_KINDS",
    "BaselineConfig",
    "BaselineTransformer",
    "ItrSAConfig",
    "ItrSAModel",
    "KuramotoConfig",
    "KuramotoModel",
    "LatentState",
    "RecurrentModel",
    "build_model",
    "load_checkpoint",
    "model_from_checkpoint",
    "rollout",
    "save_checkpoint",
    "task_from_dict",
    "task_to_dict",
]
