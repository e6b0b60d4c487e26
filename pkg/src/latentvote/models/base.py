"""Shared interface for the recurrent models and the rollout driver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericError, StrategyUnavailableError
from ..puzzles.data import TaskShape
from ..tensor import Tensor
from ..tensor.rng import Rng


@dataclass
class LatentState:
    """Per-candidate latent z with its step index.

    ``z`` carries arbitrary leading batch dimensions over (length, channels);
    candidate/instance ids are bookkeeping for traces and vote records.
    """

    z: Tensor
    t: int = 0
    candidate_id: int = None
    instance_id: int = None


class RecurrentModel:
    """One identical parameterized step applied repeatedly to a latent state.

    Implementations provide embed / init_latent / step / readout; models with
    a closed-form energy override ``energy`` and set ``has_energy``.
    """

    recurrent = True
    has_energy = False

    def __init__(self, task: TaskShape):
        self.task = task
        self._params: dict = {}

    def _param(self, name: str, data: np.ndarray) -> Tensor:
        t = Tensor(data, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def _init_weight(self, rng: Rng, name: str, shape, std=None) -> Tensor:
        """Fan-in scaled Gaussian unless std is given explicitly."""
        if std is None:
            std = 1.0 / np.sqrt(shape[0])
        return self._param(name, rng.normal(shape) * np.float32(std))

    def parameters(self) -> list:
        return list(self._params.items())

    def parameter_count(self) -> int:
        return sum(t.size for _, t in self._params.items())

    def embed(self, tokens: np.ndarray) -> Tensor:
        raise NotImplementedError

    def prepare_latent(self, raw: np.ndarray) -> np.ndarray:
        """Map raw Gaussian draws onto the model's latent manifold."""
        return raw

    def init_latent(self, rng: Rng, batch_shape=()) -> LatentState:
        raw = rng.normal(tuple(batch_shape) + (self.task.length, self.channels))
        return LatentState(Tensor(self.prepare_latent(raw)), t=0)

    def step(self, state: LatentState, x_emb: Tensor) -> LatentState:
        raise NotImplementedError

    def readout(self, state: LatentState) -> Tensor:
        raise NotImplementedError

    def energy(self, state: LatentState, x_emb: Tensor) -> Tensor:
        raise StrategyUnavailableError(
            f"{type(self).__name__} does not define an explicit energy"
        )

    @property
    def channels(self) -> int:
        raise NotImplementedError

    def predict_logits(self, tokens: np.ndarray, z: Tensor, t_infer: int) -> Tensor:
        """Logits after t_infer steps from the given latent initialization."""
        x_emb = self.embed(tokens)
        state = LatentState(z, t=0)
        for _ in range(t_infer):
            state = self.step(state, x_emb)
        return self.readout(state)

    def load_parameters(self, arrays: dict) -> None:
        for name, tensor in self._params.items():
            if name not in arrays:
                raise ConfigError(f"checkpoint is missing parameter {name!r}")
            if arrays[name].shape != tensor.shape:
                raise ConfigError(
                    f"checkpoint parameter {name!r} has shape {arrays[name].shape}, "
                    f"expected {tensor.shape}"
                )
            tensor.data = arrays[name].astype(np.float32, copy=True)


def rollout(model, tokens: np.ndarray, rng: Rng, t_infer: int, record_trace: bool = False):
    """Initialize from Gaussian noise and apply the step t_infer times.

    Returns the final state, or (final state, trace of all t_infer + 1
    states) when tracing.
    """
    if t_infer < 1:
        raise ConfigError(f"t_infer must be at least 1, got {t_infer}")
    x_emb = model.embed(tokens)
    state = model.init_latent(rng, batch_shape=tokens.shape[:-1])
    trace = [state]
    for t in range(t_infer):
        state = model.step(state, x_emb)
        if not np.isfinite(state.z.data).all():
            raise NumericError(f"latent state diverged at step {t + 1}")
        if record_trace:
            trace.append(state)
    return (state, trace) if record_trace else state
