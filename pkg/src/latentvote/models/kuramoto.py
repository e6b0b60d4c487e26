"""Coupled-oscillator recurrence on a product of unit spheres.

Each token's channels split into oscillator groups of dimension N kept at
unit norm. A step rotates every group with one shared skew-symmetric
generator, drives it with the input stimulus plus attention coupling
projected onto the tangent space, and renormalizes. The closed-form energy
(stimulus alignment plus a symmetrized coupling quadratic) makes this the
model energy-based voting applies to.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..puzzles.data import TaskShape
from ..tensor import (
    Tensor,
    add,
    attention_coupling,
    embedding,
    matmul,
    mul,
    reshape,
    rmsnorm,
    scale,
    sub,
    swapaxes,
    tsum,
    unit_normalize,
)
from ..tensor.rng import Rng
from .base import LatentState, RecurrentModel

log = logging.getLogger(__name__)

ZERO_GROUP_NORM = 1e-12


def project_tangent(drive_grouped, z_grouped):
    """Remove, per oscillator group, the component of the drive parallel to z."""
    radial = tsum(mul(drive_grouped, z_grouped), axis=-1, keepdims=True)
    return sub(drive_grouped, mul(radial, z_grouped))


@dataclass
class KuramotoConfig:
    channels: int = 64
    osc_dim: int = 4
    heads: int = 4
    step_size: float = 1.0

    def __post_init__(self):
        if self.channels % self.osc_dim:
            raise ConfigError(
                f"channels {self.channels} not divisible by oscillator dim {self.osc_dim}"
            )
        if self.channels % self.heads:
            raise ConfigError(f"channels {self.channels} not divisible by heads {self.heads}")

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "osc_dim": self.osc_dim,
            "heads": self.heads,
            "step_size": self.step_size,
        }


class KuramotoModel(RecurrentModel):
    has_energy = True

    def __init__(self, config: KuramotoConfig, task: TaskShape, rng: Rng,
                 symmetric_coupling: bool = False):
        super().__init__(task)
        self.config = config
        self.symmetric_coupling = symmetric_coupling
        c, n = config.channels, config.osc_dim
        self._init_weight(rng.split("tok"), "tok_emb", (task.vocab, c), std=c**-0.5)
        self._init_weight(rng.split("pos"), "pos_emb", (task.length, c), std=c**-0.5)
        # Zero natural frequency at init; the generator is learned.
        self._param("skew_gen", np.zeros((n, n), dtype=np.float32))
        self._init_weight(rng.split("wq"), "wq", (c, c))
        self._init_weight(rng.split("wk"), "wk", (c, c))
        self._param("g_out", np.ones(c, dtype=np.float32))
        self._init_weight(rng.split("read"), "w_read", (c, task.classes), std=1.0 / c)
        self._rescue_rng = rng.split("rescue")

    @property
    def channels(self) -> int:
        return self.config.channels

    @property
    def groups(self) -> int:
        return self.config.channels // self.config.osc_dim

    def embed(self, tokens: np.ndarray):
        p = self._params
        return add(embedding(p["tok_emb"], tokens), p["pos_emb"])

    def prepare_latent(self, raw: np.ndarray) -> np.ndarray:
        """Project raw draws onto the product of unit spheres."""
        n = self.config.osc_dim
        grouped = raw.reshape(raw.shape[:-1] + (self.groups, n))
        norms = np.sqrt(np.square(grouped).sum(axis=-1, keepdims=True))
        norms = np.maximum(norms, np.float32(ZERO_GROUP_NORM))
        return (grouped / norms).reshape(raw.shape).astype(np.float32)

    def _grouped(self, t):
        *lead, length, c = t.shape
        return reshape(t, (*lead, length, self.groups, self.config.osc_dim))

    def step(self, state: LatentState, x_emb) -> LatentState:
        cfg = self.config
        p = self._params
        z = state.z
        if cfg.step_size == 0:
            # Zero step size is an exact fixed point; renormalizing would
            # still perturb last bits.
            return LatentState(z, state.t + 1, state.candidate_id, state.instance_id)
        zg = self._grouped(z)
        rotation = matmul(zg, sub(p["skew_gen"], swapaxes(p["skew_gen"], -1, -2)))
        coupling = attention_coupling(
            z, p["wq"], p["wk"], cfg.heads, symmetric=self.symmetric_coupling
        )
        tangent = project_tangent(self._grouped(add(x_emb, coupling)), zg)
        moved = add(zg, scale(add(rotation, tangent), cfg.step_size))
        moved = self._rescue_dead_groups(moved)
        renorm = unit_normalize(moved)
        z_next = reshape(renorm, z.shape)
        return LatentState(z_next, state.t + 1, state.candidate_id, state.instance_id)

    def _rescue_dead_groups(self, moved):
        """A group that collapsed to zero cannot be renormalized; log it and
        nudge it with a fresh random direction before the projection."""
        norms = np.sqrt(np.square(moved.data).sum(axis=-1))
        dead = norms < ZERO_GROUP_NORM
        if not dead.any():
            return moved
        log.warning("re-randomizing %d zero-norm oscillator group(s)", int(dead.sum()))
        patch = np.zeros_like(moved.data)
        patch[dead] = self._rescue_rng.normal((int(dead.sum()), self.config.osc_dim))
        return add(moved, Tensor(patch))

    def energy(self, state: LatentState, x_emb):
        """Stimulus alignment plus half the symmetrized coupling quadratic,
        negated: lower energy means stronger agreement."""
        p = self._params
        z = state.z
        coupled = attention_coupling(z, p["wq"], p["wk"], self.config.heads, symmetric=True)
        stimulus = tsum(mul(x_emb, z), axis=-1)
        pairwise = tsum(mul(z, coupled), axis=-1)
        per_token = add(scale(stimulus, -1.0), scale(pairwise, -0.5))
        return tsum(per_token, axis=-1)

    def readout(self, state: LatentState):
        p = self._params
        return matmul(rmsnorm(state.z, p["g_out"]), p["w_read"])
