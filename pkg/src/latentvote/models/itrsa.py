"""Iterated self-attention recurrence: cross-attend the latent to the input,
self-attend S times, gate through SwiGLU, all with one shared weight set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..puzzles.data import TaskShape
from ..tensor import add, embedding, matmul, multi_head_attention, rmsnorm, swiglu
from ..tensor.rng import Rng
from .base import LatentState, RecurrentModel


@dataclass
class ItrSAConfig:
    channels: int = 64
    heads: int = 4
    self_attn_repeats: int = 2
    hidden: int = 0  # 0 = 4 * channels

    def __post_init__(self):
        if self.channels % self.heads:
            raise ConfigError(
                f"channels {self.channels} not divisible by heads {self.heads}"
            )
        if self.hidden <= 0:
            self.hidden = 4 * self.channels

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "heads": self.heads,
            "self_attn_repeats": self.self_attn_repeats,
            "hidden": self.hidden,
        }


class ItrSAModel(RecurrentModel):
    """Weight-shared recurrent attention model; parameter count is
    independent of how many steps it is run for."""

    def __init__(self, config: ItrSAConfig, task: TaskShape, rng: Rng):
        super().__init__(task)
        self.config = config
        c, h = config.channels, config.hidden
        self._init_weight(rng.split("tok"), "tok_emb", (task.vocab, c), std=c**-0.5)
        self._init_weight(rng.split("pos"), "pos_emb", (task.length, c), std=c**-0.5)
        # Positions are injected into every attention's queries/keys (the
        # absolute-embedding stand-in for a position-aware attention
        # mechanism): a randomly initialized latent carries no positional
        # signal of its own, and without this anchor the latent rows are
        # permutation-equivalent and collapse to one shared prediction.
        self._init_weight(rng.split("posz"), "pos_lat", (task.length, c), std=c**-0.5)
        self._param("g_attn", np.ones(c, dtype=np.float32))
        self._param("g_mlp", np.ones(c, dtype=np.float32))
        self._param("g_out", np.ones(c, dtype=np.float32))
        for prefix in ("cross", "self"):
            for w in ("wq", "wk", "wv", "wo"):
                self._init_weight(rng.split(prefix, w), f"{prefix}_{w}", (c, c))
        self._init_weight(rng.split("gate"), "w_gate", (c, h))
        self._init_weight(rng.split("up"), "w_up", (c, h))
        self._init_weight(rng.split("down"), "w_down", (h, c))
        self._init_weight(rng.split("read"), "w_read", (c, task.classes), std=1.0 / c)

    @property
    def channels(self) -> int:
        return self.config.channels

    def _attn(self, prefix: str, q, k, v):
        p = self._params
        return multi_head_attention(
            q, k, v,
            p[f"{prefix}_wq"], p[f"{prefix}_wk"], p[f"{prefix}_wv"], p[f"{prefix}_wo"],
            self.config.heads,
        )

    def embed(self, tokens: np.ndarray):
        """Token + learned absolute position embedding, normalized."""
        p = self._params
        return rmsnorm(add(embedding(p["tok_emb"], tokens), p["pos_emb"]), p["g_attn"])

    def step(self, state: LatentState, x_emb) -> LatentState:
        p = self._params
        zn = rmsnorm(state.z, p["g_attn"])
        z = add(zn, self._attn("cross", add(zn, p["pos_lat"]), x_emb, x_emb))
        for _ in range(self.config.self_attn_repeats):
            zn = rmsnorm(z, p["g_attn"])
            zq = add(zn, p["pos_lat"])
            z = add(zn, self._attn("self", zq, zq, zn))
        zm = rmsnorm(z, p["g_mlp"])
        z = add(zm, swiglu(zm, p["w_gate"], p["w_up"], p["w_down"]))
        return LatentState(z, state.t + 1, state.candidate_id, state.instance_id)

    def readout(self, state: LatentState):
        p = self._params
        return matmul(rmsnorm(state.z, p["g_out"]), p["w_read"])
