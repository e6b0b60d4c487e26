"""Non-recurrent control: a plain pre-norm transformer that mixes the input
embedding with a random initial latent through a linear layer, so candidate
sampling still applies even though nothing recurs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..puzzles.data import TaskShape
from ..tensor import Tensor, add, concat, embedding, matmul, multi_head_attention, rmsnorm, swiglu
from ..tensor.rng import Rng
from .base import LatentState, RecurrentModel


@dataclass
class BaselineConfig:
    channels: int = 64
    heads: int = 4
    depth: int = 4
    hidden: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"depth must be at least 1, got {self.depth}")
        if self.channels % self.heads:
            raise ConfigError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.hidden <= 0:
            self.hidden = 4 * self.channels

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "heads": self.heads,
            "depth": self.depth,
            "hidden": self.hidden,
        }


class BaselineTransformer(RecurrentModel):
    """Depth non-shared blocks: parameters grow linearly with depth."""

    recurrent = False

    def __init__(self, config: BaselineConfig, task: TaskShape, rng: Rng):
        super().__init__(task)
        self.config = config
        c, h = config.channels, config.hidden
        self._init_weight(rng.split("tok"), "tok_emb", (task.vocab, c), std=c**-0.5)
        self._init_weight(rng.split("pos"), "pos_emb", (task.length, c), std=c**-0.5)
        self._param("g_emb", np.ones(c, dtype=np.float32))
        self._init_weight(rng.split("mix"), "w_mix", (2 * c, c))
        for i in range(config.depth):
            for w in ("wq", "wk", "wv", "wo"):
                self._init_weight(rng.split("blk", i, w), f"blk{i}_{w}", (c, c))
            self._init_weight(rng.split("blk", i, "gate"), f"blk{i}_gate", (c, h))
            self._init_weight(rng.split("blk", i, "up"), f"blk{i}_up", (c, h))
            self._init_weight(rng.split("blk", i, "down"), f"blk{i}_down", (h, c))
            self._param(f"blk{i}_g1", np.ones(c, dtype=np.float32))
            self._param(f"blk{i}_g2", np.ones(c, dtype=np.float32))
        self._param("g_out", np.ones(c, dtype=np.float32))
        self._init_weight(rng.split("read"), "w_read", (c, task.classes), std=1.0 / c)

    @property
    def channels(self) -> int:
        return self.config.channels

    def embed(self, tokens: np.ndarray):
        p = self._params
        return rmsnorm(add(embedding(p["tok_emb"], tokens), p["pos_emb"]), p["g_emb"])

    def forward(self, x_emb, z0: Tensor):
        """Mix embedding with the latent draw, run the block stack, read out."""
        p = self._params
        if x_emb.shape[:-1] != z0.shape[:-1]:
            zeros = np.zeros(z0.shape[:-1] + (x_emb.shape[-1],), dtype=np.float32)
            x_emb = add(x_emb, Tensor(zeros))
        h = matmul(concat([x_emb, z0], axis=-1), p["w_mix"])
        for i in range(self.config.depth):
            hn = rmsnorm(h, p[f"blk{i}_g1"])
            h = add(h, multi_head_attention(
                hn, hn, hn,
                p[f"blk{i}_wq"], p[f"blk{i}_wk"], p[f"blk{i}_wv"], p[f"blk{i}_wo"],
                self.config.heads,
            ))
            hn = rmsnorm(h, p[f"blk{i}_g2"])
            h = add(h, swiglu(hn, p[f"blk{i}_gate"], p[f"blk{i}_up"], p[f"blk{i}_down"]))
        return matmul(rmsnorm(h, p["g_out"]), p["w_read"])

    def step(self, state: LatentState, x_emb) -> LatentState:
        raise ConfigError("the baseline transformer is not a recurrent model")

    def readout(self, state: LatentState):
        raise ConfigError("the baseline transformer is not a recurrent model")

    def predict_logits(self, tokens: np.ndarray, z: Tensor, t_infer: int):
        # Depth is fixed at build time; t_infer has no meaning here.
        return self.forward(self.embed(tokens), z)
