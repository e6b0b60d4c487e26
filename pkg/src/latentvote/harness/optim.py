"""Adam with optional decoupled weight decay, global-norm clipping, and EMA."""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class Adam:
    """Adam over named parameter tensors.

    ``decoupled`` applies weight decay directly to the weights (the AdamW
    rule); otherwise decay is folded into the gradient.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.95, weight_decay=0.0,
                 decoupled=True, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.weight_decay = weight_decay
        self.decoupled = decoupled
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in self.params}
        self.v = {name: np.zeros_like(t.data) for name, t in self.params}

    def zero_grad(self) -> None:
        for _, t in self.params:
            t.grad = None

    def step(self, lr=None) -> None:
        lr = self.lr if lr is None else lr
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for name, t in self.params:
            g = t.grad
            if g is None:
                continue
            if self.weight_decay and not self.decoupled:
                g = g + self.weight_decay * t.data
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay and self.decoupled:
                update = update + self.weight_decay * t.data
            t.data = (t.data - np.float32(lr) * update).astype(np.float32)

    def state_arrays(self):
        return dict(self.m), dict(self.v)

    def load_state(self, m, v, step_count) -> None:
        for name, _ in self.params:
            self.m[name] = m[name].astype(np.float32, copy=True)
            self.v[name] = v[name].astype(np.float32, copy=True)
        self.step_count = int(step_count)


def clip_global_norm(params, threshold: float) -> float:
    """Scale all gradients so their joint norm is at most threshold.

    Returns the pre-clip global norm.
    """
    total = 0.0
    for _, t in params:
        if t.grad is not None:
            total += float(np.square(t.grad.astype(np.float64)).sum())
    norm = float(np.sqrt(total))
    if norm > threshold:
        factor = np.float32(threshold / norm)
        for _, t in params:
            if t.grad is not None:
                t.grad *= factor
    return norm


class Ema:
    """Exponential moving average shadow of every parameter.

    shadow <- decay * shadow + (1 - decay) * live after each optimizer step;
    evaluation swaps the shadow in and restores the live weights after.
    """

    def __init__(self, params, decay: float):
        self.decay = decay
        self.shadow = {name: t.data.copy() for name, t in params}

    def update(self, params) -> None:
        d = np.float32(self.decay)
        one_minus = np.float32(1.0 - self.decay)
        for name, t in params:
            s = self.shadow[name]
            s *= d
            s += one_minus * t.data

    @contextmanager
    def swap(self, model):
        """Temporarily run the model on the shadow weights."""
        backup = {}
        for name, t in model.parameters():
            backup[name] = t.data
            t.data = self.shadow[name]
        try:
            yield model
        finally:
            for name, t in model.parameters():
                t.data = backup[name]

    def arrays(self) -> dict:
        return dict(self.shadow)

    def load(self, arrays: dict) -> None:
        for name in self.shadow:
            self.shadow[name] = arrays[name].astype(np.float32, copy=True)
