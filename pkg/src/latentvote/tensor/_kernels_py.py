"""Pure-numpy implementations of the row-wise hot kernels.

Twin of the compiled ``_kernels_cy`` extension; both lanes expose identical
signatures. Inputs are 2-D (rows, cols) except for the elementwise
silu/sigmoid pair, which accepts any shape. This lane preserves the input
dtype (float32 in the artifact, float64 under the grad_check harness); the
compiled lane is float32-only.
"""

import numpy as np

LANE = "python"


def softmax_fwd(x):
    m = x.max(axis=-1, keepdims=True)
    y = np.exp(x - m)
    y /= y.sum(axis=-1, keepdims=True)
    return y


def softmax_bwd(y, gout):
    inner = (gout * y).sum(axis=-1, keepdims=True)
    return y * (gout - inner)


def log_softmax_fwd(x):
    m = x.max(axis=-1, keepdims=True)
    shifted = x - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return shifted - lse


def log_softmax_bwd(y, gout):
    total = gout.sum(axis=-1, keepdims=True)
    return gout - np.exp(y) * total


def rmsnorm_fwd(x, gain, eps):
    ms = np.mean(np.square(x), axis=-1, keepdims=True)
    inv_rms = 1.0 / np.sqrt(ms + eps)
    y = x * inv_rms * gain
    return y, inv_rms[..., 0]


def rmsnorm_bwd(x, gain, inv_rms, gout):
    cols = x.shape[-1]
    r = inv_rms[..., None]
    inner = (gout * gain * x).sum(axis=-1, keepdims=True)
    gx = r * gout * gain - x * (r**3) * (inner / cols)
    ggain = (gout * x * r).sum(axis=0)
    return gx, ggain


def silu_fwd(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s


def silu_bwd(x, gout):
    s = 1.0 / (1.0 + np.exp(-x))
    return gout * (s * (1.0 + x * (1.0 - s)))


def sigmoid_fwd(x):
    return 1.0 / (1.0 + np.exp(-x))


def sigmoid_bwd(y, gout):
    return gout * y * (1.0 - y)


def unit_normalize_fwd(x):
    norm = np.sqrt(np.square(x).sum(axis=-1, keepdims=True))
    inv = 1.0 / norm
    return x * inv, inv[..., 0]


def unit_normalize_bwd(y, inv_norm, gout):
    inner = (gout * y).sum(axis=-1, keepdims=True)
    return inv_norm[..., None] * (gout - y * inner)
