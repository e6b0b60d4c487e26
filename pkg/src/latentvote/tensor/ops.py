"""Differentiable operations over :class:`Tensor`.

Elementwise and matmul ops broadcast over leading batch dimensions;
reductions in the backward pass undo the broadcast. Row-wise ops (softmax,
rmsnorm, unit normalization, silu/sigmoid) run on the selected kernel lane.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, ShapeError
from . import _kernels_py
from .backend import kernels as _selected_kernels
from .rng import Rng
from .tensor import Tensor, tape_result

RMSNORM_EPS = 1e-6


def _kern(*arrays: np.ndarray):
    """Compiled lane handles float32; anything else runs the numpy lane."""
    if all(a.dtype == np.float32 for a in arrays):
        return _selected_kernels
    return _kernels_py


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the input's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape)) if sd == 1 and gd != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape))]

    return tape_result(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape))]

    return tape_result(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return [
            (a, _unbroadcast(g * b.data, a.shape)),
            (b, _unbroadcast(g * a.data, b.shape)),
        ]

    return tape_result(a.data * b.data, (a, b), backward)


def scale(a: Tensor, s) -> Tensor:
    s = float(s)

    def backward(g):
        return [(a, (g * np.float32(s)))]

    return tape_result(a.data * np.float32(s), (a,), backward)


def add_scalar(a: Tensor, s) -> Tensor:
    def backward(g):
        return [(a, g)]

    return tape_result(a.data + np.float32(float(s)), (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions disagree: {a.shape} vs {b.shape}")
    out = a.data @ b.data

    def backward(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a, _unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape)))
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                # Weight gradient: collapse the batch into one GEMM instead of
                # a stack of per-sample products that then get summed.
                cols = a.shape[-1]
                flat_a = np.ascontiguousarray(a.data).reshape(-1, cols)
                flat_g = np.ascontiguousarray(g).reshape(-1, g.shape[-1])
                pairs.append((b, flat_a.T @ flat_g))
            else:
                pairs.append((b, _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape)))
        return pairs

    return tape_result(out, (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    orig = a.shape

    def backward(g):
        return [(a, g.reshape(orig))]

    return tape_result(a.data.reshape(shape), (a,), backward)


def swapaxes(a: Tensor, ax0: int, ax1: int) -> Tensor:
    def backward(g):
        return [(a, g.swapaxes(ax0, ax1))]

    # A strided view is enough; numpy copies lazily where BLAS needs it.
    return tape_result(a.data.swapaxes(ax0, ax1), (a,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return list(zip(tensors, np.split(g, splits, axis=axis)))

    return tape_result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims, dtype=a.data.dtype)

    def backward(g):
        if axis is None:
            return [(a, np.ascontiguousarray(np.broadcast_to(g.reshape(() if not keepdims else g.shape), a.shape)))]
        gg = g if keepdims else np.expand_dims(g, axis)
        return [(a, np.ascontiguousarray(np.broadcast_to(gg, a.shape)))]

    return tape_result(out, (a,), backward)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def _to_rows(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr).reshape(-1, arr.shape[-1])


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along ``axis``; slices sum to one."""
    ax = axis if axis >= 0 else a.ndim + axis
    if not 0 <= ax < a.ndim:
        raise ShapeError(f"softmax: axis {axis} invalid for shape {a.shape}")
    moved = np.moveaxis(a.data, ax, -1)
    rows = _to_rows(moved)
    y_rows = _kern(rows).softmax_fwd(rows)
    out = np.ascontiguousarray(np.moveaxis(y_rows.reshape(moved.shape), -1, ax))

    def backward(g):
        g_rows = _to_rows(np.moveaxis(g, ax, -1))
        gx = _kern(g_rows, y_rows).softmax_bwd(y_rows, g_rows).reshape(moved.shape)
        return [(a, np.ascontiguousarray(np.moveaxis(gx, -1, ax)))]

    return tape_result(out, (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    ax = axis if axis >= 0 else a.ndim + axis
    if not 0 <= ax < a.ndim:
        raise ShapeError(f"log_softmax: axis {axis} invalid for shape {a.shape}")
    moved = np.moveaxis(a.data, ax, -1)
    rows = _to_rows(moved)
    y_rows = _kern(rows).log_softmax_fwd(rows)
    out = np.ascontiguousarray(np.moveaxis(y_rows.reshape(moved.shape), -1, ax))

    def backward(g):
        g_rows = _to_rows(np.moveaxis(g, ax, -1))
        gx = _kern(g_rows, y_rows).log_softmax_bwd(y_rows, g_rows).reshape(moved.shape)
        return [(a, np.ascontiguousarray(np.moveaxis(gx, -1, ax)))]

    return tape_result(out, (a,), backward)


def rmsnorm(a: Tensor, gain: Tensor) -> Tensor:
    """Each trailing-axis row scaled to unit RMS (eps-regularized), times gain."""
    cols = a.shape[-1]
    if gain.shape != (cols,):
        raise ShapeError(f"rmsnorm: gain shape {gain.shape} does not match columns {cols}")
    rows = _to_rows(a.data)
    y_rows, inv_rms = _kern(rows, gain.data).rmsnorm_fwd(rows, gain.data, RMSNORM_EPS)

    def backward(g):
        g_rows = _to_rows(g)
        gx, ggain = _kern(g_rows, rows, gain.data).rmsnorm_bwd(rows, gain.data, inv_rms, g_rows)
        return [(a, gx.reshape(a.shape)), (gain, ggain)]

    return tape_result(y_rows.reshape(a.shape), (a, gain), backward)


def unit_normalize(a: Tensor) -> Tensor:
    """Trailing-axis rows scaled to exactly unit Euclidean norm.

    Rows must be nonzero; callers guard degenerate rows before normalizing.
    """
    rows = _to_rows(a.data)
    y_rows, inv_norm = _kern(rows).unit_normalize_fwd(rows)

    def backward(g):
        g_rows = _to_rows(g)
        gx = _kern(g_rows, y_rows).unit_normalize_bwd(y_rows, inv_norm, g_rows)
        return [(a, gx.reshape(a.shape))]

    return tape_result(y_rows.reshape(a.shape), (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    y = _kern(a.data).sigmoid_fwd(a.data)

    def backward(g):
        return [(a, _kern(y, g).sigmoid_bwd(y, g))]

    return tape_result(y, (a,), backward)


def silu(a: Tensor) -> Tensor:
    s = _kern(a.data).sigmoid_fwd(a.data)
    y = a.data * s

    def backward(g):
        # Reuses the forward sigmoid: dsilu/dx = s * (1 + x * (1 - s)).
        return [(a, g * (s * (1.0 + a.data * (1.0 - s))))]

    return tape_result(y, (a,), backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup into ``table``; scatter-add adjoint into the table."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(
            f"embedding: index outside table of {table.shape[0]} rows "
            f"(got range {ids.min()}..{ids.max()})"
        )

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return [(table, gt)]

    return tape_result(table.data[ids], (table,), backward)


def detach(a: Tensor) -> Tensor:
    return a.detach()


def gaussian_init(rng: Rng, shape) -> Tensor:
    """Standard-normal tensor, deterministic in the rng state."""
    return Tensor(rng.normal(tuple(shape)))


def swiglu(x: Tensor, w_gate: Tensor, w_up: Tensor, w_down: Tensor) -> Tensor:
    """Gated feed-forward: silu(x @ w_gate) * (x @ w_up), projected back down."""
    return matmul(mul(silu(matmul(x, w_gate)), matmul(x, w_up)), w_down)


def _split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, length, chan = x.shape
    head_dim = chan // heads
    return swapaxes(reshape(x, (*lead, length, heads, head_dim)), -3, -2)


def _merge_heads(x: Tensor) -> Tensor:
    *lead, heads, length, head_dim = x.shape
    return reshape(swapaxes(x, -3, -2), (*lead, length, heads * head_dim))


def multi_head_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    wq: Tensor,
    wk: Tensor,
    wv: Tensor,
    wo: Tensor,
    heads: int,
) -> Tensor:
    """Scaled dot-product attention with per-head dim C/heads and output projection."""
    chan = q.shape[-1]
    if chan % heads:
        raise ConfigError(f"attention: embed dim {chan} not divisible by {heads} heads")
    head_dim = chan // heads
    qh = _split_heads(matmul(q, wq), heads)
    kh = _split_heads(matmul(k, wk), heads)
    vh = _split_heads(matmul(v, wv), heads)
    scores = scale(matmul(qh, swapaxes(kh, -1, -2)), 1.0 / math.sqrt(head_dim))
    weights = softmax(scores, axis=-1)
    return matmul(_merge_heads(matmul(weights, vh)), wo)


def attention_coupling(
    z: Tensor, wq: Tensor, wk: Tensor, heads: int, symmetric: bool = False
) -> Tensor:
    """Attention-weighted mixing of ``z`` itself: per-head weights applied to
    the matching per-head slice, with no value or output projection.

    With ``symmetric`` the weight matrix is averaged with its transpose, which
    makes the induced quadratic form well-defined for the energy readout.
    """
    chan = z.shape[-1]
    if chan % heads:
        raise ConfigError(f"attention: embed dim {chan} not divisible by {heads} heads")
    head_dim = chan // heads
    qh = _split_heads(matmul(z, wq), heads)
    kh = _split_heads(matmul(z, wk), heads)
    weights = softmax(scale(matmul(qh, swapaxes(kh, -1, -2)), 1.0 / math.sqrt(head_dim)), axis=-1)
    if symmetric:
        weights = scale(add(weights, swapaxes(weights, -1, -2)), 0.5)
    return _merge_heads(matmul(weights, _split_heads(z, heads)))
