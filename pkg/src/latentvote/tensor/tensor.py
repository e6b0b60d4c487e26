"""Dense float32 tensors with a reverse-mode gradient tape.

The tape is a Wengert list: operations append themselves in execution order
while a ``GradTape`` is active, and ``backward`` replays their adjoints in
reverse. With no active tape (the inference path) operations record nothing
and outputs never require gradients.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

_ACTIVE_TAPE = None


class Tensor:
    """Row-major float32 array, immutable by convention once built.

    ``requires_grad`` leaves accumulate into ``grad`` when a tape replays;
    tensors produced by operations are intermediates and never hold ``grad``
    themselves.
    """

    __slots__ = ("data", "requires_grad", "grad", "is_leaf", "name")

    def __init__(self, data, requires_grad=False, name=None, dtype=np.float32):
        arr = np.asarray(data, dtype=dtype)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.is_leaf = True
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Same values, no tape participation; idempotent."""
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    # Operators delegate to the functional ops module (imported lazily to
    # avoid a cycle at package import time).
    def __add__(self, other):
        from . import ops

        return ops.add_scalar(self, other) if _is_scalar(other) else ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        if _is_scalar(other):
            return ops.add_scalar(self, -other)
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.add_scalar(ops.scale(self, -1.0), other)

    def __mul__(self, other):
        from . import ops

        return ops.scale(self, other) if _is_scalar(other) else ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops

        if not _is_scalar(other):
            raise ShapeError("tensor division is only supported by scalars")
        return ops.scale(self, 1.0 / other)

    def __neg__(self):
        from . import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"


def _is_scalar(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating))


class GradTape:
    """Ordered record of executed operations and their adjoint closures."""

    def __init__(self):
        self._records = []
        self._consumed = False

    def __enter__(self) -> "GradTape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a GradTape is already active in this context")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def record(self, out: Tensor, backward) -> None:
        """backward(g) -> iterable of (input_tensor, grad_contribution)."""
        self._records.append((out, backward))

    def __len__(self) -> int:
        return len(self._records)

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every reachable requires_grad leaf.

        Clears the tape afterwards; a tape drives exactly one backward pass.
        """
        if self._consumed:
            raise RuntimeError("this tape has already been replayed")
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        adjoints = {id(loss): np.ones_like(loss.data)}
        for out, backward in reversed(self._records):
            g = adjoints.pop(id(out), None)
            if g is None:
                continue
            for inp, contrib in backward(g):
                if contrib is None or not inp.requires_grad:
                    continue
                if inp.is_leaf:
                    inp.accumulate_grad(contrib)
                else:
                    held = adjoints.get(id(inp))
                    # Adjoints may alias closure-held buffers, so accumulation
                    # is out-of-place; a single contribution is stored as-is.
                    adjoints[id(inp)] = contrib if held is None else held + contrib
        self._records.clear()
        self._consumed = True


def active_tape():
    return _ACTIVE_TAPE


def tape_result(data: np.ndarray, inputs, backward) -> Tensor:
    """Build an op output, recording its adjoint if a tape is listening.

    The output keeps whatever dtype the computation produced, so float64
    leaves (the grad_check harness) stay float64 end to end.
    """
    arr = np.asarray(data)
    out = Tensor(arr, dtype=arr.dtype)
    tape = _ACTIVE_TAPE
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.is_leaf = False
        tape.record(out, backward)
    return out
