"""Finite-difference validation of the reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError
from .tensor import GradTape, Tensor

FD_STEP = np.float32(1e-3)


def grad_check(f, inputs, h: float = None, dtype=np.float64) -> float:
    """Max relative error between taped gradients and central differences.

    ``f`` maps the given tensors to a scalar Tensor. Error per coordinate is
    |autodiff - fd| / (|fd| + 1e-8) with central differences at a fixed step
    of 1e-3. Working copies of the inputs are float64 by default: the
    difference quotient cancels catastrophically in float32, leaving a noise
    floor far above the gradients being checked, so a float32 evaluation
    cannot certify anything at the tolerances this harness is used with.
    """
    step = np.asarray(FD_STEP if h is None else h, dtype=dtype)
    work = [Tensor(np.array(t.data, copy=True), requires_grad=True, dtype=dtype) for t in inputs]
    with GradTape() as tape:
        out = f(*work)
        tape.backward(out)
    if not np.isfinite(out.data).all():
        raise NumericError("grad_check: function value is not finite")

    max_rel = 0.0
    for t in work:
        ad = np.zeros_like(t.data) if t.grad is None else t.grad
        if not np.isfinite(ad).all():
            raise NumericError("grad_check: autodiff gradient is not finite")
        flat = t.data.reshape(-1)
        ad_flat = ad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(f(*work).data.reshape(()))
            flat[i] = orig - step
            down = float(f(*work).data.reshape(()))
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError("grad_check: perturbed function value is not finite")
            fd = (up - down) / (2.0 * float(step))
            rel = abs(float(ad_flat[i]) - fd) / (abs(fd) + 1e-8)
            max_rel = max(max_rel, rel)
    return max_rel
