"""Training loop: fresh Gaussian latents per batch, truncated backprop through
the recurrence, global-norm clipping, Adam(W), and an EMA shadow for eval."""

from __future__ import annotations

import csv
import logging
import os
import time

import numpy as np

from ..errors import ConfigError, NumericError
from ..models import build_model, save_checkpoint, task_to_dict
from ..models.base import LatentState
from ..puzzles.data import generate_records, load_dataset, tokenize_sudoku
from ..puzzles.sudoku import SudokuTransform
from ..tensor import GradTape, Tensor, log_softmax, mul, scale, tsum
from ..tensor.rng import Rng
from ..voting import vote_scan
from .config import RunConfig
from .optim import Adam, Ema, clip_global_norm

log = logging.getLogger(__name__)

METRICS_FIELDS = ("epoch", "step", "loss", "grad_norm", "lr")


def cross_entropy_loss(logits, targets: np.ndarray, mask: np.ndarray):
    """Mean cross-entropy over the predicted positions only."""
    classes = logits.shape[-1]
    count = int(mask.sum())
    if count == 0:
        raise ConfigError("loss needs at least one predicted position")
    pick = np.eye(classes, dtype=np.float32)[targets] * mask[..., None]
    return scale(tsum(mul(log_softmax(logits, axis=-1), Tensor(pick))), -1.0 / count)


def train_step(model, tokens, targets, mask, optimizer, ema, rng, t_train, t_detach,
               grad_clip, lr):
    """One batch update; returns loss and pre-clip gradient norm.

    Every instance gets a fresh Gaussian initial latent; the latent is
    detached at step t_detach so backprop covers only the trailing steps.
    """
    batch_shape = tokens.shape[:-1]
    raw = rng.normal(batch_shape + (model.task.length, model.channels))
    z0 = Tensor(model.prepare_latent(raw))
    with GradTape() as tape:
        x_emb = model.embed(tokens)
        state = LatentState(z0)
        for _ in range(t_train):
            state = model.step(state, x_emb)
            if state.t == t_detach:
                state = LatentState(state.z.detach(), state.t)
        logits = model.readout(state)
        loss = cross_entropy_loss(logits, targets, mask)
        loss_value = loss.item()
        if not np.isfinite(loss_value):
            raise NumericError(
                f"non-finite loss {loss_value} at optimizer step {optimizer.step_count + 1}"
            )
        tape.backward(loss)
    grad_norm = clip_global_norm(optimizer.params, grad_clip)
    optimizer.step(lr)
    optimizer.zero_grad()
    ema.update(optimizer.params)
    return {"loss": loss_value, "grad_norm": grad_norm}


def _load_records(data):
    if data.train_path:
        train = load_dataset(data.train_path)[1]
    else:
        train = generate_records(data.kind, data.train_count, data.seed,
                                 stream="train", **_gen_params(data))
    if data.test_path:
        test = load_dataset(data.test_path)[1]
    else:
        test = generate_records(data.kind, data.test_count, data.seed,
                                stream="test", **_gen_params(data))
    return train, test


def _gen_params(data):
    if data.kind == "sudoku":
        return {"box": data.box, "clues_min": data.clues_min, "clues_max": data.clues_max}
    return {"height": data.height, "width": data.width, "min_path_len": data.min_path_len}


def _tokenize_all(records):
    instances = [rec.instance() for rec in records]
    tokens = np.stack([inst.input_tokens for inst in instances])
    targets = np.stack([inst.target_tokens for inst in instances])
    masks = np.stack([inst.predicted_mask for inst in instances])
    return tokens, targets, masks


def _augmented_epoch(records, seed, epoch):
    """Fresh random Sudoku symmetry per instance per epoch."""
    out = []
    base = Rng(seed)
    for i, rec in enumerate(records):
        t = SudokuTransform.random(base.split("aug", epoch, i), rec.board().box)
        out.append(tokenize_sudoku(t.apply(rec.board()), t.apply(rec.solution())))
    tokens = np.stack([inst.input_tokens for inst in out])
    targets = np.stack([inst.target_tokens for inst in out])
    masks = np.stack([inst.predicted_mask for inst in out])
    return tokens, targets, masks


def train_run(cfg: RunConfig, ckpt_path, metrics_path, resume: bool = False,
              progress=None):
    """Train per the config; writes the checkpoint and metrics CSV.

    Stops early once the K=1 board accuracy on the held-out subset has not
    improved for ``early_stop_patience`` consecutive evaluations.
    """
    cfg.validate()
    t = cfg.train
    task = cfg.task_shape()
    train_records, test_records = _load_records(cfg.data)
    eval_records = test_records[: t.eval_subset] if t.eval_subset else test_records
    model = build_model(cfg.model.kind, cfg.model.params, task, Rng(cfg.seed).split("init"))
    optimizer = Adam(
        model.parameters(),
        lr=t.lr,
        beta1=t.beta1,
        beta2=t.beta2,
        weight_decay=t.weight_decay,
        decoupled=(t.optimizer == "adamw"),
    )
    ema = Ema(model.parameters(), t.ema_decay)

    start_epoch = 0
    global_step = 0
    best_acc = -1.0
    evals_since_best = 0
    if resume:
        from ..models import load_checkpoint

        header, sections = load_checkpoint(ckpt_path)
        model.load_parameters(sections["live"])
        ema.load(sections["ema"])
        optimizer.load_state(sections["opt_m"], sections["opt_v"],
                             header["counters"]["opt_step"])
        start_epoch = int(header["counters"]["next_epoch"])
        global_step = int(header["counters"]["global_step"])
        best_acc = float(header["counters"]["best_acc"])
        evals_since_best = int(header["counters"]["evals_since_best"])

    tokens, targets, masks = _tokenize_all(train_records)
    mode = "a" if resume and os.path.exists(metrics_path) else "w"
    t_start = time.time()
    realized_epochs = start_epoch
    with open(metrics_path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(METRICS_FIELDS)
        stop = False
        for epoch in range(start_epoch, t.epochs):
            if t.augment and cfg.data.kind == "sudoku":
                tokens, targets, masks = _augmented_epoch(train_records, cfg.seed, epoch)
            order = Rng(cfg.seed).split("order", epoch).permutation(len(train_records))
            for bstart in range(0, len(order), t.batch_size):
                idx = order[bstart : bstart + t.batch_size]
                lr = t.lr * min(1.0, (global_step + 1) / t.warmup_steps) if t.warmup_steps else t.lr
                metrics = train_step(
                    model, tokens[idx], targets[idx], masks[idx],
                    optimizer, ema,
                    Rng(cfg.seed).split("train_z", epoch, bstart),
                    t.t_train, t.t_detach, t.grad_clip, lr,
                )
                global_step += 1
                writer.writerow(
                    [epoch, global_step, f"{metrics['loss']:.6f}",
                     f"{metrics['grad_norm']:.6f}", f"{lr:.8f}"]
                )
            realized_epochs = epoch + 1
            last = epoch + 1 == t.epochs
            if (epoch + 1) % t.eval_every == 0 or last:
                with ema.swap(model):
                    per_k, _ = vote_scan(
                        model, eval_records, [1], metric="top1",
                        seed=cfg.eval.seed, t_infer=cfg.t_infer(),
                        temperature=cfg.eval.temperature,
                    )
                acc = per_k[1]["board_accuracy"]
                if progress:
                    progress(
                        f"epoch {epoch + 1}: loss {metrics['loss']:.4f} "
                        f"eval board acc {acc:.3f} ({time.time() - t_start:.0f}s)"
                    )
                if acc > best_acc + 1e-9:
                    best_acc = acc
                    evals_since_best = 0
                else:
                    evals_since_best += 1
                _save(ckpt_path, cfg, task, model, ema, optimizer, epoch + 1,
                      global_step, best_acc, evals_since_best, realized_epochs)
                if evals_since_best >= t.early_stop_patience:
                    stop = True
            if stop:
                break
    _save(ckpt_path, cfg, task, model, ema, optimizer, realized_epochs,
          global_step, best_acc, evals_since_best, realized_epochs)
    return {
        "realized_epochs": realized_epochs,
        "global_step": global_step,
        "best_eval_board_acc": best_acc,
        "seconds": time.time() - t_start,
    }


def _save(path, cfg, task, model, ema, optimizer, next_epoch, global_step,
          best_acc, evals_since_best, realized_epochs):
    live = {name: t.data for name, t in model.parameters()}
    m, v = optimizer.state_arrays()
    header = {
        "format": 1,
        "model": {"kind": cfg.model.kind, "config": cfg.model.params},
        "task": task_to_dict(task),
        "run_config": cfg.to_flat(),
        "counters": {
            "next_epoch": next_epoch,
            "global_step": global_step,
            "opt_step": optimizer.step_count,
            "best_acc": best_acc,
            "evals_since_best": evals_since_best,
            "realized_epochs": realized_epochs,
        },
    }
    save_checkpoint(path, header, {"live": live, "ema": ema.arrays(), "opt_m": m, "opt_v": v})
