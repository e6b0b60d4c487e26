"""Evaluation, calibration, confidence traces, and seed sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..models.base import LatentState
from ..tensor import Tensor
from ..tensor.rng import Rng
from ..voting import (
    collect_candidates,
    confidence_top1,
    make_candidate,
    prediction_correct,
    vote_scan,
)


def evaluate(model, records, t_infer, K, metric="top1", temperature=1.0, seed=0,
             chunk=32):
    """Board and per-position accuracy with K-candidate voting."""
    per_k, rows = vote_scan(
        model, records, [K], metric=metric, seed=seed, t_infer=t_infer,
        temperature=temperature, chunk=chunk,
    )
    out = dict(per_k[K])
    out["rows"] = rows
    return out


def gather_position_logits(model, records, K, t_infer, seed=0, chunk=32):
    """Per-position readout logits and targets pooled over every candidate.

    Feeds the calibration report: each predicted position of each of the K
    trajectories contributes one (logits row, target) pair.
    """
    rng = Rng(seed)
    logits_rows = []
    target_rows = []
    for start in range(0, len(records), chunk):
        batch = records[start : start + chunk]
        instances = [rec.instance() for rec in batch]
        tokens = np.stack([inst.input_tokens for inst in instances])
        x_emb = model.embed(tokens)
        x_emb = Tensor(x_emb.data[:, None])
        length, chan = model.task.length, model.channels
        raw = np.stack(
            [
                np.stack([rng.split("cand", start + i, k).normal((length, chan))
                          for k in range(K)])
                for i in range(len(batch))
            ]
        )
        state = LatentState(Tensor(model.prepare_latent(raw)))
        if model.recurrent:
            for _ in range(t_infer):
                state = model.step(state, x_emb)
            logits = model.readout(state).data
        else:
            logits = model.forward(x_emb, state.z).data
        for i, inst in enumerate(instances):
            pos = inst.predicted_positions
            targets = inst.target_tokens[pos]
            for k in range(K):
                logits_rows.append(logits[i, k][pos])
                target_rows.append(targets)
    return np.concatenate(logits_rows, axis=0), np.concatenate(target_rows, axis=0)


@dataclass
class CalibrationReport:
    bin_lo: np.ndarray
    bin_hi: np.ndarray
    conf: np.ndarray
    acc: np.ndarray
    count: np.ndarray
    ece: float
    temperature: float

    def rows(self):
        out = []
        for i in range(len(self.count)):
            out.append(
                {
                    "bin_lo": float(self.bin_lo[i]),
                    "bin_hi": float(self.bin_hi[i]),
                    "conf": float(self.conf[i]),
                    "acc": float(self.acc[i]),
                    "count": int(self.count[i]),
                    "ece": self.ece,
                    "temperature": self.temperature,
                }
            )
        return out


def calibration_from_pairs(confidences, correctness, n_bins=10, temperature=1.0
                           ) -> CalibrationReport:
    """ECE and reliability-diagram bins from raw (confidence, correct) pairs.

    Equal-width bins partition [0, 1]; confidence exactly 1.0 lands in the
    last bin. ECE is the count-weighted mean absolute confidence/accuracy gap.
    """
    conf = np.asarray(confidences, dtype=np.float64)
    hit = np.asarray(correctness, dtype=np.float64)
    if conf.size == 0:
        raise ConfigError("calibration needs at least one record")
    if n_bins < 1:
        raise ConfigError(f"n_bins must be at least 1, got {n_bins}")
    idx = np.minimum((conf * n_bins).astype(np.int64), n_bins - 1)
    count = np.bincount(idx, minlength=n_bins)
    sum_conf = np.bincount(idx, weights=conf, minlength=n_bins)
    sum_hit = np.bincount(idx, weights=hit, minlength=n_bins)
    nonzero = count > 0
    mean_conf = np.zeros(n_bins)
    mean_acc = np.zeros(n_bins)
    mean_conf[nonzero] = sum_conf[nonzero] / count[nonzero]
    mean_acc[nonzero] = sum_hit[nonzero] / count[nonzero]
    ece = float((count / conf.size * np.abs(mean_acc - mean_conf)).sum())
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    return CalibrationReport(edges[:-1], edges[1:], mean_conf, mean_acc, count,
                             ece, temperature)


def calibration_report(logits, targets, n_bins=10, temperature=1.0) -> CalibrationReport:
    """Reliability statistics of pooled position predictions at a temperature."""
    scaled = np.asarray(logits, dtype=np.float64) / temperature
    scaled -= scaled.max(axis=-1, keepdims=True)
    probs = np.exp(scaled)
    probs /= probs.sum(axis=-1, keepdims=True)
    conf = probs.max(axis=-1)
    correct = probs.argmax(axis=-1) == np.asarray(targets)
    return calibration_from_pairs(conf, correct, n_bins, temperature)


def confidence_trace(model, record, K, t_infer, seed=0, temperature=1.0,
                     instance_index=0):
    """Per-step confidence of K candidates plus their final correctness.

    Returns {"confidence": [K, t_infer + 1], "correct": [K]}; step 0 scores
    the raw random latent before any update.
    """
    if not model.recurrent:
        raise ConfigError("confidence traces need a recurrent model")
    inst = record.instance()
    rng = Rng(seed)
    x_emb = model.embed(inst.input_tokens)
    length, chan = model.task.length, model.channels
    raw = np.stack(
        [rng.split("cand", instance_index, k).normal((length, chan)) for k in range(K)]
    )
    state = LatentState(Tensor(model.prepare_latent(raw)))
    conf = np.zeros((K, t_infer + 1), dtype=np.float64)

    def record_step(step, st):
        logits = model.readout(st).data
        for k in range(K):
            cand = make_candidate(k, logits[k], inst, temperature)
            conf[k, step] = cand.c_top1
        return logits

    record_step(0, state)
    for step in range(1, t_infer + 1):
        state = model.step(state, x_emb)
        logits = record_step(step, state)
    correct = np.zeros(K, dtype=bool)
    for k in range(K):
        cand = make_candidate(k, logits[k], inst, temperature)
        correct[k] = prediction_correct(record, inst, cand.labels)
    return {"confidence": conf, "correct": correct}


def seed_sweep(model, records, t_infer, k_list, metric="top1", temperature=1.0,
               seeds=(0, 1), chunk=32):
    """Evaluation repeated over seeds; returns per-seed rows and per-K
    median/min/max dispersion."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ConfigError(f"seed sweep needs at least 2 seeds, got {len(seeds)}")
    rows = []
    for seed in seeds:
        per_k, _ = vote_scan(model, records, list(k_list), metric=metric,
                             seed=seed, t_infer=t_infer, temperature=temperature,
                             chunk=chunk)
        for k, stats in per_k.items():
            rows.append(
                {
                    "seed": seed,
                    "K": k,
                    "board_acc": stats["board_accuracy"],
                    "pos_acc": stats["position_accuracy"],
                }
            )
    summary = {}
    for k in k_list:
        accs = np.array([r["board_acc"] for r in rows if r["K"] == k])
        summary[k] = {
            "median": float(np.median(accs)),
            "min": float(accs.min()),
            "max": float(accs.max()),
            "spread": float(accs.max() - accs.min()),
        }
    return rows, summary
