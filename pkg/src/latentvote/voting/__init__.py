"""Test-time candidate selection over K randomly initialized trajectories.

Each candidate is one rollout from its own Gaussian initialization; selection
is either by confidence (average top-1 probability over the predicted
positions, or the negative-entropy / log-probability variants) or by final
energy for models that define one. Ties break to the lowest candidate index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    ConfigError,
    DegenerateInstanceError,
    StrategyUnavailableError,
)
from ..puzzles.data import PuzzleInstance, PuzzleRecord
from ..puzzles.maze import maze_check
from ..puzzles.sudoku import SudokuBoard, sudoku_check
from ..tensor import Tensor
from ..tensor.rng import Rng

CONFIDENCE_METRICS = ("top1", "ne", "lp")
VOTE_METRICS = CONFIDENCE_METRICS + ("energy",)


@dataclass
class CandidateResult:
    """One trajectory's prediction: class probabilities over the predicted
    positions, its confidence scalars, and (when defined) its energy."""

    candidate_id: int
    probs: np.ndarray  # [n_positions, classes], rows sum to 1
    labels: np.ndarray  # argmax class per predicted position
    c_top1: float
    c_neg_entropy: float
    c_logprob: float
    energy: float = None

    def score(self, metric: str) -> float:
        if metric == "top1":
            return self.c_top1
        if metric == "ne":
            return self.c_neg_entropy
        if metric == "lp":
            return self.c_logprob
        raise ConfigError(f"unknown confidence metric {metric!r}")


@dataclass
class VoteOutcome:
    selected: int
    scores: np.ndarray  # per-candidate score table in candidate order
    labels: np.ndarray  # the selected candidate's per-position argmax
    metric: str


def candidate_probs(logits, predicted_positions, temperature: float = 1.0) -> np.ndarray:
    """Temperature-scaled class probabilities at the predicted positions.

    ``logits`` is [length, classes] (Tensor or array); rows are restricted to
    the predicted set before the softmax over classes.
    """
    if temperature <= 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    arr = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    positions = np.asarray(predicted_positions)
    if positions.dtype == bool:
        positions = np.flatnonzero(positions)
    if positions.size == 0:
        raise DegenerateInstanceError("no predicted positions to score")
    rows = arr[positions].astype(np.float64) / temperature
    rows -= rows.max(axis=-1, keepdims=True)
    np.exp(rows, out=rows)
    rows /= rows.sum(axis=-1, keepdims=True)
    return rows.astype(np.float32)


def confidence_top1(probs: np.ndarray) -> float:
    """Average top-1 probability over the predicted positions."""
    return float(probs.max(axis=-1).mean())


def confidence_neg_entropy(probs: np.ndarray) -> float:
    """Average negative entropy, with 0 log 0 taken as 0; one-hot gives 0."""
    p = np.asarray(probs, dtype=np.float64)
    terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return float(terms.sum(axis=-1).mean())


def confidence_logprob(probs: np.ndarray) -> float:
    """Average max-class log probability; equals log of the top-1 probability."""
    p = np.asarray(probs, dtype=np.float64).max(axis=-1)
    return float(np.log(p).mean())


def make_candidate(candidate_id, logits, instance: PuzzleInstance,
                   temperature: float = 1.0, energy=None) -> CandidateResult:
    probs = candidate_probs(logits, instance.predicted_mask, temperature)
    return CandidateResult(
        candidate_id=candidate_id,
        probs=probs,
        labels=probs.argmax(axis=-1),
        c_top1=confidence_top1(probs),
        c_neg_entropy=confidence_neg_entropy(probs),
        c_logprob=confidence_logprob(probs),
        energy=None if energy is None else float(energy),
    )


def c_vote(candidates, metric: str = "top1") -> VoteOutcome:
    """Pick the candidate with maximal confidence; ties go to the lowest k."""
    if not candidates:
        raise ConfigError("c_vote needs at least one candidate")
    if metric not in CONFIDENCE_METRICS:
        raise ConfigError(f"c_vote metric must be one of {CONFIDENCE_METRICS}, got {metric!r}")
    scores = np.array([c.score(metric) for c in candidates], dtype=np.float64)
    selected = int(np.argmax(scores))
    return VoteOutcome(selected, scores, candidates[selected].labels.copy(), metric)


def e_vote(candidates) -> VoteOutcome:
    """Pick the candidate with minimal energy; requires an explicit energy."""
    if not candidates:
        raise ConfigError("e_vote needs at least one candidate")
    missing = [c.candidate_id for c in candidates if c.energy is None]
    if missing:
        raise StrategyUnavailableError(
            "energy voting needs an explicit energy; candidate(s) "
            f"{missing} have none (model without an energy function)"
        )
    scores = np.array([c.energy for c in candidates], dtype=np.float64)
    selected = int(np.argmin(scores))
    return VoteOutcome(selected, scores, candidates[selected].labels.copy(), "energy")


def vote(candidates, metric: str) -> VoteOutcome:
    if metric == "energy":
        return e_vote(candidates)
    return c_vote(candidates, metric)


def prediction_correct(record: PuzzleRecord, instance: PuzzleInstance, labels) -> bool:
    """Board-level correctness of per-position labels.

    Sudoku: fill the blanks (clues preserved) and check every constraint.
    Maze: the cells labeled on-path must form a shortest start-goal path.
    """
    positions = instance.predicted_positions
    if record.kind == "sudoku":
        cells = list(record.board().cells)
        for pos, label in zip(positions, labels):
            cells[pos] = int(label) + 1
        return sudoku_check(SudokuBoard(record.board().box, tuple(cells)))
    on_path = positions[np.asarray(labels, dtype=np.int64) == 1]
    return maze_check(record.grid(), on_path)


def collect_candidates(model, records, K: int, t_infer: int, rng: Rng,
                       temperature: float = 1.0, index_offset: int = 0):
    """Roll out K candidates for each record, batched over both axes.

    Candidate (i, k)'s initialization is a pure function of the rng root and
    the global instance index ``index_offset + i``. Returns a list of
    candidate lists aligned with ``records``.
    """
    if K < 1:
        raise ConfigError(f"candidate count must be at least 1, got {K}")
    instances = [rec.instance() for rec in records]
    length = instances[0].length
    chan = model.channels
    tokens = np.stack([inst.input_tokens for inst in instances])
    x_emb = model.embed(tokens)
    x_emb = Tensor(x_emb.data[:, None])  # broadcast over candidates
    raw = np.stack(
        [
            np.stack(
                [rng.split("cand", index_offset + i, k).normal((length, chan)) for k in range(K)]
            )
            for i in range(len(records))
        ]
    )
    z0 = Tensor(model.prepare_latent(raw))
    if model.recurrent:
        from ..models.base import LatentState

        state = LatentState(z0)
        for _ in range(t_infer):
            state = model.step(state, x_emb)
        logits = model.readout(state)
        energies = model.energy(state, x_emb).data if model.has_energy else None
    else:
        logits = model.forward(x_emb, z0)
        energies = None
    logits_np = logits.data
    out = []
    for i, (rec, inst) in enumerate(zip(records, instances)):
        out.append(
            [
                make_candidate(
                    k,
                    logits_np[i, k],
                    inst,
                    temperature,
                    energy=None if energies is None else energies[i, k],
                )
                for k in range(K)
            ]
        )
    return out


def vote_scan(model, records, k_list, metric: str = "top1", seed: int = 0,
              t_infer: int = 8, temperature: float = 1.0, chunk: int = 32):
    """Board accuracy per K with shared candidates across K values.

    Every instance draws max(k_list) candidates once; each K votes over the
    first K of them, so the scaling curve compares the same samples.
    Returns (per_k, rows): per_k maps K to board accuracy, rows carry one
    vote record per (instance, K) for the JSONL trace export.
    """
    k_list = list(k_list)
    if k_list != sorted(k_list) or any(k < 1 for k in k_list):
        raise ConfigError(f"k_list must be ascending positive integers, got {k_list}")
    if metric not in VOTE_METRICS:
        raise ConfigError(f"metric must be one of {VOTE_METRICS}, got {metric!r}")
    if metric == "energy" and not model.has_energy:
        raise StrategyUnavailableError("energy voting is unavailable for this model")
    k_max = max(k_list)
    rng = Rng(seed)
    correct = {k: 0 for k in k_list}
    position_hits = {k: 0 for k in k_list}
    position_total = 0
    rows = []
    for start in range(0, len(records), chunk):
        batch = records[start : start + chunk]
        candidate_lists = collect_candidates(
            model, batch, k_max, t_infer, rng, temperature, index_offset=start
        )
        for local, (rec, candidates) in enumerate(zip(batch, candidate_lists)):
            inst = rec.instance()
            targets = inst.target_tokens[inst.predicted_positions]
            position_total += targets.size
            for k in k_list:
                outcome = vote(candidates[:k], metric)
                ok = prediction_correct(rec, inst, outcome.labels)
                correct[k] += ok
                position_hits[k] += int((outcome.labels == targets).sum())
                rows.append(
                    {
                        "instance": start + local,
                        "K": k,
                        "k_star": outcome.selected,
                        "scores": [float(s) for s in outcome.scores],
                        "metric": metric,
                        "board_correct": bool(ok),
                    }
                )
    n = len(records)
    per_k = {
        k: {
            "board_accuracy": correct[k] / n,
            "position_accuracy": position_hits[k] / position_total,
        }
        for k in k_list
    }
    return per_k, rows
