"""Tokenized instances and the line-oriented dataset file format.

A dataset file is JSONL: a header object {seed, generator_version, count}
followed by one record per line with {kind, input, target, meta}. Sudoku
strings are row-major digits with '0' for blanks; maze inputs use '#' wall,
'.' open, 'S' start, 'G' goal and targets use '*' for on-path cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DegenerateInstanceError, ParseError
from ..tensor.rng import Rng
from .maze import GOAL, OPEN, START, TAG_CHARS, WALL, MazeGrid, maze_generate
from .sudoku import SudokuBoard, sudoku_generate

GENERATOR_VERSION = 1


@dataclass
class PuzzleInstance:
    """Model-facing view of one puzzle: token ids, target classes, and the
    mask of positions to predict."""

    kind: str
    input_tokens: np.ndarray
    target_tokens: np.ndarray
    predicted_mask: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.predicted_mask.any():
            raise DegenerateInstanceError(f"{self.kind} instance has no positions to predict")

    @property
    def length(self) -> int:
        return int(self.input_tokens.shape[0])

    @property
    def predicted_positions(self) -> np.ndarray:
        return np.flatnonzero(self.predicted_mask)


@dataclass(frozen=True)
class TaskShape:
    """Token count, input vocabulary size, and class count for a task family."""

    kind: str
    length: int
    vocab: int
    classes: int
    box: int = 0
    dims: tuple = ()


def sudoku_task_shape(box: int) -> TaskShape:
    side = box * box
    return TaskShape("sudoku", side * side, side + 1, side, box=box)


def maze_task_shape(height: int, width: int) -> TaskShape:
    return TaskShape("maze", height * width, 4, 2, dims=(height, width))


def tokenize_sudoku(board: SudokuBoard, solution: SudokuBoard) -> PuzzleInstance:
    """Input vocab 0..side (0 = blank); target classes are digit-1; the
    predicted set is the blank cells."""
    inputs = np.array(board.cells, dtype=np.int64)
    targets = np.array(solution.cells, dtype=np.int64) - 1
    mask = inputs == 0
    return PuzzleInstance(
        "sudoku", inputs, targets, mask, {"box": board.box, "clues": board.clue_count()}
    )


def tokenize_maze(grid: MazeGrid, path_cells) -> PuzzleInstance:
    """Input vocab is the four cell tags; targets label every open cell
    (start and goal included) as on- or off-path."""
    inputs = np.array(grid.cells, dtype=np.int64)
    targets = np.zeros(len(grid.cells), dtype=np.int64)
    targets[list(path_cells)] = 1
    mask = inputs != WALL
    return PuzzleInstance(
        "maze",
        inputs,
        targets,
        mask,
        {"dims": (grid.height, grid.width), "path_len": len(path_cells) - 1},
    )


@dataclass(frozen=True)
class PuzzleRecord:
    """Serialized puzzle: the string form stored in dataset files."""

    kind: str
    input: str
    target: str
    meta: dict

    def board(self) -> SudokuBoard:
        box = int(self.meta["box"])
        return SudokuBoard(box, tuple(int(ch) for ch in self.input))

    def solution(self) -> SudokuBoard:
        box = int(self.meta["box"])
        return SudokuBoard(box, tuple(int(ch) for ch in self.target))

    def grid(self) -> MazeGrid:
        h, w = (int(d) for d in self.meta["dims"])
        return MazeGrid(h, w, tuple(TAG_CHARS.index(ch) for ch in self.input))

    def path_cells(self) -> tuple:
        return tuple(i for i, ch in enumerate(self.target) if ch == "*")

    def instance(self) -> PuzzleInstance:
        if self.kind == "sudoku":
            return tokenize_sudoku(self.board(), self.solution())
        return tokenize_maze(self.grid(), self.path_cells())

    def task_shape(self) -> TaskShape:
        if self.kind == "sudoku":
            return sudoku_task_shape(int(self.meta["box"]))
        h, w = (int(d) for d in self.meta["dims"])
        return maze_task_shape(h, w)


def record_from_sudoku(board: SudokuBoard, solution: SudokuBoard) -> PuzzleRecord:
    return PuzzleRecord(
        "sudoku", str(board), str(solution), {"box": board.box, "clues": board.clue_count()}
    )


def record_from_maze(grid: MazeGrid, path_cells) -> PuzzleRecord:
    target = ["#" if t == WALL else "." for t in grid.cells]
    for idx in path_cells:
        target[idx] = "*"
    return PuzzleRecord(
        "maze",
        str(grid),
        "".join(target),
        {"dims": [grid.height, grid.width], "path_len": len(path_cells) - 1},
    )


def generate_records(kind: str, count: int, seed: int, **params) -> list:
    """Deterministic instance stream: record i depends only on (seed, i)."""
    records = []
    base = Rng(seed)
    for i in range(count):
        rng = base.split("instance", i)
        if kind == "sudoku":
            board, solution = sudoku_generate(
                rng, params["box"], params["clues_min"], params["clues_max"]
            )
            records.append(record_from_sudoku(board, solution))
        elif kind == "maze":
            grid, path = maze_generate(
                rng, params["height"], params["width"], params["min_path_len"]
            )
            records.append(record_from_maze(grid, path))
        else:
            raise ConfigError(f"unknown puzzle kind {kind!r}")
    return records


def save_dataset(path, records, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"seed": seed, "generator_version": GENERATOR_VERSION, "count": len(records)}
        fh.write(json.dumps(header) + "\n")
        for rec in records:
            fh.write(
                json.dumps(
                    {"kind": rec.kind, "input": rec.input, "target": rec.target, "meta": rec.meta}
                )
                + "\n"
            )


def _check_sudoku_record(rec: PuzzleRecord, line: int) -> None:
    box = int(rec.meta.get("box", 0))
    expected = box**4
    if box not in (2, 3):
        raise ParseError(f"sudoku box must be 2 or 3, got {box}", line)
    for label, text in (("input", rec.input), ("target", rec.target)):
        if len(text) != expected:
            raise ParseError(f"sudoku {label} needs {expected} chars, got {len(text)}", line)
        if not all(ch.isdigit() and int(ch) <= box * box for ch in text):
            raise ParseError(f"sudoku {label} has characters outside 0..{box * box}", line)
    clues = sum(1 for ch in rec.input if ch != "0")
    if clues != int(rec.meta.get("clues", -1)):
        raise ParseError(f"clue count {rec.meta.get('clues')} does not match recount {clues}", line)


def _check_maze_record(rec: PuzzleRecord, line: int) -> None:
    try:
        h, w = (int(d) for d in rec.meta["dims"])
    except (KeyError, TypeError, ValueError):
        raise ParseError("maze record missing dims", line) from None
    if len(rec.input) != h * w or len(rec.target) != h * w:
        raise ParseError(f"maze strings need {h * w} chars", line)
    if any(ch not in TAG_CHARS for ch in rec.input):
        raise ParseError("maze input has characters outside '#.SG'", line)
    if any(ch not in "#.*" for ch in rec.target):
        raise ParseError("maze target has characters outside '#.*'", line)
    path_len = sum(1 for ch in rec.target if ch == "*") - 1
    if path_len != int(rec.meta.get("path_len", -2)):
        raise ParseError(
            f"path length {rec.meta.get('path_len')} does not match recount {path_len}", line
        )


def load_dataset(path):
    """Parse a dataset file; returns (header, records). Raises ParseError
    with the offending line number on any malformed content."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty dataset file", 1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad header JSON: {exc}", 1) from None
    for key in ("seed", "generator_version", "count"):
        if key not in header:
            raise ParseError(f"header missing {key!r}", 1)
    records = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad record JSON: {exc}", lineno) from None
        try:
            rec = PuzzleRecord(obj["kind"], obj["input"], obj["target"], obj["meta"])
        except KeyError as exc:
            raise ParseError(f"record missing field {exc}", lineno) from None
        if rec.kind == "sudoku":
            _check_sudoku_record(rec, lineno)
        elif rec.kind == "maze":
            _check_maze_record(rec, lineno)
        else:
            raise ParseError(f"unknown kind {rec.kind!r}", lineno)
        records.append(rec)
    if len(records) != int(header["count"]):
        raise ParseError(
            f"header count {header['count']} does not match {len(records)} records", 1
        )
    return header, records
