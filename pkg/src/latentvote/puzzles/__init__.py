"""Sudoku and Maze generation, oracles, tokenization, and dataset files."""

from .data import (
    GENERATOR_VERSION,
    PuzzleInstance,
    PuzzleRecord,
    TaskShape,
    generate_records,
    load_dataset,
    maze_task_shape,
    record_from_maze,
    record_from_sudoku,
    save_dataset,
    sudoku_task_shape,
    tokenize_maze,
    tokenize_sudoku,
)
from .maze import MazeGrid, bfs_parents, maze_check, maze_generate, shortest_path_cells
from .sudoku import (
    SudokuBoard,
    SudokuTransform,
    random_full_grid,
    sudoku_augment,
    sudoku_check,
    sudoku_generate,
    sudoku_solve,
)

__all__ = [
    "GENERATOR_VERSION",
    "MazeGrid",
    "PuzzleInstance",
    "PuzzleRecord",
    "SudokuBoard",
    "SudokuTransform",
    "TaskShape",
    "bfs_parents",
    "generate_records",
    "load_dataset",
    "maze_check",
    "maze_generate",
    "maze_task_shape",
    "random_full_grid",
    "record_from_maze",
    "record_from_sudoku",
    "save_dataset",
    "shortest_path_cells",
    "sudoku_augment",
    "sudoku_check",
    "sudoku_generate",
    "sudoku_solve",
    "sudoku_task_shape",
    "tokenize_maze",
    "tokenize_sudoku",
]
