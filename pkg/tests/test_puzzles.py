import itertools
import json

import numpy as np
import pytest

from latentvote.errors import (
    ConfigError,
    DegenerateInstanceError,
    FormatError,
    ParseError,
)
from latentvote.puzzles import (
    MazeGrid,
    PuzzleRecord,
    SudokuBoard,
    SudokuTransform,
    load_dataset,
    maze_check,
    maze_generate,
    record_from_maze,
    record_from_sudoku,
    save_dataset,
    shortest_path_cells,
    sudoku_augment,
    sudoku_check,
    sudoku_generate,
    sudoku_solve,
    tokenize_maze,
    tokenize_sudoku,
)
from latentvote.puzzles.maze import GOAL, OPEN, START, WALL, bfs_parents
from latentvote.tensor.rng import Rng

SOLVED_4X4 = SudokuBoard(2, (1, 2, 3, 4, 3, 4, 1, 2, 2, 1, 4, 3, 4, 3, 2, 1))


class TestSudokuCheck:
    def test_solved_board(self):
        assert sudoku_check(SOLVED_4X4)

    def test_duplicate_in_column_and_box(self):
        cells = list(SOLVED_4X4.cells)
        cells[0] = 2
        assert not sudoku_check(SudokuBoard(2, tuple(cells)))

    def test_any_zero_fails(self):
        cells = list(SOLVED_4X4.cells)
        cells[5] = 0
        assert not sudoku_check(SudokuBoard(2, tuple(cells)))

    def test_out_of_range_value_rejected(self):
        with pytest.raises(FormatError):
            SudokuBoard(2, (5,) + (0,) * 15)


class TestSudokuSolve:
    def test_solved_board_yields_itself(self):
        assert sudoku_solve(SOLVED_4X4, max_solutions=5) == [SOLVED_4X4]

    def test_empty_grid_has_288_solutions(self):
        sols = sudoku_solve(SudokuBoard(2, (0,) * 16), max_solutions=300)
        assert len(sols) == 288
        # Independent oracle: exhaust all ways to stack four permutation rows.
        rows = list(itertools.permutations((1, 2, 3, 4)))
        brute = set()
        for combo in itertools.product(rows, repeat=4):
            grid = tuple(v for row in combo for v in row)
            if sudoku_check(SudokuBoard(2, grid)):
                brute.add(grid)
        assert brute == {s.cells for s in sols}

    def test_contradictory_clues_empty(self):
        cells = [0] * 16
        cells[0] = cells[1] = 3
        assert sudoku_solve(SudokuBoard(2, tuple(cells)), max_solutions=2) == []

    def test_deterministic_enumeration_order(self):
        sols1 = sudoku_solve(SudokuBoard(2, (0,) * 16), max_solutions=10)
        sols2 = sudoku_solve(SudokuBoard(2, (0,) * 16), max_solutions=10)
        assert [s.cells for s in sols1] == [s.cells for s in sols2]


class TestSudokuGenerate:
    def test_high_clue_range_trivially_unique(self, rng):
        puzzle, solution = sudoku_generate(rng.split("hi"), 2, 12, 14)
        assert 12 <= puzzle.clue_count() <= 14
        assert sudoku_check(solution)
        assert sudoku_solve(puzzle, max_solutions=2) == [solution]

    def test_every_puzzle_unique(self, rng):
        for i in range(25):
            puzzle, solution = sudoku_generate(rng.split("u", i), 2, 6, 9)
            assert 6 <= puzzle.clue_count() <= 9
            assert sudoku_solve(puzzle, max_solutions=2) == [solution]

    def test_infeasible_range_rejected(self, rng):
        with pytest.raises(ConfigError):
            sudoku_generate(rng, 2, 2, 3)
        with pytest.raises(ConfigError):
            sudoku_generate(rng, 3, 10, 16)
        with pytest.raises(ConfigError):
            sudoku_generate(rng, 2, 10, 16)  # max would leave no blanks

    def test_clue_digit_histogram_roughly_uniform(self, rng):
        # Chi-square over pooled clue digits of 9x9 puzzles; dof=8,
        # rejection threshold at the 0.001 level is 26.124.
        counts = np.zeros(9, dtype=np.int64)
        for i in range(120):
            puzzle, _ = sudoku_generate(rng.split("chi", i), 3, 28, 34)
            for v in puzzle.cells:
                if v:
                    counts[v - 1] += 1
        expected = counts.sum() / 9.0
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < 26.124, f"chi2={chi2}, counts={counts.tolist()}"


class TestSudokuAugment:
    def test_identity_transform_is_noop(self):
        t = SudokuTransform(2, tuple(range(16)), tuple(range(5)))
        assert t.apply(SOLVED_4X4) == SOLVED_4X4

    def test_preserves_validity_uniqueness_and_clues(self, rng):
        puzzle, solution = sudoku_generate(rng.split("a"), 2, 6, 9)
        for i in range(10):
            p2, s2 = sudoku_augment(puzzle, solution, rng.split("t", i))
            assert sudoku_check(s2)
            assert p2.clue_count() == puzzle.clue_count()
            assert sudoku_solve(p2, max_solutions=2) == [s2]

    def test_inverse_recovers_original(self, rng):
        puzzle, solution = sudoku_generate(rng.split("b"), 2, 6, 9)
        for i in range(10):
            t = SudokuTransform.random(rng.split("inv", i), 2)
            inv = t.inverse()
            assert inv.apply(t.apply(puzzle)) == puzzle
            assert inv.apply(t.apply(solution)) == solution


def _open_grid(h, w):
    cells = [OPEN] * (h * w)
    cells[0] = START
    cells[-1] = GOAL
    return MazeGrid(h, w, tuple(cells))


def _second_bfs(grid):
    """Independent shortest-path length: plain frontier expansion by level."""
    n = grid.height * grid.width
    dist = {grid.start: 0}
    frontier = [grid.start]
    while frontier:
        nxt = []
        for cur in frontier:
            r, c = divmod(cur, grid.width)
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= rr < grid.height and 0 <= cc < grid.width:
                    idx = rr * grid.width + cc
                    if grid.is_open(idx) and idx not in dist:
                        dist[idx] = dist[cur] + 1
                        nxt.append(idx)
        frontier = nxt
    return dist.get(grid.goal, -1)


class TestMaze:
    def test_open_grid_manhattan_distance(self):
        grid = _open_grid(6, 9)
        dist, _ = bfs_parents([True] * 54, 6, 9, grid.start)
        assert dist[grid.goal] == 6 + 9 - 2

    def test_generated_path_matches_independent_bfs(self, rng):
        for i in range(10):
            grid, path = maze_generate(rng.split("m", i), 12, 12, 14)
            assert len(path) - 1 == _second_bfs(grid)
            assert path[0] == grid.start and path[-1] == grid.goal
            assert maze_check(grid, path)

    def test_min_path_len_respected(self, rng):
        for i in range(10):
            _, path = maze_generate(rng.split("n", i), 12, 12, 14)
            assert len(path) - 1 >= 14

    def test_check_rejects_extra_disconnected_cell(self, rng):
        grid, path = maze_generate(rng.split("x"), 12, 12, 14)
        extras = [i for i in range(144) if grid.is_open(i) and i not in set(path)]
        assert not maze_check(grid, tuple(path) + (extras[0],))

    def test_check_rejects_single_cell_perturbations(self, rng):
        grid, path = maze_generate(rng.split("p"), 12, 12, 14)
        assert not maze_check(grid, path[:-1])
        assert not maze_check(grid, path[1:])
        interior = list(path[1:-1])
        assert not maze_check(grid, (path[0],) + tuple(interior[:-1]) + (path[-1],))

    def test_alternate_equal_length_route_accepted(self):
        # A fully open 5x5 block: many optimal monotone routes exist.
        grid = _open_grid(5, 5)
        down_then_right = tuple(r * 5 for r in range(5)) + tuple(20 + c for c in (1, 2, 3, 4))
        right_then_down = tuple(c for c in range(5)) + tuple((r + 1) * 5 + 4 for r in range(4))
        assert maze_check(grid, down_then_right)
        assert maze_check(grid, right_then_down)

    def test_wall_cell_in_path_rejected(self, rng):
        grid, path = maze_generate(rng.split("w"), 12, 12, 14)
        walls = [i for i in range(144) if not grid.is_open(i)]
        assert not maze_check(grid, tuple(path[:-1]) + (walls[0],))


class TestTokenize:
    def test_sudoku_lengths(self, rng):
        puzzle, solution = sudoku_generate(rng.split("t"), 2, 6, 9)
        inst = tokenize_sudoku(puzzle, solution)
        assert inst.length == 16
        puzzle9, solution9 = sudoku_generate(rng.split("t9"), 3, 30, 34)
        inst9 = tokenize_sudoku(puzzle9, solution9)
        assert inst9.length == 81

    def test_fully_clued_rejected(self):
        with pytest.raises(DegenerateInstanceError):
            tokenize_sudoku(SOLVED_4X4, SOLVED_4X4)

    def test_maze_length_and_predicted_set(self, rng):
        grid, path = maze_generate(rng.split("mz"), 12, 12, 14)
        inst = tokenize_maze(grid, path)
        assert inst.length == 144
        open_positions = {i for i in range(144) if grid.is_open(i)}
        assert set(inst.predicted_positions.tolist()) == open_positions
        assert set(np.flatnonzero(inst.target_tokens).tolist()) == set(path)

    def test_30x30_maze_token_count(self, rng):
        grid, path = maze_generate(rng.split("big"), 30, 30, 40)
        assert tokenize_maze(grid, path).length == 900


class TestDatasetIO:
    def test_round_trip(self, tmp_path, small_sudoku_records, small_maze_records):
        for name, records in (("s", small_sudoku_records), ("m", small_maze_records)):
            path = tmp_path / f"{name}.jsonl"
            save_dataset(path, records, seed=7)
            header, back = load_dataset(path)
            assert back == records
            assert header["count"] == len(records)
            assert header["seed"] == 7

    def test_bad_length_sudoku_string(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        with open(path, "w") as fh:
            fh.write(json.dumps({"seed": 0, "generator_version": 1, "count": 1}) + "\n")
            fh.write(json.dumps({"kind": "sudoku", "input": "0" * 80, "target": "1" * 81,
                                 "meta": {"box": 3, "clues": 0}}) + "\n")
        with pytest.raises(ParseError) as err:
            load_dataset(path)
        assert "line 2" in str(err.value)

    def test_clue_count_recounted_on_load(self, tmp_path, small_sudoku_records):
        rec = small_sudoku_records[0]
        bad = PuzzleRecord(rec.kind, rec.input, rec.target,
                           {**rec.meta, "clues": rec.meta["clues"] + 1})
        path = tmp_path / "clue.jsonl"
        save_dataset(path, [bad], seed=0)
        with pytest.raises(ParseError):
            load_dataset(path)

    def test_record_reconstruction(self, small_sudoku_records, small_maze_records):
        rec = small_sudoku_records[0]
        assert sudoku_check(rec.solution())
        assert rec.board().clue_count() == rec.meta["clues"]
        mrec = small_maze_records[0]
        assert maze_check(mrec.grid(), mrec.path_cells())
        assert record_from_maze(mrec.grid(), shortest_path_cells(mrec.grid())).input == mrec.input

    def test_generation_stream_is_pure_function_of_seed_and_index(self):
        from latentvote.puzzles import generate_records

        a = generate_records("sudoku", 6, 5, box=2, clues_min=6, clues_max=9)
        b = generate_records("sudoku", 6, 5, box=2, clues_min=6, clues_max=9)
        assert a == b
        assert record_from_sudoku(a[0].board(), a[0].solution()) == a[0]
