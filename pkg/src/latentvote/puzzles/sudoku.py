"""Sudoku generation, validation, solving, and symmetry-preserving augmentation.

Boards are parameterized by the sub-grid side ``box`` (2 for 4x4 desk scale,
3 for the standard 9x9), stored row-major with 0 marking a blank. The solver
is the uniqueness oracle for generation: every emitted puzzle is verified to
have exactly one completion.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError, FormatError, GenerationError
from ..tensor.rng import Rng

MIN_FEASIBLE_CLUES = {2: 4, 3: 17}
GENERATION_RETRIES = 64


@dataclass(frozen=True)
class SudokuBoard:
    """Row-major cells in 0..box^2 with 0 = blank."""

    box: int
    cells: tuple

    def __post_init__(self):
        side = self.box * self.box
        if len(self.cells) != side * side:
            raise FormatError(
                f"sudoku board needs {side * side} cells for box {self.box}, got {len(self.cells)}"
            )
        for value in self.cells:
            if not 0 <= value <= side:
                raise FormatError(f"sudoku cell value {value} outside 0..{side}")

    @property
    def side(self) -> int:
        return self.box * self.box

    def clue_count(self) -> int:
        return sum(1 for v in self.cells if v)

    def rows(self):
        side = self.side
        return [self.cells[r * side : (r + 1) * side] for r in range(side)]

    def __str__(self):
        return "".join(str(v) for v in self.cells)


def _unit_indices(box: int):
    """Cell indices of every row, column, and sub-grid."""
    side = box * box
    units = []
    for r in range(side):
        units.append([r * side + c for c in range(side)])
    for c in range(side):
        units.append([r * side + c for r in range(side)])
    for br in range(box):
        for bc in range(box):
            units.append(
                [
                    (br * box + dr) * side + (bc * box + dc)
                    for dr in range(box)
                    for dc in range(box)
                ]
            )
    return units


def sudoku_check(board: SudokuBoard) -> bool:
    """True iff the board is complete and satisfies every uniqueness constraint."""
    if any(v == 0 for v in board.cells):
        return False
    for unit in _unit_indices(board.box):
        seen = set()
        for idx in unit:
            v = board.cells[idx]
            if v in seen:
                return False
            seen.add(v)
    return True


def sudoku_solve(board: SudokuBoard, max_solutions: int = 2) -> list:
    """Backtracking enumeration in deterministic order.

    Blanks are filled lowest index first, digits tried ascending, stopping
    once ``max_solutions`` completions are found. Contradictory clues yield
    an empty list.
    """
    side = board.side
    box = board.box
    cells = list(board.cells)
    full = (1 << side) - 1
    row_used = [0] * side
    col_used = [0] * side
    box_used = [0] * side

    for idx, v in enumerate(cells):
        if v == 0:
            continue
        r, c = divmod(idx, side)
        b = (r // box) * box + c // box
        bit = 1 << (v - 1)
        if (row_used[r] | col_used[c] | box_used[b]) & bit:
            return []
        row_used[r] |= bit
        col_used[c] |= bit
        box_used[b] |= bit

    blanks = [i for i, v in enumerate(cells) if v == 0]
    solutions = []

    def backtrack(pos: int) -> bool:
        if pos == len(blanks):
            solutions.append(SudokuBoard(board.box, tuple(cells)))
            return len(solutions) >= max_solutions
        idx = blanks[pos]
        r, c = divmod(idx, side)
        b = (r // box) * box + c // box
        avail = full & ~(row_used[r] | col_used[c] | box_used[b])
        while avail:
            bit = avail & -avail
            avail ^= bit
            cells[idx] = bit.bit_length()
            row_used[r] |= bit
            col_used[c] |= bit
            box_used[b] |= bit
            done = backtrack(pos + 1)
            row_used[r] ^= bit
            col_used[c] ^= bit
            box_used[b] ^= bit
            cells[idx] = 0
            if done:
                return True
        return False

    backtrack(0)
    return solutions


def random_full_grid(rng: Rng, box: int) -> SudokuBoard:
    """A uniformly shuffled complete grid via randomized backtracking."""
    side = box * box
    cells = [0] * (side * side)
    full = (1 << side) - 1
    row_used = [0] * side
    col_used = [0] * side
    box_used = [0] * side

    def fill(idx: int) -> bool:
        if idx == side * side:
            return True
        r, c = divmod(idx, side)
        b = (r // box) * box + c // box
        avail = full & ~(row_used[r] | col_used[c] | box_used[b])
        digits = [d for d in range(1, side + 1) if avail & (1 << (d - 1))]
        rng.shuffle(digits)
        for d in digits:
            bit = 1 << (d - 1)
            cells[idx] = d
            row_used[r] |= bit
            col_used[c] |= bit
            box_used[b] |= bit
            if fill(idx + 1):
                return True
            row_used[r] ^= bit
            col_used[c] ^= bit
            box_used[b] ^= bit
            cells[idx] = 0
        return False

    if not fill(0):
        raise GenerationError("could not fill a complete grid")
    return SudokuBoard(box, tuple(cells))


def sudoku_generate(rng: Rng, box: int, clues_min: int, clues_max: int):
    """Generate a unique-solution puzzle with a clue count in the given range.

    Returns (puzzle, solution). Digs cells out of a random full grid in a
    random order, keeping a removal only if the puzzle stays unique.
    """
    side = box * box
    n_cells = side * side
    feasible = MIN_FEASIBLE_CLUES.get(box, 0)
    if clues_min < feasible:
        raise ConfigError(f"clue minimum {clues_min} below feasible {feasible} for box {box}")
    if clues_min > clues_max or clues_max > n_cells - 1:
        raise ConfigError(f"clue range [{clues_min},{clues_max}] invalid for {n_cells} cells")

    for _ in range(GENERATION_RETRIES):
        solution = random_full_grid(rng, box)
        target = int(rng.integers(clues_min, clues_max + 1))
        cells = list(solution.cells)
        clue_count = n_cells
        for idx in rng.permutation(n_cells):
            if clue_count == target:
                break
            saved = cells[idx]
            cells[idx] = 0
            if len(sudoku_solve(SudokuBoard(box, tuple(cells)), max_solutions=2)) == 1:
                clue_count -= 1
            else:
                cells[idx] = saved
        if clues_min <= clue_count <= clues_max:
            return SudokuBoard(box, tuple(cells)), solution
    raise GenerationError(
        f"no unique puzzle with {clues_min}..{clues_max} clues after {GENERATION_RETRIES} tries"
    )


@dataclass(frozen=True)
class SudokuTransform:
    """A validity-preserving symmetry: cell_map[i] is the source index feeding
    output cell i, digit_map relabels values (digit_map[0] == 0)."""

    box: int
    cell_map: tuple
    digit_map: tuple

    @classmethod
    def random(cls, rng: Rng, box: int) -> "SudokuTransform":
        """Random composition of digit relabeling, in-band row swaps, in-stack
        column swaps, band and stack swaps, and an optional transpose."""
        side = box * box
        digit_map = (0,) + tuple(int(d) + 1 for d in rng.permutation(side))
        band_perm = rng.permutation(box)
        row_in_band = [rng.permutation(box) for _ in range(box)]
        stack_perm = rng.permutation(box)
        col_in_stack = [rng.permutation(box) for _ in range(box)]
        transpose = bool(rng.integers(0, 2))

        row_src = [int(band_perm[r // box]) * box + int(row_in_band[r // box][r % box]) for r in range(side)]
        col_src = [int(stack_perm[c // box]) * box + int(col_in_stack[c // box][c % box]) for c in range(side)]
        cell_map = []
        for r in range(side):
            for c in range(side):
                if transpose:
                    sr, sc = row_src[c], col_src[r]
                else:
                    sr, sc = row_src[r], col_src[c]
                cell_map.append(sr * side + sc)
        return cls(box, tuple(cell_map), digit_map)

    def inverse(self) -> "SudokuTransform":
        n = len(self.cell_map)
        cell_inv = [0] * n
        for dest, src in enumerate(self.cell_map):
            cell_inv[src] = dest
        digit_inv = [0] * len(self.digit_map)
        for old, new in enumerate(self.digit_map):
            digit_inv[new] = old
        return SudokuTransform(self.box, tuple(cell_inv), tuple(digit_inv))

    def apply(self, board: SudokuBoard) -> SudokuBoard:
        cells = tuple(self.digit_map[board.cells[src]] for src in self.cell_map)
        return SudokuBoard(board.box, cells)


def sudoku_augment(board: SudokuBoard, solution: SudokuBoard, rng: Rng):
    """Random symmetry applied consistently to a (puzzle, solution) pair."""
    t = SudokuTransform.random(rng, board.box)
    return t.apply(board), t.apply(solution)
