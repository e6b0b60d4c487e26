import numpy as np
import pytest

from latentvote.puzzles import generate_records, sudoku_task_shape
from latentvote.tensor.rng import Rng


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture(scope="session")
def small_sudoku_records():
    return generate_records("sudoku", 40, 77, box=2, clues_min=6, clues_max=9)


@pytest.fixture(scope="session")
def small_maze_records():
    return generate_records("maze", 12, 78, height=12, width=12, min_path_len=14)


@pytest.fixture(scope="session")
def tiny_itrsa():
    """A small untrained model over the 4x4 sudoku task."""
    from latentvote.models import build_model

    return build_model(
        "itrsa",
        {"channels": 32, "heads": 4, "self_attn_repeats": 2, "hidden": 64},
        sudoku_task_shape(2),
        Rng(5).split("init"),
    )


@pytest.fixture(scope="session")
def tiny_kuramoto():
    from latentvote.models import build_model

    return build_model(
        "kuramoto",
        {"channels": 32, "osc_dim": 4, "heads": 4, "step_size": 1.0},
        sudoku_task_shape(2),
        Rng(6).split("init"),
    )


def assert_close(actual, expected, tol=1e-6):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    assert actual.shape == expected.shape, f"{actual.shape} vs {expected.shape}"
    err = np.max(np.abs(actual - expected)) if actual.size else 0.0
    assert err <= tol, f"max abs err {err} > {tol}"
