"""Kernel lane selection: compiled extension when available, numpy otherwise.

Set LATENTVOTE_KERNELS=python to force the fallback, =compiled to make a
missing extension a hard error instead of a silent downgrade.
"""

import os

from . import _kernels_py

_requested = os.environ.get("LATENTVOTE_KERNELS", "").strip().lower()

_compiled = None
if _requested != "python":
    try:
        from . import _kernels_cy as _compiled  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise

kernels = _compiled if _compiled is not None else _kernels_py


def backend_name() -> str:
    """Name of the active kernel lane: 'compiled' or 'python'."""
    return kernels.LANE


def available_lanes() -> dict:
    """Both kernel modules, keyed by lane name, for benchmarks and tests."""
    lanes = {"python": _kernels_py}
    if _compiled is not None:
        lanes["compiled"] = _compiled
    return lanes
