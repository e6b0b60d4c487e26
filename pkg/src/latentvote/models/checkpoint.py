"""Binary checkpoint files: a JSON header with a parameter manifest followed
by raw little-endian float32 buffers. Live weights, their EMA shadows, and
optimizer moments all live in one file so training can resume exactly."""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import ParseError

MAGIC = b"LVCKPT01"


def save_checkpoint(path, header_extra: dict, sections: dict) -> None:
    """sections maps section name ('live', 'ema', 'opt_m', ...) to an ordered
    {param_name: float32 array} dict."""
    manifest = []
    buffers = []
    offset = 0
    for section, arrays in sections.items():
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            manifest.append(
                {"name": f"{section}/{name}", "shape": list(arr.shape), "offset": offset}
            )
            buffers.append(arr.tobytes())
            offset += arr.nbytes
    header = dict(header_extra)
    header["manifest"] = manifest
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for buf in buffers:
            fh.write(buf)


def load_checkpoint(path):
    """Returns (header, sections) with sections[section][name] = float32 array."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ParseError(f"{path} is not a checkpoint file (bad magic)")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        data = fh.read()
    sections: dict = {}
    for entry in header["manifest"]:
        section, name = entry["name"].split("/", 1)
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=start).reshape(shape)
        sections.setdefault(section, {})[name] = arr.astype(np.float32)
    return header, sections
