"""Reader/writer for the shared array and weight-manifest containers.

Deliberately independent of the reconstruction package: the trainer talks
to it only through these files, so this module re-implements the format
from its specification (one line of JSON, then a raw little-endian
payload).  Byte-for-byte compatibility is what the parity tests check.
"""

from __future__ import annotations

import json

import numpy as np


def write_array(array: np.ndarray, path) -> None:
    arr = np.ascontiguousarray(np.asarray(array, dtype="<c8"))
    header = {
        "dtype": "c64",
        "shape": list(arr.shape),
        "layout": "row-major",
        "byte_order": "little",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(arr.tobytes())


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header["dtype"] != "c64" or header["byte_order"] != "little":
            raise ValueError(f"{path}: unsupported array header {header}")
        payload = fh.read()
    shape = header["shape"]
    count = int(np.prod(shape))
    if len(payload) != 8 * count:
        raise ValueError(f"{path}: payload length mismatch")
    return np.frombuffer(payload, dtype="<c8").reshape(shape).copy()


def write_weights(architecture: str, schedule: dict, layers: list[dict], blob: np.ndarray, path) -> None:
    blob = np.ascontiguousarray(blob, dtype="<f4")
    header = {
        "architecture": architecture,
        "schedule": schedule,
        "layers": layers,
        "blob_bytes": int(blob.nbytes),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(blob.tobytes())


def read_weights(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        blob = fh.read()
    if len(blob) != header["blob_bytes"]:
        raise ValueError(f"{path}: blob length mismatch")
    return header, np.frombuffer(blob, dtype="<f4").copy()
