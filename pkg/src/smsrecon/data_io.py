"""File formats shared between the reconstruction core and the weight trainer.

Two containers, both "one line of JSON, then a raw little-endian payload":

* ``.smsc`` — complex arrays. Header carries ``dtype`` ("c64"), ``shape``,
  ``layout`` ("row-major") and ``byte_order`` ("little"); the payload is
  interleaved (real, imag) float32 pairs, 8 bytes per element.
* ``.smsw`` — denoiser weight manifests. Header carries the architecture id,
  a layer table (name, kind, tensor shapes, byte offsets into the blob) and
  the noise-schedule parameters; the payload is one float32 blob.

Precision is float32 on disk and whatever the caller wants in memory;
``read_array`` returns complex64 so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError

ARRAY_DTYPE_TAG = "c64"
LAYER_KINDS = ("conv2d", "dense", "time_embed")


def _read_header(fh, path) -> dict:
    """Read the single JSON header line; the payload starts right after."""
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise DataFormatError(f"{path}: missing header line terminator")
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise DataFormatError(f"{path}: header must be a JSON object")
    return header


def write_array(array: np.ndarray, path) -> None:
    """Write a complex array as an .smsc file (float32 interleaved payload)."""
    arr = np.ascontiguousarray(np.asarray(array, dtype=np.complex64))
    if arr.ndim == 0 or arr.size == 0:
        raise ValueError("array shape must be non-empty")
    header = {
        "dtype": ARRAY_DTYPE_TAG,
        "shape": list(arr.shape),
        "layout": "row-major",
        "byte_order": "little",
    }
    payload = arr.astype("<c8", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(payload)


def read_array(path) -> np.ndarray:
    """Read an .smsc file back into a complex64 array.

    Raises DataFormatError on malformed headers, unknown dtype tags,
    unsupported byte order, or payload/shape length mismatch; never
    returns a partially-filled tensor.
    """
    with open(path, "rb") as fh:
        header = _read_header(fh, path)
        for key in ("dtype", "shape", "layout", "byte_order"):
            if key not in header:
                raise DataFormatError(f"{path}: header missing '{key}'")
        if header["dtype"] != ARRAY_DTYPE_TAG:
            raise DataFormatError(f"{path}: unknown dtype tag {header['dtype']!r}")
        if header["byte_order"] != "little":
            raise DataFormatError(
                f"{path}: unsupported byte_order {header['byte_order']!r} "
                "(only 'little' is supported)"
            )
        if header["layout"] != "row-major":
            raise DataFormatError(f"{path}: unsupported layout {header['layout']!r}")
        shape = header["shape"]
        if (
            not isinstance(shape, list)
            or not shape
            or not all(isinstance(n, int) and n >= 1 for n in shape)
        ):
            raise DataFormatError(f"{path}: invalid shape {shape!r}")
        count = int(np.prod(shape))
        payload = fh.read()
    if len(payload) != 8 * count:
        raise DataFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {8 * count}"
        )
    return np.frombuffer(payload, dtype="<c8").reshape(shape).copy()


@dataclass
class LayerSpec:
    """One entry of a weight manifest's layer table."""

    name: str
    kind: str
    shapes: list[list[int]]
    offsets: list[int]  # byte offsets into the blob, one per tensor


@dataclass
class WeightManifest:
    """Validated denoiser weights: layer table plus materialized tensors."""

    architecture: str
    layers: list[LayerSpec]
    schedule: dict  # keys: T, beta_0, beta_T
    tensors: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def layer(self, name: str) -> list[np.ndarray]:
        return self.tensors[name]


def write_weights(manifest_header: dict, blob: np.ndarray, path) -> None:
    """Write an .smsw manifest; `blob` is the float32 parameter pool."""
    blob = np.ascontiguousarray(blob, dtype="<f4")
    header = dict(manifest_header)
    header["blob_bytes"] = int(blob.nbytes)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(blob.tobytes())


def load_weights(path) -> WeightManifest:
    """Load and validate an .smsw manifest, materializing every tensor."""
    with open(path, "rb") as fh:
        header = _read_header(fh, path)
        for key in ("architecture", "layers", "schedule", "blob_bytes"):
            if key not in header:
                raise DataFormatError(f"{path}: manifest missing '{key}'")
        blob_bytes = header["blob_bytes"]
        blob = fh.read()
    if len(blob) != blob_bytes:
        raise DataFormatError(
            f"{path}: blob is {len(blob)} bytes, header declares {blob_bytes}"
        )
    if blob_bytes % 4 != 0:
        raise DataFormatError(f"{path}: blob length {blob_bytes} not a float32 multiple")
    pool = np.frombuffer(blob, dtype="<f4")

    sched = header["schedule"]
    if not (isinstance(sched.get("T"), int) and sched["T"] >= 1):
        raise DataFormatError(f"{path}: schedule T must be an int >= 1")
    b0, bT = sched.get("beta_0"), sched.get("beta_T")
    if not (0.0 < b0 <= bT < 1.0):
        raise DataFormatError(f"{path}: schedule betas violate 0 < beta_0 <= beta_T < 1")

    layers: list[LayerSpec] = []
    tensors: dict[str, list[np.ndarray]] = {}
    spans: list[tuple[int, int, str]] = []
    for entry in header["layers"]:
        spec = LayerSpec(
            name=entry["name"],
            kind=entry["kind"],
            shapes=[list(map(int, s)) for s in entry["shapes"]],
            offsets=[int(o) for o in entry["offsets"]],
        )
        if spec.kind not in LAYER_KINDS:
            raise DataFormatError(f"{path}: layer {spec.name}: unknown kind {spec.kind!r}")
        if len(spec.shapes) != len(spec.offsets):
            raise DataFormatError(f"{path}: layer {spec.name}: shapes/offsets mismatch")
        if spec.name in tensors:
            raise DataFormatError(f"{path}: duplicate layer name {spec.name!r}")
        mats = []
        for shape, off in zip(spec.shapes, spec.offsets):
            count = int(np.prod(shape))
            nbytes = 4 * count
            if off % 4 != 0 or off < 0 or off + nbytes > blob_bytes:
                raise DataFormatError(
                    f"{path}: layer {spec.name}: offset {off} out of range for "
                    f"{count} floats in a {blob_bytes}-byte blob"
                )
            spans.append((off, off + nbytes, spec.name))
            mats.append(pool[off // 4 : off // 4 + count].reshape(shape).copy())
        layers.append(spec)
        tensors[spec.name] = mats

    spans.sort()
    for (_, prev_end, prev_name), (start, _, name) in zip(spans, spans[1:]):
        if start < prev_end:
            raise DataFormatError(
                f"{path}: tensor spans overlap ({prev_name} and {name})"
            )

    return WeightManifest(
        architecture=header["architecture"],
        layers=layers,
        schedule={"T": sched["T"], "beta_0": float(b0), "beta_T": float(bT)},
        tensors=tensors,
    )


def read_json(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")  # missing file is an I/O error
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise DataFormatError(f"{path}: expected a JSON object")
    return obj


def write_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
