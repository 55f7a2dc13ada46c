"""Binary tensor archive for checkpoints and raw tensors.

File layout:

    offset 0   magic bytes b"ADPR1\\n"
    offset 6   manifest length, unsigned 64-bit little-endian
    offset 14  manifest, UTF-8 JSON
    then       payload: concatenated little-endian float64 blocks, row-major

The manifest carries a ``tensors`` table mapping tensor names to dtype,
shape, element count, and byte offset into the payload. Checkpoint
archives additionally carry a ``layers`` list describing the topology
(tensor names, activation tags, prunable flags, layer order). Round trips
are bitwise exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ArchiveError, ShapeError
from .pipeline import Checkpoint, Layer

MAGIC = b"ADPR1\n"
_HEADER_LEN = len(MAGIC) + 8


def _pack_tensors(tensors: dict[str, np.ndarray]):
    table = {}
    blobs = []
    offset = 0
    for name, value in tensors.items():
        arr = np.ascontiguousarray(np.asarray(value, dtype=np.float64))
        if arr.size and not np.isfinite(arr).all():
            raise ValueError(f"tensor {name!r} contains non-finite values")
        blob = arr.astype("<f8", copy=False).tobytes(order="C")
        table[name] = {
            "dtype": "float64",
            "shape": list(arr.shape),
            "size": int(arr.size),
            "offset": offset,
        }
        blobs.append(blob)
        offset += len(blob)
    return table, b"".join(blobs)


def _write(path, manifest: dict, payload: bytes) -> None:
    body = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(body)))
        fh.write(body)
        fh.write(payload)


def save_tensors(tensors: dict[str, np.ndarray], path, metadata: dict | None = None) -> None:
    """Write a plain tensor archive (no layer topology)."""
    table, payload = _pack_tensors(tensors)
    manifest = {
        "format": "adaprune-tensors",
        "metadata": metadata or {},
        "tensors": table,
    }
    _write(path, manifest, payload)


def save_archive(ckpt: Checkpoint, path) -> None:
    """Write a checkpoint archive with full layer topology."""
    tensors: dict[str, np.ndarray] = {}
    layers = []
    for i, layer in enumerate(ckpt.layers):
        wname = f"layers.{i}.weight"
        tensors[wname] = layer.weight
        bname = None
        if layer.bias is not None:
            bname = f"layers.{i}.bias"
            tensors[bname] = layer.bias
        layers.append(
            {
                "weight": wname,
                "bias": bname,
                "activation": layer.activation,
                "prunable": bool(layer.prunable),
            }
        )
    table, payload = _pack_tensors(tensors)
    manifest = {
        "format": "adaprune-checkpoint",
        "name": ckpt.name,
        "metadata": ckpt.metadata,
        "layers": layers,
        "tensors": table,
    }
    _write(path, manifest, payload)


def _read(path):
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ArchiveError(f"bad magic {raw[:len(MAGIC)]!r}; expected {MAGIC!r}")
    if len(raw) < _HEADER_LEN:
        raise ArchiveError("truncated header: manifest length is missing")
    (manifest_len,) = struct.unpack("<Q", raw[len(MAGIC) : _HEADER_LEN])
    if _HEADER_LEN + manifest_len > len(raw):
        raise ArchiveError(
            f"truncated manifest: header declares {manifest_len} bytes but only "
            f"{len(raw) - _HEADER_LEN} remain"
        )
    try:
        manifest = json.loads(raw[_HEADER_LEN : _HEADER_LEN + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or not isinstance(manifest.get("tensors"), dict):
        raise ArchiveError("manifest must be a JSON object with a 'tensors' table")
    payload = raw[_HEADER_LEN + manifest_len :]
    return manifest, payload


def _unpack_tensors(manifest: dict, payload: bytes) -> dict[str, np.ndarray]:
    entries = []
    for name, entry in manifest["tensors"].items():
        try:
            dtype = entry["dtype"]
            shape = tuple(int(s) for s in entry["shape"])
            size = int(entry["size"])
            offset = int(entry["offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ArchiveError(f"tensor {name!r}: malformed manifest entry") from exc
        if dtype != "float64":
            raise ArchiveError(f"tensor {name!r}: unsupported dtype {dtype!r}")
        if any(s < 0 for s in shape):
            raise ArchiveError(f"tensor {name!r}: negative dimension in {shape}")
        count = 1
        for s in shape:
            count *= s
        if size != count:
            raise ArchiveError(
                f"tensor {name!r}: declares {size} elements but shape {shape} "
                f"holds {count}"
            )
        nbytes = size * 8
        if offset < 0 or offset + nbytes > len(payload):
            raise ArchiveError(
                f"tensor {name!r}: block [{offset}, {offset + nbytes}) is out of "
                f"bounds for a {len(payload)}-byte payload"
            )
        entries.append((name, shape, size, offset, nbytes))

    entries.sort(key=lambda e: e[3])
    prev_name, prev_end = None, 0
    for name, _, _, offset, nbytes in entries:
        if offset < prev_end:
            raise ArchiveError(f"tensor {name!r} overlaps tensor {prev_name!r}")
        prev_name, prev_end = name, offset + nbytes

    out = {}
    for name, shape, size, offset, _ in entries:
        arr = np.frombuffer(payload, dtype="<f8", count=size, offset=offset)
        arr = arr.reshape(shape).astype(np.float64, copy=True)
        if arr.size and not np.isfinite(arr).all():
            raise ArchiveError(f"tensor {name!r} contains non-finite values")
        out[name] = arr
    return out


def load_tensors(path) -> dict[str, np.ndarray]:
    """Read every tensor in an archive, keyed by name."""
    manifest, payload = _read(path)
    return _unpack_tensors(manifest, payload)


def load_archive(path) -> Checkpoint:
    """Read a checkpoint archive back into a Checkpoint."""
    manifest, payload = _read(path)
    if not isinstance(manifest.get("layers"), list):
        raise ArchiveError("archive has no layer topology; not a checkpoint archive")
    tensors = _unpack_tensors(manifest, payload)
    layers = []
    for i, entry in enumerate(manifest["layers"]):
        try:
            wname = entry["weight"]
            bname = entry.get("bias")
            activation = entry["activation"]
            prunable = bool(entry["prunable"])
        except (KeyError, TypeError) as exc:
            raise ArchiveError(f"layer {i}: malformed manifest entry") from exc
        if wname not in tensors:
            raise ArchiveError(f"layer {i}: weight tensor {wname!r} missing from table")
        if bname is not None and bname not in tensors:
            raise ArchiveError(f"layer {i}: bias tensor {bname!r} missing from table")
        try:
            layers.append(
                Layer(
                    weight=tensors[wname],
                    bias=None if bname is None else tensors[bname],
                    activation=activation,
                    prunable=prunable,
                )
            )
        except (ShapeError, ValueError) as exc:
            raise ArchiveError(f"layer {i}: {exc}") from exc
    try:
        return Checkpoint(
            layers=layers,
            name=str(manifest.get("name", "")),
            metadata=dict(manifest.get("metadata") or {}),
        )
    except (ShapeError, ValueError) as exc:
        raise ArchiveError(f"invalid checkpoint: {exc}") from exc
