"""Writers (and small readers) for the ivprobe file formats.

Byte layouts must match core/src/io.cpp exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MATRIX_MAGIC = b"IPRB"
MATRIX_VERSION = 1
HEAD_MAGIC = b"IPRB-HEAD 1\n"
ACTIVATIONS = ("identity", "tanh")


def encode_matrix(x) -> bytes:
    # float64 -> float32 through numpy rounds to nearest even, like the C++ writer.
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite values")
    header = MATRIX_MAGIC + struct.pack("<IQQ", MATRIX_VERSION, a.shape[0], a.shape[1])
    return header + np.ascontiguousarray(a.astype("<f4")).tobytes()


def decode_matrix(data: bytes) -> np.ndarray:
    if data[:4] != MATRIX_MAGIC:
        raise ValueError("bad matrix magic at offset 0")
    if len(data) < 24:
        raise ValueError(f"truncated matrix header at offset {len(data)}")
    version, rows, cols = struct.unpack_from("<IQQ", data, 4)
    if version != MATRIX_VERSION:
        raise ValueError(f"unsupported matrix format version {version} at offset 4")
    expected = 24 + rows * cols * 4
    if len(data) != expected:
        raise ValueError(f"matrix payload is {len(data) - 24} bytes, expected {rows * cols * 4}")
    return np.frombuffer(data, dtype="<f4", offset=24).reshape(rows, cols).astype(np.float64)


def encode_labels(feature: str, values: Iterable[int]) -> bytes:
    if not feature or any(c in feature for c in ",\n\r"):
        raise ValueError("label feature name must be non-empty and contain no comma or newline")
    lines = [f"example_id,{feature}"]
    for i, v in enumerate(values):
        v = int(v)
        if v < 0:
            raise ValueError(f"row {i}: class id {v} is negative")
        lines.append(f"{i},{v}")
    return ("\n".join(lines) + "\n").encode("utf-8")


class Layer:
    def __init__(self, weights, bias, activation: str):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64).reshape(-1)
        if activation not in ACTIVATIONS:
            raise ValueError(f"unsupported activation '{activation}'")
        if self.weights.ndim != 2 or self.bias.shape[0] != self.weights.shape[0]:
            raise ValueError("layer weights must be out x in with a matching bias")
        self.activation = activation


def encode_head(layers: Sequence[Layer]) -> bytes:
    if not layers:
        raise ValueError("head needs at least one layer")
    for prev, nxt in zip(layers, layers[1:]):
        if prev.weights.shape[0] != nxt.weights.shape[1]:
            raise ValueError("head layer dimensions do not chain")
    if layers[-1].activation != "identity":
        raise ValueError("final head layer must use the identity activation")
    text = HEAD_MAGIC + f"layers {len(layers)}\n".encode()
    for l in layers:
        text += f"{l.weights.shape[1]} {l.weights.shape[0]} {l.activation}\n".encode()
    text += b"payload\n"
    payload = b"".join(
        np.ascontiguousarray(l.weights.astype("<f4")).tobytes() + l.bias.astype("<f4").tobytes() for l in layers
    )
    return text + payload


def head_forward(layers: Sequence[Layer], x) -> np.ndarray:
    h = np.asarray(x, dtype=np.float64)
    for l in layers:
        h = h @ l.weights.T + l.bias
        if l.activation == "tanh":
            h = np.tanh(h)
    return h


def write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
