"""Versioned binary model files: magic, kind tag, named little-endian f32 tensors.

Layout (all integers little-endian):

    magic    4 bytes  b"SSKM"
    version  u32      currently 1
    kind     u8       1 = linear, 2 = conv classifier, 3 = embedding
    count    u32      number of tensors
    entry*   u16 name length, name utf-8, u8 ndim, ndim x u32 dims, f32 data

Parameters are stored as f32, so save -> load -> save is byte-stable.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ModelFormatError
from .base import Scorer
from .convnet import TinyConvClassifier
from .embedding import EmbeddingScorer
from .linear import LinearScorer

MAGIC = b"SSKM"
VERSION = 1
_KIND_CODES = {"linear": 1, "conv_classifier": 2, "embedding": 3}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


def _pack_tensor(name: str, tensor: np.ndarray) -> bytes:
    data = np.ascontiguousarray(tensor, dtype="<f4")
    raw = name.encode("utf-8")
    head = struct.pack("<H", len(raw)) + raw + struct.pack("<B", data.ndim)
    head += b"".join(struct.pack("<I", d) for d in data.shape)
    return head + data.tobytes()


def model_bytes(scorer: Scorer) -> bytes:
    if scorer.kind not in _KIND_CODES:
        raise ModelFormatError(f"cannot serialise scorer kind {scorer.kind!r}")
    tensors = dict(scorer.parameter_tensors())
    h, w = scorer.input_dims
    tensors["meta/input_hw"] = np.array([h, w], dtype=np.float64)
    out = [MAGIC, struct.pack("<IB", VERSION, _KIND_CODES[scorer.kind]), struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        out.append(_pack_tensor(name, tensors[name]))
    return b"".join(out)


def save_model(scorer: Scorer, path: str | Path) -> None:
    Path(path).write_bytes(model_bytes(scorer))


def _read(buf: bytes, offset: int, n: int) -> tuple[bytes, int]:
    if offset + n > len(buf):
        raise ModelFormatError("truncated model file")
    return buf[offset : offset + n], offset + n


def load_model_bytes(buf: bytes) -> Scorer:
    chunk, off = _read(buf, 0, 4)
    if chunk != MAGIC:
        raise ModelFormatError("bad magic bytes")
    chunk, off = _read(buf, off, 5)
    version, kind_code = struct.unpack("<IB", chunk)
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    if kind_code not in _CODE_KINDS:
        raise ModelFormatError(f"unknown scorer kind code {kind_code}")
    chunk, off = _read(buf, off, 4)
    (count,) = struct.unpack("<I", chunk)
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        chunk, off = _read(buf, off, 2)
        (name_len,) = struct.unpack("<H", chunk)
        raw, off = _read(buf, off, name_len)
        name = raw.decode("utf-8")
        chunk, off = _read(buf, off, 1)
        ndim = chunk[0]
        dims = []
        for _ in range(ndim):
            chunk, off = _read(buf, off, 4)
            dims.append(struct.unpack("<I", chunk)[0])
        size = int(np.prod(dims, dtype=np.int64)) if dims else 1
        chunk, off = _read(buf, off, 4 * size)
        tensors[name] = np.frombuffer(chunk, dtype="<f4").reshape(dims).astype(np.float64)
    if off != len(buf):
        raise ModelFormatError("trailing bytes after tensor table")

    try:
        hw = tensors.pop("meta/input_hw")
        input_hw = (int(hw[0]), int(hw[1]))
        kind = _CODE_KINDS[kind_code]
        if kind == "linear":
            return LinearScorer(tensors["weights"], tensors["bias"])
        if kind == "conv_classifier":
            return TinyConvClassifier(tensors, input_hw)
        return EmbeddingScorer(tensors, input_hw)
    except KeyError as e:
        raise ModelFormatError(f"missing tensor {e.args[0]!r}") from e


def load_model(path: str | Path) -> Scorer:
    return load_model_bytes(Path(path).read_bytes())
