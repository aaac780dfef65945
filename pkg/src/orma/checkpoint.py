"""Binary checkpoint format: config echo, vocabulary, and named parameters.

Layout (all integers little-endian): magic ``ORMA1``, one version byte, the
config text (u32 length + UTF-8), the vocabulary (u32 count, then u32 length
+ UTF-8 per token), then the parameters (u32 count, then per entry u32 name
length + name, u8 rank, u32 per dimension, float64 row-major payload).
Saving preserves parameter order, so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .config import RunConfig, parse_config_text
from .encoders import EncoderParams, Vocabulary, init_encoder_params
from .errors import CheckpointError
from .model import OrmaModel

MAGIC = b"ORMA1"
VERSION = 1


@dataclass
class Checkpoint:
    version: int
    config_text: str
    vocab: list[str]
    params: dict[str, np.ndarray]

    def config(self) -> RunConfig:
        values = parse_config_text(self.config_text, source="<checkpoint>")
        return RunConfig(**values).validate()


def checkpoint_from_model(model: OrmaModel) -> Checkpoint:
    return Checkpoint(
        version=VERSION,
        config_text=model.config.as_text(),
        vocab=list(model.vocab.tokens),
        params={name: tensor.data.copy()
                for name, tensor in model.enc.named().items()},
    )


def model_from_checkpoint(ckpt: Checkpoint) -> OrmaModel:
    """Rebuild a model whose forward outputs match the saved one bit-for-bit."""
    config = ckpt.config()
    vocab = Vocabulary(list(ckpt.vocab))
    enc = init_encoder_params(
        vocab_size=len(vocab), d=config.d, f0=config.f0,
        max_text_len=config.max_text_len, seed=config.seed)
    _load_params(enc, ckpt.params)
    return OrmaModel(config, vocab, enc)


def _load_params(enc: EncoderParams, arrays: dict[str, np.ndarray]) -> None:
    expected = set(enc.named())
    provided = set(arrays)
    if expected != provided:
        missing = sorted(expected - provided)
        extra = sorted(provided - expected)
        raise CheckpointError(
            f"parameter names do not match model: missing {missing}, "
            f"unexpected {extra}")
    for name, tensor in enc.named().items():
        arr = arrays[name]
        if arr.shape != tensor.data.shape:
            raise CheckpointError(
                f"parameter {name!r}: shape {arr.shape} does not match "
                f"model shape {tensor.data.shape}")
        tensor.data = np.array(arr, dtype=np.float64)


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", ckpt.version))
        _write_str(fh, ckpt.config_text)
        fh.write(struct.pack("<I", len(ckpt.vocab)))
        for token in ckpt.vocab:
            _write_str(fh, token)
        fh.write(struct.pack("<I", len(ckpt.params)))
        for name, arr in ckpt.params.items():
            _write_str(fh, name)
            arr = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path: str) -> Checkpoint:
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(
                f"not a checkpoint: expected magic {MAGIC!r}, got {magic!r}")
        (version,) = struct.unpack("<B", _read(fh, 1, "version"))
        if version != VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {version}; this build "
                f"reads version {VERSION}")
        config_text = _read_str(fh, "config")
        (n_vocab,) = struct.unpack("<I", _read(fh, 4, "vocabulary size"))
        vocab = [_read_str(fh, f"vocabulary token {i}") for i in range(n_vocab)]
        (n_params,) = struct.unpack("<I", _read(fh, 4, "parameter count"))
        params: dict[str, np.ndarray] = {}
        for _ in range(n_params):
            name = _read_str(fh, "parameter name")
            (ndim,) = struct.unpack("<B", _read(fh, 1, f"{name} rank"))
            shape = struct.unpack(f"<{ndim}I", _read(fh, 4 * ndim, f"{name} shape"))
            count = int(np.prod(shape)) if ndim else 1
            payload = _read(fh, 8 * count, f"{name} payload")
            params[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError("trailing bytes after checkpoint payload")
    return Checkpoint(version=version, config_text=config_text,
                      vocab=vocab, params=params)


def _write_str(fh: BinaryIO, text: str) -> None:
    encoded = text.encode("utf-8")
    fh.write(struct.pack("<I", len(encoded)))
    fh.write(encoded)


def _read(fh: BinaryIO, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CheckpointError(f"checkpoint truncated while reading {what}")
    return data


def _read_str(fh: BinaryIO, what: str) -> str:
    (length,) = struct.unpack("<I", _read(fh, 4, f"{what} length"))
    return _read(fh, length, what).decode("utf-8")
