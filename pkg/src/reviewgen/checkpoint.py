"""Single-file binary checkpoints.

Layout: 4-byte magic, u32 little-endian header length, a canonical JSON
header (format version, model config, train config, vocabulary, tensor
manifest), the tensor payloads as raw little-endian float64 in manifest
order, and a trailing CRC-32 over everything before it.  The canonical
header makes save -> load -> save byte-identical.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import asdict

import numpy as np

from .cell import GLSTMParams
from .decoder import DecoderParams
from .model import ModelConfig, ReviewModel
from .textdata import Vocabulary

MAGIC = b"RVGN"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class ChecksumError(CheckpointError):
    pass


def _canonical_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")


def save_checkpoint(model: ReviewModel, path, vocab: Vocabulary,
                    train_config=None):
    """Write the model, its vocabulary and an optional training config.

    The write goes through a temp file and an atomic rename so a crash
    mid-epoch cannot leave a half-written checkpoint behind.
    """
    model.validate()
    if len(vocab) != model.config.vocab_size:
        raise CheckpointError(
            f"vocabulary has {len(vocab)} entries, model expects "
            f"{model.config.vocab_size}")
    tensors = model.parameters()
    header = {
        "format_version": FORMAT_VERSION,
        "model_config": asdict(model.config),
        "train_config": train_config.to_json() if train_config else None,
        "vocab": vocab.to_json(),
        "tensors": [{"name": name, "shape": list(arr.shape)}
                    for name, arr in tensors],
    }
    header_bytes = _canonical_header(header)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", len(header_bytes))
    blob += header_bytes
    for _, arr in tensors:
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Read a checkpoint; returns (model, vocab, train_config_dict|None).

    Truncation, an unknown format version, and payload corruption raise
    distinct errors so callers can tell a bad copy from a stale file.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 4:
        raise TruncatedCheckpointError(
            f"{path}: {len(data)} bytes is too short for a checkpoint")
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:4]!r}, "
                              f"not a model checkpoint")
    (header_len,) = struct.unpack_from("<I", data, 4)
    header_end = 8 + header_len
    if len(data) < header_end + 4:
        raise TruncatedCheckpointError(
            f"{path}: header claims {header_len} bytes but file ends early")
    try:
        header = json.loads(data[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChecksumError(f"{path}: unreadable header ({exc})") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, this build reads "
            f"{FORMAT_VERSION}")
    payload_len = sum(8 * int(np.prod(t["shape"], dtype=np.int64))
                      for t in header["tensors"])
    expected = header_end + payload_len + 4
    if len(data) < expected:
        raise TruncatedCheckpointError(
            f"{path}: expected {expected} bytes, found {len(data)}")
    if len(data) > expected:
        raise CheckpointError(
            f"{path}: {len(data) - expected} trailing bytes after checksum")
    (stored_crc,) = struct.unpack_from("<I", data, expected - 4)
    actual_crc = zlib.crc32(data[:expected - 4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumError(
            f"{path}: checksum {actual_crc:#010x} does not match stored "
            f"{stored_crc:#010x}")

    config = ModelConfig(**header["model_config"])
    vocab = Vocabulary.from_json(header["vocab"])
    offset = header_end
    arrays = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f8", count=count,
                            offset=offset).astype(np.float64).reshape(shape)
        arrays[entry["name"]] = arr
        offset += 8 * count
    try:
        model = ReviewModel(
            config=config,
            embedding=arrays["embedding"],
            projection=arrays["projection"],
            lower=GLSTMParams(Wx=arrays["lower.Wx"], Wm=arrays["lower.Wm"],
                              Wq=arrays["lower.Wq"], b=arrays["lower.b"]),
            decoder=DecoderParams(
                cell=GLSTMParams(Wx=arrays["decoder.Wx"],
                                 Wm=arrays["decoder.Wm"],
                                 Wq=arrays["decoder.Wq"],
                                 b=arrays["decoder.b"]),
                W_y=arrays["W_y"], b_y=arrays["b_y"]),
        )
    except KeyError as exc:
        raise CheckpointError(f"{path}: manifest is missing tensor {exc}") \
            from exc
    model.validate()
    if len(vocab) != config.vocab_size:
        raise CheckpointError(
            f"{path}: vocabulary size {len(vocab)} != model vocab_size "
            f"{config.vocab_size}")
    return model, vocab, header["train_config"]
