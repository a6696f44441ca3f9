"""Reader and writer for the big-endian IDX files MNIST ships in.

Layout: a 4-byte magic (``0x00000803`` for 3-D ubyte images, ``0x00000801``
for 1-D ubyte labels), one big-endian uint32 per dimension, then the raw
bytes. Gzip-compressed files are detected by their header and read
transparently.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class MnistDataset:
    images: np.ndarray  # (N, rows*cols) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64 in [0, 10)

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("image and label counts differ")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 9):
            raise ValueError("labels must lie in [0, 10)")

    def __len__(self) -> int:
        return self.labels.shape[0]


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse(raw: bytes, magic: int, ndim: int, path) -> np.ndarray:
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(f"{path}: truncated header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IdxFormatError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise IdxFormatError(f"{path}: truncated data ({len(raw) - header} of {size} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def read_idx_images(path) -> np.ndarray:
    return _parse(_read_bytes(path), IMAGES_MAGIC, 3, path)


def read_idx_labels(path) -> np.ndarray:
    return _parse(_read_bytes(path), LABELS_MAGIC, 1, path)


def load_mnist_idx(images_path, labels_path, limit: Optional[int] = None) -> MnistDataset:
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images in {images_path}, {labels.shape[0]} labels in {labels_path}"
        )
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    flat = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return MnistDataset(flat, labels.astype(np.int64))


def write_idx_images(path, images: np.ndarray, compress: Optional[bool] = None) -> None:
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError("images must be (N, rows, cols) uint8")
    _write(path, IMAGES_MAGIC, images, compress)


def write_idx_labels(path, labels: np.ndarray, compress: Optional[bool] = None) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.ndim != 1:
        raise ValueError("labels must be 1-D uint8")
    _write(path, LABELS_MAGIC, labels, compress)


def _write(path, magic: int, arr: np.ndarray, compress: Optional[bool]) -> None:
    payload = struct.pack(">I", magic) + struct.pack(f">{arr.ndim}I", *arr.shape) + arr.tobytes()
    if compress is None:
        compress = os.fspath(path).endswith(".gz")
    if compress:
        payload = gzip.compress(payload, mtime=0)
    with open(path, "wb") as fh:
        fh.write(payload)
