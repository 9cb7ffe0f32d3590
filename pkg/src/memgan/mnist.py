"""MNIST IDX ingestion, digit filtering, normalisation to [-1, 1] and batching."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")
DATA_ENV = "MEMGAN_DATA_DIR"
DEFAULT_DIGIT_CAP = 6080


class IDXFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (N, 784) in [-1, 1]
    labels: np.ndarray  # (N,) ints in [0, 9]

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")

    def __len__(self):
        return len(self.labels)


def normalize(pixels) -> np.ndarray:
    return np.asarray(pixels, dtype=float) / 127.5 - 1.0


def denormalize(images) -> np.ndarray:
    return (np.asarray(images, dtype=float) + 1.0) * 127.5


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    data = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IDXFormatError(f"{path}: truncated header")
    (got,) = struct.unpack(">I", data[:4])
    if got != magic:
        raise IDXFormatError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = int(np.prod(dims))
    if len(data) - header != count:
        raise IDXFormatError(
            f"{path}: header declares {count} bytes of payload, found {len(data) - header}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    images = _read_idx(images_path, IMAGE_MAGIC, 3)
    labels = _read_idx(labels_path, LABEL_MAGIC, 1)
    if len(images) != len(labels):
        raise IDXFormatError(f"{len(images)} images but {len(labels)} labels")
    flat = images.reshape(len(images), -1)
    return Dataset(normalize(flat), labels.astype(np.int64))


def resolve_data_dir(data_dir=None) -> Path:
    d = data_dir or os.environ.get(DATA_ENV)
    if not d:
        raise FileNotFoundError(f"no MNIST directory given and {DATA_ENV} is unset")
    d = Path(d)
    missing = [f for f in TRAIN_FILES + TEST_FILES if not (d / f).exists()]
    if missing:
        raise FileNotFoundError(f"{d}: missing {', '.join(missing)}")
    return d


def load_mnist(data_dir=None, split: str = "train") -> Dataset:
    d = resolve_data_dir(data_dir)
    files = TRAIN_FILES if split == "train" else TEST_FILES
    return load_idx(d / files[0], d / files[1])


def filter_digit(ds: Dataset, digit: int, cap: int | None = DEFAULT_DIGIT_CAP) -> Dataset:
    """First ``cap`` examples of ``digit`` in file order (all of them when ``cap`` is None)."""
    if not 0 <= digit <= 9:
        raise ValueError(f"digit must be in 0..9, got {digit}")
    idx = np.flatnonzero(ds.labels == digit)
    if cap is not None:
        if len(idx) < cap:
            raise ValueError(f"only {len(idx)} images of digit {digit}, {cap} requested")
        idx = idx[:cap]
    return Dataset(ds.images[idx], ds.labels[idx])


def batches(ds: Dataset, batch_size: int, shuffle_seed=None) -> list[np.ndarray]:
    """Split into full batches of ``batch_size``; a short tail is dropped."""
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    order = np.arange(len(ds))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(ds))
    n = len(ds) // batch_size
    return [ds.images[order[i * batch_size:(i + 1) * batch_size]] for i in range(n)]
