"""IDX (MNIST) file reading and writing, plus small in-memory datasets."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

# IDX type byte -> numpy big-endian dtype
_IDX_TYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    """Images of shape (N, 1, H, H) scaled to [0, 1], integer labels of shape (N,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 4 or self.x.shape[0] != self.y.shape[0]:
            raise DatasetError(f"bad dataset shapes {self.x.shape} / {self.y.shape}")

    def __len__(self):
        return int(self.y.shape[0])

    def subset(self, count: int) -> "Dataset":
        return Dataset(self.x[:count], self.y[:count])


def _open(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path: str | os.PathLike) -> np.ndarray:
    try:
        with _open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise DatasetError(f"{path}: not an IDX file")
    dtype = _IDX_TYPES.get(raw[2])
    if dtype is None:
        raise DatasetError(f"{path}: unknown IDX type byte 0x{raw[2]:02x}")
    ndim = raw[3]
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DatasetError(f"{path}: truncated header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    count = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header != count * dtype.itemsize:
        raise DatasetError(
            f"{path}: payload has {len(raw) - header} bytes, expected {count * dtype.itemsize}"
        )
    return np.frombuffer(raw, dtype=dtype, offset=header).reshape(dims).astype(dtype.newbyteorder("="))


def write_idx(path: str | os.PathLike, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise DatasetError("only uint8 IDX output is supported")
    header = struct.pack(">BBBB", 0, 0, 0x08, array.ndim) + struct.pack(">" + "I" * array.ndim, *array.shape)
    opener = gzip.open if str(path).endswith(".gz") else open
    # empty name and mtime=0 keep gzip output byte-identical across runs and paths
    if opener is gzip.open:
        with open(path, "wb") as raw, gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as fh:
            fh.write(header + array.tobytes())
    else:
        with open(path, "wb") as fh:
            fh.write(header + array.tobytes())


def _find(directory, stem):
    for name in (stem, stem + ".gz"):
        p = os.path.join(directory, name)
        if os.path.exists(p):
            return p
    raise DatasetError(f"missing dataset file {stem}[.gz] in {directory}")


def load_mnist(directory: str | os.PathLike, split: str = "train", limit: int | None = None) -> Dataset:
    """Load an MNIST split from IDX files in ``directory`` (plain or gzipped)."""
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    images = read_idx(_find(directory, MNIST_FILES[f"{split}_images"]))
    labels = read_idx(_find(directory, MNIST_FILES[f"{split}_labels"]))
    # unsigned-byte 3-D images (magic 0x00000803) and 1-D labels (0x00000801)
    if images.dtype != np.uint8 or images.ndim != 3:
        raise DatasetError(f"{split} images: expected magic 0x{IMAGES_MAGIC:08x} (ubyte, 3 dims)")
    if labels.dtype != np.uint8 or labels.ndim != 1:
        raise DatasetError(f"{split} labels: expected magic 0x{LABELS_MAGIC:08x} (ubyte, 1 dim)")
    if images.shape[0] != labels.shape[0]:
        raise DatasetError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    x = images.astype(np.float64)[:, None] / 255.0
    return Dataset(x, labels.astype(np.int64))


def synthetic_digits(
    count: int, size: int = 8, classes: int = 10, noise: float = 0.15, seed: int = 0, proto_seed: int = 1234
) -> Dataset:
    """Toy images: one smooth random prototype per class plus pixel noise.

    Prototypes depend only on ``proto_seed``, so train and test sets drawn with
    different ``seed`` values share classes.
    """
    protos = np.random.default_rng(proto_seed).random((classes, size, size))
    # light 3x3 smoothing so prototypes carry low-frequency structure
    padded = np.pad(protos, ((0, 0), (1, 1), (1, 1)), mode="edge")
    protos = sum(padded[:, a:a + size, b:b + size] for a in range(3) for b in range(3)) / 9.0
    lo = protos.min(axis=(1, 2), keepdims=True)
    hi = protos.max(axis=(1, 2), keepdims=True)
    protos = (protos - lo) / np.maximum(hi - lo, 1e-12)
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, classes, size=count)
    x = protos[labels] + noise * rng.standard_normal((count, size, size))
    return Dataset(np.clip(x, 0.0, 1.0)[:, None], labels.astype(np.int64))
