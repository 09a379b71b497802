"""Datasets: Gaussian blobs and MNIST-format (IDX) files."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConsistencyError, FormatError, InvalidInputError, SizeError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    num_classes: int
    num_train: int
    num_test: int
    input_dim: int
    source: str

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidInputError("num_classes must be >= 2")
        if min(self.num_train, self.num_test, self.input_dim) <= 0:
            raise InvalidInputError("dataset counts must be positive")
        if self.source not in ("blobs", "idx"):
            raise InvalidInputError(f"unknown source {self.source!r}")


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    num_classes: int
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.y.size

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.num_classes, dict(self.info))


def _blob_centers(m: int, dim: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    if m <= dim:
        # scaled orthonormal frame: every pair sits exactly `separation` apart
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        return q[:, :m].T * (separation / np.sqrt(2.0))
    centers: list[np.ndarray] = []
    radius = separation * m / dim
    misses = 0
    while len(centers) < m:
        c = rng.standard_normal(dim) * radius
        if all(np.linalg.norm(c - o) >= separation for o in centers):
            centers.append(c)
            misses = 0
        else:
            misses += 1
            if misses > 100:
                radius *= 1.1
                misses = 0
    return np.asarray(centers)


def generate_blobs(n: int, m: int, dim: int, separation: float, rng: np.random.Generator) -> Dataset:
    """``m`` unit-variance Gaussian clusters with pairwise center distance >= ``separation``.

    Class sizes differ by at most one; rows come out shuffled.
    """
    if m < 2:
        raise InvalidInputError("need at least two classes")
    if not separation > 0:
        raise InvalidInputError("separation must be positive")
    if n < 1 or dim < 1:
        raise InvalidInputError("n and dim must be positive")
    centers = _blob_centers(m, dim, separation, rng)
    y = np.arange(n) % m
    y = y[rng.permutation(n)]
    X = centers[y] + rng.standard_normal((n, dim))
    return Dataset(X, y.astype(np.int64), m, {"name": "blobs", "source": "blobs", "centers": centers.tolist(),
                                               "separation": separation, "dim": dim})


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, expected_magic: int, ndim: int) -> np.ndarray:
    with _open(path) as fh:
        data = fh.read()
    if len(data) < 4:
        raise OSError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise FormatError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise OSError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = int(np.prod(dims))
    if len(data) - header < count:
        raise OSError(f"{path}: truncated IDX payload ({len(data) - header} of {count} bytes)")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, num_classes: int = 10) -> Dataset:
    """Read an IDX image/label pair (optionally gzipped).

    Images are flattened and scaled to ``[0, 1]`` by dividing by 255.
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = labels.astype(np.int64)
    if y.size and y.max() >= num_classes:
        raise ConsistencyError(f"label {y.max()} exceeds num_classes={num_classes}")
    return Dataset(X, y, num_classes, {"name": Path(images_path).name, "source": "idx",
                                       "rows": images.shape[1], "cols": images.shape[2]})


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 ``images`` (n, rows, cols) and ``labels`` (n,) as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3:
        raise InvalidInputError("images must have shape (n, rows, cols)")
    Path(images_path).write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, labels.size) + labels.tobytes())


def load_mnist(directory, split: str = "train") -> Dataset:
    """Load ``train`` or ``t10k`` files from ``directory`` (plain or ``.gz``)."""
    prefix = "train" if split == "train" else "t10k"
    directory = Path(directory)
    paths = []
    for stem in (f"{prefix}-images-idx3-ubyte", f"{prefix}-labels-idx1-ubyte"):
        for candidate in (directory / stem, directory / f"{stem}.gz"):
            if candidate.exists():
                paths.append(candidate)
                break
        else:
            raise FileNotFoundError(f"{stem}[.gz] not found in {directory}")
    ds = load_idx(*paths)
    ds.info["name"] = f"mnist-{prefix}"
    return ds


def subset_split(dataset: Dataset, train_n: int, val_fraction: float, rng: np.random.Generator):
    """Shuffle, keep ``train_n`` rows, and carve the validation part from them.

    Returns ``(train, val, rest)``; ``rest`` holds every row not drawn into
    the subset and may be empty.
    """
    n = len(dataset)
    if train_n > n:
        raise SizeError(f"asked for {train_n} rows, only {n} available")
    if train_n < 1:
        raise SizeError("train_n must be positive")
    if not 0.0 <= val_fraction < 1.0:
        raise InvalidInputError("val_fraction must lie in [0, 1)")
    perm = rng.permutation(n)
    n_val = int(round(train_n * val_fraction))
    chosen = perm[:train_n]
    return dataset.take(chosen[n_val:]), dataset.take(chosen[:n_val]), dataset.take(perm[train_n:])
