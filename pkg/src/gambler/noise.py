"""Label corruption with ground-truth masks.

Symmetric noise replaces a label, with probability ``rate``, by a class drawn
uniformly from the *other* ``m - 1`` classes, so ``rate`` is the actual
mislabel probability and ``1 - rate`` is the clean rate used by the plateau
formula.  Pairflip noise sends class ``i`` to ``(i + 1) mod m``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import FormatError, InvalidInputError, InvalidLabelError, InvalidRateError
from .numerics import make_rng

SIDECAR_MAGIC = b"GMNL"
SIDECAR_VERSION = 1


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "symmetric"
    rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind == "symmetric":
            if not 0.0 <= self.rate <= 1.0:
                raise InvalidRateError(f"symmetric rate must lie in [0, 1], got {self.rate}")
        elif self.kind == "pairflip":
            if not 0.0 <= self.rate < 0.5:
                raise InvalidRateError(f"pairflip rate must lie in [0, 0.5), got {self.rate}")
        else:
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")

    @property
    def clean_rate(self) -> float:
        return 1.0 - self.rate


@dataclass
class CorruptedLabels:
    noisy_labels: np.ndarray
    clean_labels: np.ndarray
    corrupt_mask: np.ndarray

    @property
    def effective_rate(self) -> float:
        return float(np.mean(self.corrupt_mask)) if self.corrupt_mask.size else 0.0


@dataclass
class CorruptedDataset:
    inputs: np.ndarray
    noisy_labels: np.ndarray
    clean_labels: np.ndarray
    corrupt_mask: np.ndarray

    @classmethod
    def from_labels(cls, inputs, labels: CorruptedLabels) -> "CorruptedDataset":
        return cls(np.asarray(inputs, dtype=np.float64), labels.noisy_labels, labels.clean_labels, labels.corrupt_mask)

    @classmethod
    def clean(cls, inputs, labels) -> "CorruptedDataset":
        y = np.asarray(labels, dtype=np.int64)
        return cls(np.asarray(inputs, dtype=np.float64), y.copy(), y, np.zeros(y.size, dtype=bool))


def _check_labels(labels, m: int) -> np.ndarray:
    if m < 2:
        raise InvalidInputError("need at least two classes")
    y = np.asarray(labels, dtype=np.int64)
    if y.ndim != 1:
        raise InvalidInputError("labels must be a vector")
    if y.size and (y.min() < 0 or y.max() >= m):
        raise InvalidLabelError(f"labels must lie in [0, {m})")
    return y


def inject_symmetric(labels, m: int, spec: NoiseSpec) -> CorruptedLabels:
    y = _check_labels(labels, m)
    if spec.kind != "symmetric":
        raise InvalidInputError("spec.kind must be 'symmetric'")
    rng = make_rng(spec.seed)
    flip = rng.random(y.size) < spec.rate
    # offset in 1..m-1 keeps the new label off the clean one
    offset = rng.integers(1, m, size=y.size)
    noisy = np.where(flip, (y + offset) % m, y)
    return CorruptedLabels(noisy, y.copy(), noisy != y)


def inject_pairflip(labels, m: int, spec: NoiseSpec) -> CorruptedLabels:
    y = _check_labels(labels, m)
    if spec.kind != "pairflip":
        raise InvalidInputError("spec.kind must be 'pairflip'")
    if spec.rate >= 0.5:
        raise InvalidRateError("pairflip rate must be < 0.5")
    rng = make_rng(spec.seed)
    flip = rng.random(y.size) < spec.rate
    noisy = np.where(flip, (y + 1) % m, y)
    return CorruptedLabels(noisy, y.copy(), noisy != y)


def inject(labels, m: int, spec: NoiseSpec) -> CorruptedLabels:
    if spec.kind == "symmetric":
        return inject_symmetric(labels, m, spec)
    return inject_pairflip(labels, m, spec)


def write_sidecar(path, labels: CorruptedLabels) -> None:
    """``magic "GMNL" | u32 version | u64 N | clean i32[N] | noisy i32[N] | mask u8[N]``."""
    n = labels.clean_labels.size
    buf = bytearray(SIDECAR_MAGIC)
    buf += struct.pack("<IQ", SIDECAR_VERSION, n)
    buf += labels.clean_labels.astype("<i4").tobytes()
    buf += labels.noisy_labels.astype("<i4").tobytes()
    buf += labels.corrupt_mask.astype(np.uint8).tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(buf))
    tmp.replace(path)


def read_sidecar(path) -> CorruptedLabels:
    data = Path(path).read_bytes()
    if data[:4] != SIDECAR_MAGIC:
        raise FormatError(f"{path}: not a noisy-label sidecar")
    if len(data) < 16:
        raise FormatError(f"{path}: truncated sidecar header")
    version, n = struct.unpack_from("<IQ", data, 4)
    if version != SIDECAR_VERSION:
        raise FormatError(f"{path}: unsupported sidecar version {version}")
    if len(data) != 16 + 9 * n:
        raise FormatError(f"{path}: expected {16 + 9 * n} bytes, found {len(data)}")
    clean = np.frombuffer(data, "<i4", n, 16).astype(np.int64)
    noisy = np.frombuffer(data, "<i4", n, 16 + 4 * n).astype(np.int64)
    mask = np.frombuffer(data, np.uint8, n, 16 + 8 * n).astype(bool)
    return CorruptedLabels(noisy, clean, mask)
