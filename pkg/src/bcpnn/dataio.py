"""MNIST-style IDX files and reduced, class-stratified subsets."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolation, IdxParseError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
_GZIP_MAGIC = b"\x1f\x8b"


@dataclass
class ImageDataset:
    images: np.ndarray  # (n, n_pixels) in [0, 1]
    labels: np.ndarray  # (n,) ints in [0, 9]
    name: str = ""

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 2:
            raise ContractViolation("images must be a 2-d (n, pixels) array")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ContractViolation(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise ContractViolation("pixel values must lie in [0, 1]")

    def __len__(self):
        return self.labels.shape[0]

    def take(self, idx, name=None) -> "ImageDataset":
        return ImageDataset(self.images[idx], self.labels[idx], name or self.name)


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == _GZIP_MAGIC:
        raw = gzip.decompress(raw)
    return raw


def read_idx_images(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise IdxParseError("header", f"{path}: image header truncated ({len(raw)} bytes)")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise IdxParseError("magic", f"{path}: expected 0x{IMAGE_MAGIC:08x}, got 0x{magic:08x}")
    need = n * rows * cols
    if len(raw) - 16 < need:
        raise IdxParseError("pixels", f"{path}: expected {need} pixel bytes, found {len(raw) - 16}")
    return np.frombuffer(raw, dtype=np.uint8, count=need, offset=16).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IdxParseError("header", f"{path}: label header truncated ({len(raw)} bytes)")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise IdxParseError("magic", f"{path}: expected 0x{LABEL_MAGIC:08x}, got 0x{magic:08x}")
    if len(raw) - 8 < n:
        raise IdxParseError("labels", f"{path}: expected {n} label bytes, found {len(raw) - 8}")
    return np.frombuffer(raw, dtype=np.uint8, count=n, offset=8)


def load_idx(images_path, labels_path, name: str | None = None) -> ImageDataset:
    """Load an IDX image/label pair (plain or gzip) with pixels scaled to [0, 1]."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxParseError("count", f"{images.shape[0]} images vs {labels.shape[0]} labels")
    if labels.size and labels.max() > 9:
        raise IdxParseError("labels", f"label value {labels.max()} outside [0, 9]")
    flat = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return ImageDataset(flat, labels.astype(np.int64), name or Path(images_path).name)


def write_idx(images_u8, labels_u8, images_path, labels_path, compress: bool | None = None):
    """Write uint8 images (n, rows, cols) and labels (n,) as IDX files.

    Files whose name ends in ``.gz`` are gzip-compressed unless ``compress``
    says otherwise.
    """
    images_u8 = np.asarray(images_u8, dtype=np.uint8)
    labels_u8 = np.asarray(labels_u8, dtype=np.uint8)
    n, rows, cols = images_u8.shape
    img = struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols) + images_u8.tobytes()
    lab = struct.pack(">II", LABEL_MAGIC, labels_u8.shape[0]) + labels_u8.tobytes()
    for path, data in ((images_path, img), (labels_path, lab)):
        gz = str(path).endswith(".gz") if compress is None else compress
        # mtime=0 keeps the bytes reproducible
        Path(path).write_bytes(gzip.compress(data, mtime=0) if gz else data)


def subsample(ds: ImageDataset, n_train: int, n_test: int, rng: np.random.Generator):
    """Disjoint train/test subsets with near-equal class counts, no replacement.

    Each class contributes floor(n / n_classes) items, and the remainder is
    spread one each over randomly chosen classes, so class counts never
    differ by more than one.
    """
    classes = np.unique(ds.labels)
    pools = {c: rng.permutation(np.flatnonzero(ds.labels == c)) for c in classes}
    used = {c: 0 for c in classes}

    def draw(n, what):
        if n < 0:
            raise ContractViolation(f"{what} count must be >= 0")
        quota = np.full(classes.size, n // classes.size)
        quota[rng.choice(classes.size, size=n % classes.size, replace=False)] += 1
        picked = []
        for c, q in zip(classes, quota):
            if used[c] + q > pools[c].size:
                raise ContractViolation(
                    f"class {c}: {what} needs {q} samples but only {pools[c].size - used[c]} remain"
                )
            picked.append(pools[c][used[c] : used[c] + q])
            used[c] += q
        idx = np.concatenate(picked) if picked else np.zeros(0, dtype=np.int64)
        return ds.take(rng.permutation(idx), f"{ds.name}[{what}]")

    return draw(n_train, "train"), draw(n_test, "test")
