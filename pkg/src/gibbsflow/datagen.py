"""Synthetic rotated-pattern data and IDX (MNIST-style) file handling."""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

SIDE = 32


class RotationKind(enum.IntEnum):
    IDENTITY = 0
    ANTI_TRANSPOSE = 1
    FLIP_ABOUT_VERTICAL_AXIS = 2
    FLIP_ABOUT_HORIZONTAL_AXIS = 3

    def apply(self, image: np.ndarray) -> np.ndarray:
        if self is RotationKind.IDENTITY:
            return image.copy()
        if self is RotationKind.ANTI_TRANSPOSE:
            # out[i, j] = image[n-1-j, n-1-i]
            return image[::-1, ::-1].T.copy()
        if self is RotationKind.FLIP_ABOUT_VERTICAL_AXIS:
            return image[:, ::-1].copy()
        return image[::-1, :].copy()

    @property
    def label(self) -> int:
        # Image0 and Image2 form class 0, Image1 and Image3 class 1
        return int(self) % 2


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    note: str = ""

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] == 0:
            raise ValueError(f"inputs must be a non-empty 2-D array, got {self.inputs.shape}")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError(
                f"{self.labels.shape[0]} labels for {self.inputs.shape[0]} input rows")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(self.inputs)):
            raise ValueError("inputs contain non-finite values")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def take(self, index: np.ndarray, note: str | None = None) -> "Dataset":
        return Dataset(self.inputs[index], self.labels[index], self.num_classes,
                       self.note if note is None else note)


@dataclass(frozen=True)
class SyntheticSpec:
    per_rotation_count: int = 64
    noise_variance: float = 0.1
    seed: int = 0
    side: int = SIDE

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")
        if self.per_rotation_count < 1:
            raise ValueError("per_rotation_count must be >= 1")
        if self.side != SIDE:
            raise ValueError(f"only {SIDE}x{SIDE} images are supported")


@dataclass(frozen=True)
class EntropyBudget:
    feature_bits: float
    noise_bits_per_sample: float
    total_bits: float
    label_bits: float


def base_image() -> np.ndarray:
    """The deterministic pattern: a bright rectangle off every symmetry axis."""
    img = np.zeros((SIDE, SIDE))
    img[4:15, 18:29] = 1.0
    return img


def prototypes() -> np.ndarray:
    """The four noiseless transformed images, flattened, in RotationKind order."""
    base = base_image()
    return np.stack([r.apply(base).reshape(-1) for r in RotationKind])


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> Dataset:
    """``4 * per_rotation_count`` noisy images, one rotation per consecutive quarter."""
    rng = np.random.default_rng(spec.seed)
    protos = prototypes()
    n = spec.per_rotation_count
    inputs = np.repeat(protos, n, axis=0)
    if spec.noise_variance > 0:
        inputs = inputs + rng.normal(0.0, math.sqrt(spec.noise_variance), size=inputs.shape)
    labels = np.repeat([r.label for r in RotationKind], n)
    note = (f"synthetic per_rotation_count={n} noise_variance={spec.noise_variance} "
            f"seed={spec.seed}")
    return Dataset(inputs, labels, 2, note)


def entropy_budget(spec: SyntheticSpec = SyntheticSpec()) -> EntropyBudget:
    feature = math.log2(len(RotationKind))
    if spec.noise_variance == 0:
        noise = -math.inf
    else:
        noise = 0.5 * math.log2(2 * math.pi * math.e * spec.noise_variance)
    return EntropyBudget(feature, noise, feature + noise, 1.0)


# -- IDX files --------------------------------------------------------------

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
# float64 image payload, used when exporting unclipped synthetic data
FLOAT_IMAGE_MAGIC = 0x00000E03


class IdxError(ValueError):
    pass


class BadMagicError(IdxError):
    pass


class TruncatedPayloadError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


def read_idx_images(path: str | Path) -> np.ndarray:
    """Images as a float array of shape ``(count, rows*cols)``.

    Unsigned-byte files are scaled to [0, 1]; float64 files are returned as is.
    """
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise TruncatedPayloadError(f"{path}: header shorter than 16 bytes")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic == IMAGE_MAGIC:
        dtype, scale = np.dtype(np.uint8), 255.0
    elif magic == FLOAT_IMAGE_MAGIC:
        dtype, scale = np.dtype(">f8"), 1.0
    else:
        raise BadMagicError(f"{path}: image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")
    need = count * rows * cols * dtype.itemsize
    if len(data) - 16 < need:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(data) - 16} bytes, header promises {need}")
    pixels = np.frombuffer(data, dtype=dtype, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / scale


def read_idx_labels(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise TruncatedPayloadError(f"{path}: header shorter than 8 bytes")
    magic, count = struct.unpack(">II", data[:8])
    if magic != LABEL_MAGIC:
        raise BadMagicError(f"{path}: label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")
    if len(data) - 8 < count:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(data) - 8} bytes, header promises {count}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(np.int64)


def load_idx(images_path: str | Path, labels_path: str | Path,
             num_classes: int | None = None) -> Dataset:
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images in {images_path} but {labels.shape[0]} labels "
            f"in {labels_path}")
    if num_classes is None:
        num_classes = max(10, int(labels.max()) + 1)
    return Dataset(images, labels, num_classes, f"idx {Path(images_path).name}")


def write_idx_images(path: str | Path, images: np.ndarray, side: int | None = None,
                     as_float: bool = False) -> None:
    """Write flattened square images; bytes unless ``as_float``."""
    images = np.asarray(images, dtype=np.float64)
    count, m = images.shape
    side = side or math.isqrt(m)
    if side * side != m:
        raise ValueError(f"rows of length {m} are not square images")
    if as_float:
        header = struct.pack(">IIII", FLOAT_IMAGE_MAGIC, count, side, side)
        payload = images.astype(">f8").tobytes()
    else:
        header = struct.pack(">IIII", IMAGE_MAGIC, count, side, side)
        payload = np.clip(np.rint(images * 255.0), 0, 255).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


def write_idx_labels(path: str | Path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    header = struct.pack(">II", LABEL_MAGIC, labels.size)
    Path(path).write_bytes(header + labels.astype(np.uint8).tobytes())


def export_synthetic(spec: SyntheticSpec, out_dir: str | Path) -> dict[str, Path]:
    """Write the synthetic set as float64 IDX files plus a JSON sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = generate_synthetic(spec)
    paths = {"images": out / "synthetic-images.idx3-f64",
             "labels": out / "synthetic-labels.idx1-ubyte",
             "sidecar": out / "synthetic.json"}
    write_idx_images(paths["images"], data.inputs, spec.side, as_float=True)
    write_idx_labels(paths["labels"], data.labels)
    budget = entropy_budget(spec)
    sidecar = {"spec": asdict(spec),
               "entropy_budget": {k: (None if math.isinf(v) else v)
                                  for k, v in asdict(budget).items()},
               "num_samples": len(data), "num_classes": data.num_classes}
    paths["sidecar"].write_text(json.dumps(sidecar, indent=2) + "\n")
    return paths


# -- sampling ---------------------------------------------------------------

def subset(dataset: Dataset, n: int, seed: int) -> Dataset:
    """``n`` rows drawn without replacement."""
    if not 0 < n <= len(dataset):
        raise ValueError(f"subset size {n} outside (0, {len(dataset)}]")
    idx = np.random.default_rng(seed).choice(len(dataset), size=n, replace=False)
    return dataset.take(idx, f"{dataset.note} subset n={n} seed={seed}")


def split(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    n_train = int(round(fraction * len(dataset)))
    if not 0 < n_train < len(dataset):
        raise ValueError(f"fraction {fraction} leaves an empty side of a {len(dataset)}-row split")
    perm = np.random.default_rng(seed).permutation(len(dataset))
    return (dataset.take(perm[:n_train], f"{dataset.note} train split"),
            dataset.take(perm[n_train:], f"{dataset.note} test split"))


def stratified_subset(dataset: Dataset, per_class: int, seed: int) -> Dataset:
    """``per_class`` rows of every class, ordered by class."""
    rng = np.random.default_rng(seed)
    picks = []
    for c in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == c)
        if members.size < per_class:
            raise ValueError(f"class {c} has only {members.size} rows, need {per_class}")
        picks.append(np.sort(rng.choice(members, size=per_class, replace=False)))
    return dataset.take(np.concatenate(picks), f"{dataset.note} {per_class}/class")
