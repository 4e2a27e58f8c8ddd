"""Image datasets: CIFAR-10 when obtainable, plus a self-contained fallback.

`patches32` is a deterministic corpus of 32x32 images made from the natural
photographs bundled with scikit-image, so training works in offline
environments.  Crops are taken at several window sizes (downscaled to 32x32)
with dihedral augmentation, which keeps the content diversity close to a
thumbnail dataset rather than a texture library.  Train and test crops come
from disjoint column ranges of the source images, never sharing a pixel.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidConfigError

DEFAULT_TRAIN_SIZE = 50_000
DEFAULT_TEST_SIZE = 10_000

# Corpus constants for patches32; not knobs, changing them changes the dataset.
_PATCHES_SEED = 0x32C3
_PATCH = 32
_WINDOWS = (32, 48, 64, 96, 128)
_MOSAIC_FRACTION = 0.5  # composite samples force information spread
_TRAIN_FRACTION = 0.75

_SOURCES = (
    "astronaut",
    "chelsea",
    "coffee",
    "hubble_deep_field",
    "immunohistochemistry",
    "retina",
    "rocket",
)


@dataclass(frozen=True)
class DatasetSpec:
    """Identifier + split + optional subset size."""

    name: str = "patches32"
    split: str = "train"
    subset: int | None = None

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise InvalidConfigError(f"split must be train or test, got {self.split!r}")
        if self.subset is not None and self.subset < 1:
            raise InvalidConfigError(f"subset must be positive, got {self.subset}")

    def to_dict(self) -> dict:
        return {"name": self.name, "split": self.split, "subset": self.subset}

    @staticmethod
    def from_dict(d: dict) -> "DatasetSpec":
        return DatasetSpec(
            name=d.get("name", "patches32"),
            split=d.get("split", "train"),
            subset=d.get("subset"),
        )


def data_root() -> str:
    return os.environ.get("JSCCKIT_DATA", os.path.expanduser("~/.cache/jscckit"))


def _load_cifar10(split: str, subset: int | None) -> np.ndarray:
    try:
        from torchvision.datasets import CIFAR10

        ds = CIFAR10(root=data_root(), train=(split == "train"), download=True)
    except Exception as exc:
        raise DataError(
            "CIFAR-10 is not available (download failed and no local copy); "
            "use dataset name 'patches32' or 'auto32' for offline runs"
        ) from exc
    data = ds.data  # (N, 32, 32, 3) uint8
    if subset is not None:
        data = data[:subset]
    return np.ascontiguousarray(data.transpose(0, 3, 1, 2))


def _source_images() -> list[np.ndarray]:
    import skimage.data

    return [getattr(skimage.data, name)() for name in _SOURCES]


def _crop_ranges(images, split: str, window: int):
    """Valid crop-origin ranges per source image, or None when the split's
    column stripe cannot fit the window."""
    ranges = []
    for img in images:
        h, w = img.shape[:2]
        b = int(w * _TRAIN_FRACTION)
        if split == "train":
            x_lo, x_hi = 0, b - window
        else:
            x_lo, x_hi = b, w - window
        y_hi = h - window
        ranges.append((x_lo, x_hi, y_hi) if (x_hi >= x_lo and y_hi >= 0) else None)
    return ranges


def _draw_crop(rng, images, per_window) -> np.ndarray:
    """One (32, 32, 3) crop: window size, source, origin, dihedral variant."""
    import cv2

    window = int(_WINDOWS[rng.integers(0, len(_WINDOWS))])
    ranges, weights = per_window[window]
    s = int(rng.choice(len(images), p=weights))
    x_lo, x_hi, y_hi = ranges[s]
    x = int(rng.integers(x_lo, x_hi + 1))
    y = int(rng.integers(0, y_hi + 1))
    quarter_turns = int(rng.integers(0, 4))
    flip = bool(rng.integers(0, 2))
    crop = images[s][y : y + window, x : x + window]
    if window != _PATCH:
        crop = cv2.resize(crop, (_PATCH, _PATCH), interpolation=cv2.INTER_AREA)
    if quarter_turns:
        crop = np.rot90(crop, quarter_turns)
    if flip:
        crop = crop[:, ::-1]
    return np.ascontiguousarray(crop)


def _patches32(split: str, subset: int | None) -> np.ndarray:
    import cv2

    n = subset if subset is not None else (
        DEFAULT_TRAIN_SIZE if split == "train" else DEFAULT_TEST_SIZE
    )
    images = _source_images()
    per_window = {}
    for window in _WINDOWS:
        ranges = _crop_ranges(images, split, window)
        areas = np.array(
            [0 if r is None else (r[1] - r[0] + 1) * (r[2] + 1) for r in ranges], float
        )
        if areas.sum() == 0:
            raise DataError(f"no source image can fit a {window}px window for split {split}")
        per_window[window] = (ranges, areas / areas.sum())

    split_id = 0 if split == "train" else 1
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([_PATCHES_SEED, split_id])))
    half = _PATCH // 2
    out = np.empty((n, 3, _PATCH, _PATCH), dtype=np.uint8)
    for i in range(n):
        if rng.random() < _MOSAIC_FRACTION:
            # four unrelated quadrants; keeps low-rate reconstruction honest
            canvas = np.empty((_PATCH, _PATCH, 3), dtype=np.uint8)
            for qy in (0, 1):
                for qx in (0, 1):
                    tile = cv2.resize(
                        _draw_crop(rng, images, per_window),
                        (half, half),
                        interpolation=cv2.INTER_AREA,
                    )
                    canvas[qy * half : (qy + 1) * half, qx * half : (qx + 1) * half] = tile
            crop = canvas
        else:
            crop = _draw_crop(rng, images, per_window)
        out[i] = crop.transpose(2, 0, 1)
    return out


def cifar10_available() -> bool:
    try:
        _load_cifar10("test", 1)
        return True
    except DataError:
        return False


def resolve_dataset_name(name: str) -> str:
    """Resolve 'auto32' to a concrete dataset once, for config snapshots."""
    if name == "auto32":
        return "cifar10" if cifar10_available() else "patches32"
    return name


def load_dataset(spec: DatasetSpec) -> np.ndarray:
    """Return images as uint8 (N, 3, 32, 32); scale to [0,1] at point of use."""
    name = resolve_dataset_name(spec.name)
    if name == "cifar10":
        return _load_cifar10(spec.split, spec.subset)
    if name == "patches32":
        return _patches32(spec.split, spec.subset)
    raise InvalidConfigError(f"unknown dataset {spec.name!r}")


def to_float(images: np.ndarray) -> np.ndarray:
    return images.astype(np.float32) / np.float32(255.0)


def sample_ids(spec: DatasetSpec, count: int) -> list[str]:
    name = resolve_dataset_name(spec.name)
    return [f"{name}-{spec.split}-{i:05d}" for i in range(count)]
