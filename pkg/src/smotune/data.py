"""Image/mask I/O, resizing, augmentation and a synthetic cell dataset.

On disk a dataset is ``images/<id>.png`` plus ``masks/<id>.png``, where masks
are 8-bit single-channel PNGs whose pixel value is the class index. Images
are read as grayscale floats in [0, 1]; RGB input is converted by luminance
``0.299 R + 0.587 G + 0.114 B``.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, InvalidInput, MissingPair, ShapeMismatch
from .rng import make_rng

log = logging.getLogger(__name__)

__all__ = [
    "SamplePair",
    "AUGMENT_OPS",
    "read_gray",
    "read_mask",
    "write_gray",
    "write_mask",
    "resize_image",
    "resize_mask",
    "load_pair",
    "augment",
    "synth_dataset",
    "save_dataset",
    "load_dataset",
    "list_ids",
    "CLEAN_THRESHOLDS",
]

DEFAULT_SIZE = 256
AUGMENT_OPS = ("hflip", "vflip", "rot90", "rot180", "rot270")
# background < 0.3 < cytoplasm < 0.7 < nucleus in the noise-free synthetic images
CLEAN_THRESHOLDS = (0.3, 0.7)


@dataclass(frozen=True, eq=False)
class SamplePair:
    image: np.ndarray
    mask: np.ndarray
    id: str
    clean: Optional[np.ndarray] = None

    def __post_init__(self):
        if np.shape(self.image) != np.shape(self.mask):
            raise ShapeMismatch(f"{self.id}: image {np.shape(self.image)} != mask {np.shape(self.mask)}")

    def __eq__(self, other):
        return (isinstance(other, SamplePair) and self.id == other.id
                and np.array_equal(self.image, other.image)
                and np.array_equal(self.mask, other.mask))


def _open(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    return img


def read_gray(path) -> np.ndarray:
    img = _open(path)
    if img.mode in ("I;16", "I;16B", "I;16L"):
        return np.asarray(img, dtype=float) / 65535.0
    if img.mode in ("I", "F"):
        data = np.asarray(img, dtype=float)
        top = data.max(initial=0.0)
        return np.clip(data / (65535.0 if top > 255 else 255.0), 0.0, 1.0)
    if img.mode == "L":
        return np.asarray(img, dtype=float) / 255.0
    rgb = np.asarray(img.convert("RGB"), dtype=float)
    lum = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(lum / 255.0, 0.0, 1.0)


def read_mask(path) -> np.ndarray:
    img = _open(path)
    if img.mode in ("L", "P"):
        return np.asarray(img, dtype=np.uint8).copy()
    if img.mode == "1":
        return np.asarray(img, dtype=np.uint8).copy()
    data = np.asarray(img)
    if data.ndim == 3:
        log.warning("%s: multi-channel mask, using the first channel", path)
        data = data[..., 0]
    if data.max(initial=0) > 255:
        raise DecodeError(f"{path}: mask labels exceed 8 bits")
    return data.astype(np.uint8)


def _to_u8(img: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_gray(path, img) -> None:
    Image.fromarray(_to_u8(np.asarray(img, dtype=float))).save(path, format="PNG")


def write_mask(path, mask) -> None:
    mask = np.asarray(mask)
    if mask.size and (mask.min() < 0 or mask.max() > 255):
        raise InvalidInput("mask labels must fit in 8 bits")
    Image.fromarray(mask.astype(np.uint8)).save(path, format="PNG")


def resize_image(img: np.ndarray, size: int = DEFAULT_SIZE) -> np.ndarray:
    """Bilinear resize to ``size x size``; same-size input is returned unchanged."""
    img = np.asarray(img, dtype=float)
    if img.shape == (size, size):
        return img.copy()
    out = Image.fromarray(img.astype(np.float32)).resize((size, size), Image.BILINEAR)
    return np.clip(np.asarray(out, dtype=float), 0.0, 1.0)


def resize_mask(mask: np.ndarray, size: int = DEFAULT_SIZE) -> np.ndarray:
    """Nearest-neighbour resize, so no new labels appear."""
    mask = np.asarray(mask, dtype=np.uint8)
    if mask.shape == (size, size):
        return mask.copy()
    return np.asarray(Image.fromarray(mask).resize((size, size), Image.NEAREST))


def load_pair(image_path, mask_path, size: int = DEFAULT_SIZE, id: Optional[str] = None) -> SamplePair:
    image = read_gray(image_path)
    mask = read_mask(mask_path)
    if image.shape != mask.shape:
        log.warning("%s: image %s and mask %s differ before resizing",
                    image_path, image.shape, mask.shape)
    return SamplePair(resize_image(image, size), resize_mask(mask, size),
                      id if id is not None else Path(image_path).stem)


_AUGMENT = {
    "hflip": np.fliplr,
    "vflip": np.flipud,
    "rot90": lambda a: np.rot90(a, 1),
    "rot180": lambda a: np.rot90(a, 2),
    "rot270": lambda a: np.rot90(a, 3),
}


def augment(pair: SamplePair, op: str) -> SamplePair:
    """Apply the same flip or rotation to image and mask."""
    try:
        f = _AUGMENT[op]
    except KeyError:
        raise InvalidInput(f"unknown augmentation {op!r}; choose from {AUGMENT_OPS}") from None
    clean = None if pair.clean is None else np.ascontiguousarray(f(pair.clean))
    return replace(pair, image=np.ascontiguousarray(f(pair.image)),
                   mask=np.ascontiguousarray(f(pair.mask)), clean=clean)


def _ellipse(yy, xx, cy, cx, a, b, theta):
    """Normalized coordinates of each pixel in an ellipse's own frame."""
    c, s = np.cos(theta), np.sin(theta)
    dx, dy = xx - cx, yy - cy
    return (c * dx + s * dy) / a, (-s * dx + c * dy) / b


def synth_dataset(n: int, seed: int, size: int = DEFAULT_SIZE, noise: float = 0.05) -> list:
    """Synthetic smear-like images with 1-3 cells each.

    Every cell is a mid-gray cytoplasm ellipse holding a bright nucleus
    ellipse, on a dark background, plus Gaussian noise. Masks label
    background/cytoplasm/nucleus as 0/1/2. The noise-free image is kept in
    ``SamplePair.clean``.
    """
    if int(n) != n or n < 1:
        raise InvalidInput(f"n must be a positive integer, got {n}")
    rng = make_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    pairs = []
    for k in range(int(n)):
        background = rng.uniform(0.05, 0.2)
        clean = np.full((size, size), background)
        mask = np.zeros((size, size), dtype=np.uint8)
        cells = []
        for _ in range(int(rng.integers(1, 4))):
            a = rng.uniform(0.08, 0.2) * size
            b = rng.uniform(0.6, 1.0) * a
            cy, cx = rng.uniform(a, size - a, size=2)
            theta = rng.uniform(0, np.pi)
            scale = rng.uniform(0.25, 0.4)
            # nucleus centre offset in the cytoplasm's normalized frame;
            # |offset| + scale <= 0.95 keeps the nucleus strictly inside
            r_off = rng.uniform(0, 0.95 - scale)
            phi = rng.uniform(0, 2 * np.pi)
            cells.append((cy, cx, a, b, theta, scale, r_off * np.cos(phi), r_off * np.sin(phi),
                          rng.uniform(0.4, 0.6), rng.uniform(0.8, 0.95)))
        frames = [_ellipse(yy, xx, c[0], c[1], c[2], c[3], c[4]) for c in cells]
        for (u, v), cell in zip(frames, cells):
            inside = u * u + v * v <= 1.0
            clean[inside] = cell[8]
            mask[inside] = 1
        for (u, v), cell in zip(frames, cells):
            scale, ou, ov = cell[5], cell[6], cell[7]
            inside = (u - ou) ** 2 + (v - ov) ** 2 <= scale * scale
            clean[inside] = cell[9]
            mask[inside] = 2
        image = np.clip(clean + rng.normal(0.0, noise, size=clean.shape), 0.0, 1.0)
        pairs.append(SamplePair(image, mask, f"synth_{k:04d}", clean))
    return pairs


def list_ids(directory, suffix: str = ".png") -> list:
    directory = Path(directory)
    if not directory.is_dir():
        return []
    return sorted(p.stem for p in directory.iterdir() if p.is_file() and p.suffix.lower() == suffix)


def save_dataset(pairs: Iterable[SamplePair], root, write_manifest: bool = True) -> list:
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    ids = []
    for pair in pairs:
        write_gray(root / "images" / f"{pair.id}.png", pair.image)
        write_mask(root / "masks" / f"{pair.id}.png", pair.mask)
        ids.append(pair.id)
    if write_manifest:
        (root / "manifest.txt").write_text("".join(f"{i}\n" for i in ids))
    return ids


def _read_manifest(path) -> list:
    ids = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            ids.append(line)
    return ids


def load_dataset(root, size: Optional[int] = DEFAULT_SIZE, manifest=None) -> list:
    """Load every pair under ``root`` (or the ids listed in ``manifest``).

    ``size=None`` keeps the stored resolution.
    """
    root = Path(root)
    if manifest is not None:
        ids = _read_manifest(manifest)
    else:
        ids = list_ids(root / "images")
    pairs = []
    for i in ids:
        img_path, mask_path = root / "images" / f"{i}.png", root / "masks" / f"{i}.png"
        for p in (img_path, mask_path):
            if not p.is_file():
                raise MissingPair(f"{i}: missing {os.fspath(p)}")
        if size is None:
            pairs.append(SamplePair(read_gray(img_path), read_mask(mask_path), i))
        else:
            pairs.append(load_pair(img_path, mask_path, size, i))
    return pairs
