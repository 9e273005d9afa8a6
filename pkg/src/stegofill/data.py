"""Image ingestion, procedural synthesis, and cover corruption.

Images live in memory as (H, W, C) float64 arrays in [-1, 1]. Stego
output is written as PNG only; anything lossy would destroy the written
bit planes.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter
from scipy.special import expit

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle: (top, left) corner plus height and width."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DataError(f"rectangle must have positive size, got {self}")
        if self.top < 0 or self.left < 0:
            raise DataError(f"rectangle corner must be non-negative, got {self}")

    @property
    def slices(self) -> tuple[slice, slice]:
        return (slice(self.top, self.top + self.height),
                slice(self.left, self.left + self.width))

    def within(self, image_shape: tuple[int, int]) -> bool:
        H, W = image_shape
        return self.top + self.height <= H and self.left + self.width <= W

    @classmethod
    def parse(cls, text: str) -> "Rect":
        parts = [int(v) for v in text.replace(",", " ").split()]
        if len(parts) != 4:
            raise DataError(f"expected 'top,left,height,width', got {text!r}")
        return cls(*parts)


def central_region(image_shape: tuple[int, int], fraction: float = 0.5) -> Rect:
    """Centered square region covering ``fraction`` of each side."""
    H, W = image_shape
    h, w = max(1, round(H * fraction)), max(1, round(W * fraction))
    return Rect((H - h) // 2, (W - w) // 2, h, w)


@dataclass(frozen=True)
class ImageRecord:
    pixels: np.ndarray  # (H, W, C) float64 in [-1, 1]
    source_id: str

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.float64)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class CorruptedCover:
    """Cover with a missing region: display copy zeroed, mask 0 over the region."""

    image: np.ndarray
    region: Rect
    mask: np.ndarray

    def __post_init__(self):
        for name in ("image", "mask"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def corrupt(record, region: Rect) -> CorruptedCover:
    """Remove a rectangular region: zero its display pixels, mark mask=0 there."""
    pixels = record.pixels if isinstance(record, ImageRecord) else np.asarray(record, dtype=np.float64)
    if not region.within(pixels.shape[:2]):
        raise DataError(f"region {region} exceeds image shape {pixels.shape[:2]}")
    image = pixels.copy()
    image[region.slices] = 0.0
    mask = np.ones(pixels.shape[:2], dtype=np.uint8)
    mask[region.slices] = 0
    return CorruptedCover(image=image, region=region, mask=mask)


# --- file I/O ----------------------------------------------------------------

def to_real(arr_u8: np.ndarray) -> np.ndarray:
    return np.asarray(arr_u8, dtype=np.float64) / 127.5 - 1.0


def _normalize(img: Image.Image, size: int, channels: int) -> np.ndarray:
    img = img.convert("L" if channels == 1 else "RGB")
    w, h = img.size
    side = min(w, h)
    img = img.crop(((w - side) // 2, (h - side) // 2,
                    (w - side) // 2 + side, (h - side) // 2 + side))
    img = img.resize((size, size), Image.LANCZOS)
    arr = np.asarray(img, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if channels == 3 and arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return to_real(arr)


def load_cover(path, size: int, channels: int = 3) -> ImageRecord:
    """Decode one raster file, center-crop to square, resample to size."""
    try:
        with Image.open(path) as img:
            pixels = _normalize(img, size, channels)
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    return ImageRecord(pixels=pixels, source_id=str(path))


def ingest(directory, size: int, channels: int = 3) -> list[ImageRecord]:
    """Load every decodable raster in a directory; skip and log the rest."""
    records = []
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        if not os.path.isfile(path):
            continue
        try:
            records.append(load_cover(path, size, channels))
        except DataError as exc:
            log.warning("skipping %s: %s", path, exc)
    if not records:
        raise DataError(f"no usable images found under {directory}")
    return records


def as_array(records: list[ImageRecord]) -> np.ndarray:
    return np.stack([r.pixels for r in records])


# --- procedural corpus -------------------------------------------------------

def synthesize(count: int, size: int, seed: int, channels: int = 3) -> list[ImageRecord]:
    """Seeded procedural images: radial gradient base, a few soft ellipses,
    and a symmetric eye/mouth arrangement for face-like low-frequency
    structure. Pure function of (count, size, seed, channels)."""
    if count < 1:
        raise DataError(f"count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size]
    ys = ys / (size - 1) * 2.0 - 1.0
    xs = xs / (size - 1) * 2.0 - 1.0

    records = []
    for i in range(count):
        img = np.zeros((size, size, channels))
        cy, cx = rng.uniform(-0.3, 0.3, size=2)
        radius = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
        for ch in range(channels):
            base = rng.uniform(-0.55, 0.55)
            amp = rng.uniform(0.35, 0.8) * rng.choice([-1.0, 1.0])
            img[:, :, ch] = base + amp * (1.0 - radius)

        for _ in range(rng.integers(2, 5)):
            img += _soft_ellipse(ys, xs, rng, channels,
                                 center=rng.uniform(-0.7, 0.7, size=2),
                                 axes=rng.uniform(0.12, 0.45, size=2),
                                 depth=rng.uniform(0.3, 0.8) * rng.choice([-1.0, 1.0]))

        # loose face arrangement: paired dark eyes, one wide mouth
        eye_y = rng.uniform(-0.45, -0.1)
        eye_x = rng.uniform(0.15, 0.4)
        eye_axes = rng.uniform(0.06, 0.14, size=2)
        depth = -rng.uniform(0.4, 0.9)
        for sign in (-1.0, 1.0):
            img += _soft_ellipse(ys, xs, rng, channels, center=(eye_y, sign * eye_x),
                                 axes=eye_axes, depth=depth, chromatic=False)
        img += _soft_ellipse(ys, xs, rng, channels,
                             center=(rng.uniform(0.25, 0.55), rng.uniform(-0.1, 0.1)),
                             axes=(rng.uniform(0.05, 0.1), rng.uniform(0.2, 0.4)),
                             depth=-rng.uniform(0.3, 0.7), chromatic=False)

        img = gaussian_filter(img, sigma=(size / 48.0, size / 48.0, 0))
        img = np.clip(img, -0.95, 0.95)
        records.append(ImageRecord(pixels=img, source_id=f"synthetic:{seed}:{i}"))
    return records


def _soft_ellipse(ys, xs, rng, channels, center, axes, depth, chromatic=True):
    cy, cx = center
    ay, ax = axes
    q = ((ys - cy) / ay) ** 2 + ((xs - cx) / ax) ** 2
    bump = expit((1.0 - q) * 6.0)
    if chromatic:
        tint = rng.uniform(0.6, 1.0, size=channels)
    else:
        tint = np.ones(channels)
    return bump[:, :, None] * depth * tint[None, None, :]


# --- stego file policy -------------------------------------------------------

LOSSLESS_SUFFIXES = (".png",)


def is_lossless_path(path) -> bool:
    return str(path).lower().endswith(LOSSLESS_SUFFIXES)


def write_stego_png(path, image_real: np.ndarray) -> None:
    """Quantize to 8-bit and write PNG. Refuses non-PNG destinations."""
    if not is_lossless_path(path):
        raise DataError(f"stego output must be a .png path, got {path}")
    from .codec import quantize  # local import keeps data importable alone

    v8 = quantize(image_real)
    if v8.shape[2] == 1:
        Image.fromarray(v8[:, :, 0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(v8, mode="RGB").save(path, format="PNG")


def read_stego_image(path) -> np.ndarray:
    """Read a stego PNG back to the real domain; rejects lossy containers."""
    if not is_lossless_path(path):
        raise DataError(f"stego input must be a .png file, got {path}")
    try:
        with Image.open(path) as img:
            if img.format != "PNG":
                raise DataError(f"stego file {path} is {img.format}, not PNG")
            arr = np.asarray(img.convert("RGB" if img.mode != "L" else "L"), dtype=np.uint8)
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"cannot decode stego file {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return to_real(arr)
