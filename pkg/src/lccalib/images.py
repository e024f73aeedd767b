"""Grayscale image container and PNG I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(eq=False)
class GrayImage:
    """Row-major grayscale image with intensities in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise ValueError("pixels must be a 2-D array (height, width)")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def load_gray(path) -> GrayImage:
    """Load a PNG (or any PIL-readable image) as grayscale in [0, 1].

    16-bit grayscale images keep their full precision; everything else is
    converted to 8-bit luminance first.
    """
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64)
            scale = 65535.0
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64)
            scale = 255.0
    return GrayImage(arr / scale)


def save_gray(image: GrayImage, path, *, bits: int = 16) -> None:
    """Write a grayscale PNG (16-bit by default to preserve precision)."""
    px = np.clip(image.pixels, 0.0, 1.0)
    if bits == 16:
        out = Image.fromarray(np.round(px * 65535.0).astype(np.uint16))
    elif bits == 8:
        out = Image.fromarray(np.round(px * 255.0).astype(np.uint8), mode="L")
    else:
        raise ValueError("bits must be 8 or 16")
    out.save(Path(path), format="PNG")


def save_rgb(pixels: np.ndarray, path) -> None:
    """Write an (H, W, 3) uint8 array as a PNG."""
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) uint8 array")
    Image.fromarray(arr, mode="RGB").save(Path(path), format="PNG")
