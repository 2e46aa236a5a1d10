"""Image buffers and 8/16-bit PNG/JPEG I/O.

Images are carried as float arrays of shape (H, W, 3) with values in [0, 1],
RGB channel order, tagged with the color space they were decoded from.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import DecodeError


@dataclass
class ImageBuffer:
    """H x W x 3 raster in [0, 1] plus a color-space tag."""

    data: np.ndarray
    color_space: str = "srgb"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def size(self) -> tuple[int, int]:
        """(width, height) in pixels."""
        return (self.data.shape[1], self.data.shape[0])


def as_array(img) -> np.ndarray:
    """Accept an ImageBuffer or a bare array and return the float array."""
    if isinstance(img, ImageBuffer):
        return img.data
    return np.asarray(img, dtype=np.float32)


def load_image(path) -> ImageBuffer:
    """Decode an 8/16-bit PNG or JPEG into an RGB float buffer in [0, 1]."""
    path = os.fspath(path)
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DecodeError(f"cannot decode image: {path}")
    if raw.dtype == np.uint16:
        data = raw.astype(np.float32) / 65535.0
    else:
        data = raw.astype(np.float32) / 255.0
    if data.ndim == 2:
        data = np.stack([data] * 3, axis=-1)
    elif data.shape[2] == 4:
        data = data[:, :, :3]
    data = data[:, :, ::-1]  # BGR -> RGB
    return ImageBuffer(np.clip(data, 0.0, 1.0))


def save_image(path, img, bit16: bool = False) -> None:
    """Write an RGB buffer as PNG/JPEG (8-bit by default, 16-bit optional)."""
    data = np.clip(as_array(img), 0.0, 1.0)
    if bit16:
        raw = np.round(data * 65535.0).astype(np.uint16)
    else:
        raw = np.round(data * 255.0).astype(np.uint8)
    raw = raw[:, :, ::-1]  # RGB -> BGR
    if not cv2.imwrite(os.fspath(path), raw):
        raise IOError(f"cannot write image: {path}")


def resize(img, size: tuple[int, int]):
    """Resize to (width, height); area for shrink, bilinear for grow."""
    data = as_array(img)
    w, h = int(size[0]), int(size[1])
    if (data.shape[1], data.shape[0]) == (w, h):
        out = data.copy()
    else:
        interp = cv2.INTER_AREA if w < data.shape[1] else cv2.INTER_LINEAR
        out = cv2.resize(data, (w, h), interpolation=interp)
    if isinstance(img, ImageBuffer):
        return ImageBuffer(out, img.color_space)
    return out
