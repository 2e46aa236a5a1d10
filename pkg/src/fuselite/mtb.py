"""Median threshold bitmaps and XOR-difference misalignment scoring.

MTBs are nearly invariant to exposure change, which makes them useful both
as extra input channels for the alignment network and as a cheap alignment
metric.  The threshold is strict (bit = 1 where gray > median) with the
lower median for even pixel counts; no exclusion zone is applied around the
median, keeping the operator deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch
from .images import as_array

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_grayscale(img) -> np.ndarray:
    """Rec.601 luma of an RGB image in [0, 1]."""
    data = as_array(img)
    if data.ndim != 3 or data.shape[2] != 3:
        raise DimensionMismatch(f"expected (H, W, 3) image, got {data.shape}")
    return data @ LUMA_WEIGHTS


def lower_median(values: np.ndarray) -> float:
    """Median that picks the lower of the two middle elements for even counts."""
    flat = np.asarray(values).reshape(-1)
    k = (flat.size - 1) // 2
    return float(np.partition(flat, k)[k])


def compute_mtb(gray: np.ndarray) -> np.ndarray:
    """Binary map: 1 where the pixel is strictly above the image median."""
    gray = np.asarray(gray)
    med = lower_median(gray)
    return (gray > med).astype(np.uint8)


def xor_difference(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Fraction of disagreeing pixels between two bitmaps, plus the XOR map."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"bitmap shapes differ: {a.shape} vs {b.shape}")
    diff = (a.astype(np.uint8) ^ b.astype(np.uint8)).astype(np.uint8)
    return float(diff.mean()), diff


def image_mtb(img) -> np.ndarray:
    """MTB of a color image (grayscale conversion included)."""
    return compute_mtb(to_grayscale(img))
