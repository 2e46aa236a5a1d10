"""Image-quality and alignment metrics used by evaluation commands."""

from __future__ import annotations

import numpy as np
from skimage.metrics import structural_similarity

from .images import as_array
from .mtb import image_mtb, xor_difference

PSNR_CAP_DB = 99.0


def psnr(a, b, mask=None, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 99 for identical inputs."""
    a = as_array(a).astype(np.float64)
    b = as_array(b).astype(np.float64)
    diff = (a - b) ** 2
    if mask is not None:
        mask = np.asarray(mask).astype(bool)
        if diff.ndim == 3 and mask.ndim == 2:
            mask = mask[:, :, None] & np.ones(diff.shape, dtype=bool)
        diff = diff[mask]
    mse = float(diff.mean()) if diff.size else 0.0
    if mse <= 0.0:
        return PSNR_CAP_DB
    value = 10.0 * np.log10(peak * peak / mse)
    return float(min(value, PSNR_CAP_DB))


def ssim(a, b) -> float:
    """Structural similarity between two RGB images in [0, 1]."""
    a = as_array(a).astype(np.float64)
    b = as_array(b).astype(np.float64)
    side = min(a.shape[0], a.shape[1])
    win = min(7, side if side % 2 == 1 else side - 1)
    return float(structural_similarity(a, b, channel_axis=2, data_range=1.0, win_size=win))


def mtb_xor_ratio(img_a, img_b) -> float:
    """XOR-difference ratio between the MTBs of two color images."""
    ratio, _ = xor_difference(image_mtb(img_a), image_mtb(img_b))
    return ratio


def mtb_translation_search(gray_ref: np.ndarray, gray_mov: np.ndarray, max_shift: int = 8):
    """Exhaustive integer-translation alignment on median threshold bitmaps.

    Comparison baseline only; returns ((dx, dy), xor_ratio) for the shift of
    the moving image that minimizes the XOR ratio against the reference.
    Overlap-free shifts are skipped.
    """
    from .mtb import compute_mtb

    ref_bits = compute_mtb(gray_ref)
    mov_bits = compute_mtb(gray_mov)
    h, w = ref_bits.shape
    best = (0, 0)
    best_ratio = xor_difference(ref_bits, mov_bits)[0]
    for dy in range(-max_shift, max_shift + 1):
        for dx in range(-max_shift, max_shift + 1):
            if dx == 0 and dy == 0:
                continue
            ys = slice(max(0, dy), min(h, h + dy))
            xs = slice(max(0, dx), min(w, w + dx))
            ys_m = slice(max(0, -dy), min(h, h - dy))
            xs_m = slice(max(0, -dx), min(w, w - dx))
            a = ref_bits[ys, xs]
            b = mov_bits[ys_m, xs_m]
            if a.size == 0:
                continue
            ratio = float((a ^ b).mean())
            if ratio < best_ratio:
                best_ratio = ratio
                best = (dx, dy)
    return best, best_ratio
