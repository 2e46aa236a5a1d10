"""Training objectives: perceptual feature matching, least-squares
adversarial terms, the combined generator loss, and the corner-offset
regression loss.

All reductions are means (per element, per batch) rather than dataset sums,
which rescales gradients by a constant but keeps the default weights
meaningful across batch sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .errors import PatchSizeMismatch, ShapeMismatch
from .geometry import CornerOffsets

# Per-tap weights for (input, block1..block5); the input tap carries unit
# weight, the conv taps 1/2.6, 1/4.8, 1/3.7, 1/5.6, 1/0.15.
DEFAULT_TAP_WEIGHTS = (1.0, 1 / 2.6, 1 / 4.8, 1 / 3.7, 1 / 5.6, 1 / 0.15)


@dataclass
class LossWeights:
    """Balancing terms: per-tap perceptual weights plus the w1/w2 mix."""

    lambda_taps: tuple = DEFAULT_TAP_WEIGHTS
    w1: float = 1.0
    w2: float = 0.01

    def __post_init__(self):
        self.lambda_taps = tuple(float(v) for v in self.lambda_taps)
        if len(self.lambda_taps) != 6:
            raise ValueError("lambda_taps must hold 6 weights")
        if any(v < 0 for v in self.lambda_taps) or self.w1 < 0 or self.w2 < 0:
            raise ValueError("loss weights must be non-negative")


def perceptual_loss(
    fused: torch.Tensor,
    reference: torch.Tensor,
    phi,
    weights: LossWeights | None = None,
    reference_taps: list[torch.Tensor] | None = None,
) -> torch.Tensor:
    """Weighted mean-L1 distance over the feature taps of the two images.

    reference_taps short-circuits the extractor pass for a fixed target
    (useful when overfitting a single pair).
    """
    weights = weights or LossWeights()
    if fused.shape != reference.shape and reference_taps is None:
        raise ShapeMismatch(f"image shapes differ: {tuple(fused.shape)} vs {tuple(reference.shape)}")
    fused_taps = phi(fused)
    if reference_taps is None:
        reference_taps = phi(reference)
    total = fused.new_zeros(())
    for lam, a, b in zip(weights.lambda_taps, fused_taps, reference_taps):
        if lam == 0.0:
            continue
        total = total + lam * (a - b).abs().mean()
    return total


def discriminator_loss(score_real: torch.Tensor, score_fake: torch.Tensor) -> torch.Tensor:
    """Least-squares critic objective: fake scores to 0, real scores to 1."""
    if score_real.shape != score_fake.shape:
        raise ShapeMismatch(
            f"score map shapes differ: {tuple(score_real.shape)} vs {tuple(score_fake.shape)}"
        )
    return 0.5 * (score_fake.pow(2).mean() + (score_real - 1.0).pow(2).mean())


def adversarial_loss(score_fake: torch.Tensor) -> torch.Tensor:
    """Least-squares generator objective: fake scores pushed to 1."""
    return (score_fake - 1.0).pow(2).mean()


def generator_loss(l_feat, l_adv, weights: LossWeights | None = None):
    """Combined generator objective w1 * L_feat + w2 * L_adv."""
    weights = weights or LossWeights()
    return weights.w1 * l_feat + weights.w2 * l_adv


def offset_mse(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean squared error over the 8 offset components (batched tensors)."""
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"offset shapes differ: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    return (pred - gt).pow(2).mean()


def homography_loss(pred: CornerOffsets, gt: CornerOffsets) -> float:
    """MSE between two corner-offset sets expressed for the same patch."""
    if pred.patch_size != gt.patch_size:
        raise PatchSizeMismatch(f"patch sizes differ: {pred.patch_size} vs {gt.patch_size}")
    diff = pred.as_vector() - gt.as_vector()
    return float((diff**2).mean())
