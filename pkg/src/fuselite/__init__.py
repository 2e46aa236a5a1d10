"""Two-exposure image fusion toolkit.

Aligns an overexposed image to an underexposed one with a learned 4-point
homography, then fuses the pair with an attention-gated U-Net generator
trained against perceptual and least-squares adversarial objectives.
"""

__version__ = "0.1.0"
