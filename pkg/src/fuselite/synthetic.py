"""Procedural exposure-bracket scenes for desk-scale experiments.

Each scene is rendered from a random pseudo-radiance field (smooth blobs,
textured noise, and hard-edged shapes so alignment has structure to latch
onto), then exposed at several gains and tone-mapped into [0, 1].  The
middle exposure doubles as the scene reference.  Output follows the dataset
layout expected by the loader: <root>/<scene>/{1..N}.png plus
<root>/reference/<scene>.png.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .images import ImageBuffer, save_image

GAMMA = 2.2


def _radiance_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    base = gaussian_filter(rng.random((height, width, 3)), sigma=(8.0, 8.0, 0.0))
    texture = gaussian_filter(rng.random((height, width, 3)), sigma=(1.0, 1.0, 0.0))
    field = 0.6 * base + 0.4 * texture

    # hard-edged rectangles give the aligner corners to find
    for _ in range(rng.integers(4, 9)):
        rw = int(rng.integers(width // 10, width // 3))
        rh = int(rng.integers(height // 10, height // 3))
        x = int(rng.integers(0, width - rw))
        y = int(rng.integers(0, height - rh))
        color = rng.uniform(0.05, 1.0, size=3)
        field[y : y + rh, x : x + rw] = 0.3 * field[y : y + rh, x : x + rw] + 0.7 * color

    ramp = np.linspace(0.6, 1.4, width)[None, :, None]
    field = field * ramp
    lo, hi = field.min(), field.max()
    return 0.03 + (field - lo) / (hi - lo) * 1.8


def tone_map(radiance: np.ndarray, gain: float) -> np.ndarray:
    return np.clip(radiance * gain, 0.0, 1.0) ** (1.0 / GAMMA)


def render_scene(
    rng: np.random.Generator,
    size: tuple[int, int] = (160, 120),
    n_exposures: int = 2,
) -> tuple[list[ImageBuffer], ImageBuffer]:
    """Render one scene; returns (exposures darkest-first, reference)."""
    width, height = size
    radiance = _radiance_field(rng, height, width)
    gains = np.geomspace(0.35, 2.8, n_exposures)
    exposures = [ImageBuffer(tone_map(radiance, g).astype(np.float32)) for g in gains]
    reference = ImageBuffer(tone_map(radiance, 1.0).astype(np.float32))
    return exposures, reference


def write_toy_dataset(
    root,
    n_scenes: int,
    size: tuple[int, int] = (160, 120),
    n_exposures: int = 2,
    seed: int = 0,
) -> Path:
    """Write n_scenes synthetic exposure stacks under root; returns root."""
    root = Path(root)
    (root / "reference").mkdir(parents=True, exist_ok=True)
    for i in range(n_scenes):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        scene_id = f"scene{i:03d}"
        scene_dir = root / scene_id
        scene_dir.mkdir(exist_ok=True)
        exposures, reference = render_scene(rng, size=size, n_exposures=n_exposures)
        for k, img in enumerate(exposures, start=1):
            save_image(scene_dir / f"{k}.png", img)
        save_image(root / "reference" / f"{scene_id}.png", reference)
    return root
