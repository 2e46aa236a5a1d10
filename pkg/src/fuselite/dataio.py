"""Exposure-stack ingestion, luminance-sorted pairing, and synthetic
training-sample generation with known ground-truth homographies.

On-disk layout (one scene per directory, one shared reference pool):

    <root>/<scene_id>/{1..N}.png|jpg
    <root>/reference/<scene_id>.png|jpg

The training manifest is JSON lines, one record per under/over pair.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ImageTooSmall, MissingReference, TooFewImages
from .geometry import (
    CornerOffsets,
    compose,
    offsets_to_matrix,
    sample_random_offsets,
    translation_matrix,
    warp_image,
)
from .images import ImageBuffer, as_array, load_image, resize
from .mtb import to_grayscale

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")
DEFAULT_IMAGE_SIZE = (1200, 800)


@dataclass
class ExposureStack:
    """Scene images sorted ascending by mean luminance, plus the reference."""

    images: list[ImageBuffer]
    reference: ImageBuffer
    scene_id: str


@dataclass
class TrainingSample:
    """Aligned under/reference crops, a perturbed over crop, and the truth.

    over_patch_warped is the over crop pushed through the inverse of the
    ground-truth homography, so warping it by offsets_to_matrix(gt_offsets)
    re-aligns it with under_patch.
    """

    under_patch: np.ndarray
    over_patch_warped: np.ndarray
    gt_offsets: CornerOffsets
    reference_patch: np.ndarray
    origin: tuple[int, int] = (0, 0)  # crop origin (x0, y0) in the source frame


@dataclass
class PairRecord:
    """One manifest line: an under/over pair and its scene reference."""

    scene_id: str
    under: str
    over: str
    reference: str
    under_luminance: float
    over_luminance: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "PairRecord":
        return cls(**json.loads(line))


def mean_luminance(img) -> float:
    """Mean Rec.601 luma over all pixels."""
    return float(to_grayscale(as_array(img)).mean())


def _scene_images(scene_dir: Path) -> list[Path]:
    files = [p for p in sorted(scene_dir.iterdir()) if p.suffix.lower() in IMAGE_EXTENSIONS]
    # numeric stems sort numerically (1.png, 2.png, ..., 10.png)
    if files and all(p.stem.isdigit() for p in files):
        files.sort(key=lambda p: int(p.stem))
    return files


def find_reference(scene_dir: Path) -> Path:
    scene_dir = Path(scene_dir)
    ref_dir = scene_dir.parent / "reference"
    for ext in IMAGE_EXTENSIONS:
        cand = ref_dir / (scene_dir.name + ext)
        if cand.exists():
            return cand
    raise MissingReference(f"no reference image for scene {scene_dir.name!r} in {ref_dir}")


def load_stack(scene_dir, size: tuple[int, int] | None = DEFAULT_IMAGE_SIZE) -> ExposureStack:
    """Load a scene directory into a luminance-sorted exposure stack.

    Every image (and the reference) is resized to `size` = (width, height);
    pass None to keep native resolution.
    """
    scene_dir = Path(scene_dir)
    paths = _scene_images(scene_dir)
    if len(paths) < 2:
        raise TooFewImages(f"scene {scene_dir} holds {len(paths)} images; need at least 2")
    ref_path = find_reference(scene_dir)

    def prepare(path):
        img = load_image(path)
        return resize(img, size) if size is not None else img

    images = [prepare(p) for p in paths]
    reference = prepare(ref_path)
    images.sort(key=mean_luminance)
    return ExposureStack(images=images, reference=reference, scene_id=scene_dir.name)


def enumerate_pairs(n: int) -> list[tuple[int, int]]:
    """Under/over index pairs (0-based): i-th darkest with i-th brightest.

    For a stack of N luminance-sorted images this yields floor(N/2) pairs;
    the middle image of an odd stack is left unused.
    """
    if n < 2:
        raise TooFewImages(f"need at least 2 images, got {n}")
    return [(i, n - 1 - i) for i in range(n // 2)]


def stack_pairs(stack: ExposureStack) -> list[tuple[int, int]]:
    return enumerate_pairs(len(stack.images))


def sample_rng(base_seed: int, sample_index: int) -> np.random.Generator:
    """Independent per-sample stream so concurrent generation stays ordered."""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(sample_index)]))


def make_training_sample(
    under,
    over,
    reference,
    rng: np.random.Generator,
    max_disturbance: float,
    patch_size: int = 256,
) -> TrainingSample:
    """Crop an aligned triple and perturb the over crop by a known homography.

    The crop origin is uniform over positions whose displaced corners stay
    inside the image; the perturbation is applied to the over image only, so
    the under crop stays the anchor frame.
    """
    under = as_array(under)
    over = as_array(over)
    reference = as_array(reference)
    h_img, w_img = under.shape[:2]
    margin = int(math.ceil(max_disturbance))
    if w_img < patch_size + 2 * margin or h_img < patch_size + 2 * margin:
        raise ImageTooSmall(
            f"image {w_img}x{h_img} cannot host a {patch_size} patch with margin {margin}"
        )

    x0 = int(rng.integers(margin, w_img - patch_size - margin + 1))
    y0 = int(rng.integers(margin, h_img - patch_size - margin + 1))

    if max_disturbance > 0:
        gt_offsets = sample_random_offsets(rng, (patch_size, patch_size), max_disturbance)
    else:
        gt_offsets = CornerOffsets.zero((patch_size, patch_size))

    under_patch = under[y0 : y0 + patch_size, x0 : x0 + patch_size].astype(np.float32).copy()
    reference_patch = reference[y0 : y0 + patch_size, x0 : x0 + patch_size].astype(np.float32).copy()

    # over(T(x0,y0) . H_gt . q) for patch coords q: a single inverse-map warp
    h_gt = offsets_to_matrix(gt_offsets)
    to_full = compose(translation_matrix(x0, y0), h_gt)
    warped = warp_image(over, to_full.inverse(), (patch_size, patch_size))
    return TrainingSample(
        under_patch=under_patch,
        over_patch_warped=warped.image.astype(np.float32),
        gt_offsets=gt_offsets,
        reference_patch=reference_patch,
        origin=(x0, y0),
    )


def scan_scene_dirs(root) -> list[Path]:
    root = Path(root)
    return sorted(
        p for p in root.iterdir() if p.is_dir() and p.name != "reference" and _scene_images(p)
    )


def build_manifest(root, out_path, size: tuple[int, int] | None = DEFAULT_IMAGE_SIZE) -> list[PairRecord]:
    """Scan a dataset root, pair each stack, and write manifest.jsonl."""
    records = []
    for scene_dir in scan_scene_dirs(root):
        paths = _scene_images(scene_dir)
        if len(paths) < 2:
            raise TooFewImages(f"scene {scene_dir} holds {len(paths)} images; need at least 2")
        ref_path = find_reference(scene_dir)
        by_lum = []
        for p in paths:
            img = load_image(p)
            if size is not None:
                img = resize(img, size)
            by_lum.append((mean_luminance(img), p))
        by_lum.sort(key=lambda item: item[0])
        for under_idx, over_idx in enumerate_pairs(len(by_lum)):
            records.append(
                PairRecord(
                    scene_id=scene_dir.name,
                    under=str(by_lum[under_idx][1]),
                    over=str(by_lum[over_idx][1]),
                    reference=str(ref_path),
                    under_luminance=by_lum[under_idx][0],
                    over_luminance=by_lum[over_idx][0],
                )
            )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    return records


def read_manifest(path) -> list[PairRecord]:
    with open(path) as fh:
        return [PairRecord.from_json(line) for line in fh if line.strip()]
