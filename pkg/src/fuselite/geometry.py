"""Homography geometry: 4-point corner-offset parameterization, exact
conversion to/from the 3x3 matrix form, projective warping, and random
perturbation sampling.

Conventions used throughout:

* A patch of size (W, H) has its corner points at (0, 0), (W, 0), (W, H),
  (0, H), ordered top-left, top-right, bottom-right, bottom-left.  Corner
  offsets (du_i, dv_i) displace those points in pixels.
* Pixel (row i, col j) of an image samples the continuous point (x=j, y=i).
* A matrix H maps source coordinates to destination coordinates; warping an
  image "by H" produces, at each destination pixel p, the bilinear sample of
  the source at H^-1(p).  Under the alignment convention of this toolkit the
  matrix predicted for a pair warps the overexposed image onto the
  underexposed image's frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCorners, DegenerateMatrix

# Condition-number ceiling for the 8x8 corner-correspondence system.
MAX_CONDITION = 1e12
# Homogeneous scale below which a mapped point counts as at infinity.
MIN_HOMOGENEOUS_W = 1e-12


@dataclass
class CornerOffsets:
    """Pixel displacements of the four patch corners (TL, TR, BR, BL)."""

    du: np.ndarray
    dv: np.ndarray
    patch_size: tuple[int, int]  # (width, height)

    def __post_init__(self):
        self.du = np.asarray(self.du, dtype=np.float64).reshape(4)
        self.dv = np.asarray(self.dv, dtype=np.float64).reshape(4)
        self.patch_size = (float(self.patch_size[0]), float(self.patch_size[1]))
        if not (np.all(np.isfinite(self.du)) and np.all(np.isfinite(self.dv))):
            raise ValueError("corner offsets must be finite")

    @classmethod
    def zero(cls, patch_size) -> "CornerOffsets":
        return cls(np.zeros(4), np.zeros(4), patch_size)

    @classmethod
    def from_vector(cls, vec, patch_size) -> "CornerOffsets":
        """Build from 8 reals ordered (du1, dv1, ..., du4, dv4)."""
        v = np.asarray(vec, dtype=np.float64).reshape(8)
        return cls(v[0::2], v[1::2], patch_size)

    def as_vector(self) -> np.ndarray:
        """Interleaved 8-vector (du1, dv1, ..., du4, dv4)."""
        out = np.empty(8, dtype=np.float64)
        out[0::2] = self.du
        out[1::2] = self.dv
        return out

    def corners(self) -> np.ndarray:
        """The four undisplaced corner points, shape (4, 2)."""
        w, h = self.patch_size
        return np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])

    def displaced_corners(self) -> np.ndarray:
        return self.corners() + np.stack([self.du, self.dv], axis=1)


@dataclass
class HomographyMatrix:
    """3x3 projective map, normalized so m[2, 2] == 1."""

    m: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.float64).reshape(3, 3)
        if abs(self.m[2, 2]) < MIN_HOMOGENEOUS_W:
            raise DegenerateMatrix("bottom-right element is (near) zero")
        self.m = self.m / self.m[2, 2]
        if abs(np.linalg.det(self.m)) < MIN_HOMOGENEOUS_W:
            raise DegenerateMatrix("matrix is singular")

    @classmethod
    def identity(cls) -> "HomographyMatrix":
        return cls(np.eye(3))

    def inverse(self) -> "HomographyMatrix":
        return HomographyMatrix(np.linalg.inv(self.m))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 2) points; raises DegenerateMatrix at points at infinity."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        hom = np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)
        mapped = hom @ self.m.T
        w = mapped[:, 2]
        if np.any(np.abs(w) < MIN_HOMOGENEOUS_W):
            raise DegenerateMatrix("point maps to infinity")
        return mapped[:, :2] / w[:, None]

    def to_flat(self) -> list[float]:
        """Row-major 9-number serialization."""
        return [float(v) for v in self.m.reshape(9)]

    @classmethod
    def from_flat(cls, values) -> "HomographyMatrix":
        return cls(np.asarray(values, dtype=np.float64).reshape(3, 3))


@dataclass
class WarpResult:
    """Warped raster plus a mask of pixels whose source sample was in bounds."""

    image: np.ndarray
    validity: np.ndarray


def _norm_transform(patch_size) -> np.ndarray:
    """Similarity mapping [0, W] x [0, H] onto [-1, 1]^2 for conditioning."""
    w, h = float(patch_size[0]), float(patch_size[1])
    return np.array([[2.0 / w, 0.0, -1.0], [0.0, 2.0 / h, -1.0], [0.0, 0.0, 1.0]])


def offsets_to_matrix(offsets: CornerOffsets) -> HomographyMatrix:
    """Solve for the homography that moves each patch corner by its offset.

    Builds the direct-linear-transform system from the four correspondences
    with coordinates normalized to [-1, 1] for conditioning, then
    denormalizes.  Raises DegenerateCorners when the displaced corners fall
    into a degenerate configuration.
    """
    n = _norm_transform(offsets.patch_size)
    src = offsets.corners()
    dst = offsets.displaced_corners()
    src_n = src @ n[:2, :2].T + n[:2, 2]
    dst_n = dst @ n[:2, :2].T + n[:2, 2]

    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        x, y = src_n[i]
        xp, yp = dst_n[i]
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -xp * x, -xp * y]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -yp * x, -yp * y]
        b[2 * i] = xp
        b[2 * i + 1] = yp

    if np.linalg.cond(a) > MAX_CONDITION:
        raise DegenerateCorners("displaced corners are in degenerate position")
    h = np.linalg.solve(a, b)
    hn = np.append(h, 1.0).reshape(3, 3)
    m = np.linalg.inv(n) @ hn @ n
    try:
        return HomographyMatrix(m)
    except DegenerateMatrix as exc:
        raise DegenerateCorners(str(exc)) from exc


def matrix_to_offsets(h: HomographyMatrix, patch_size) -> CornerOffsets:
    """Corner offsets of the patch under h; exact inverse of offsets_to_matrix."""
    base = CornerOffsets.zero(patch_size)
    corners = base.corners()
    mapped = h.apply(corners)
    delta = mapped - corners
    return CornerOffsets(delta[:, 0], delta[:, 1], patch_size)


def rescale_offsets(offsets: CornerOffsets, from_size, to_size) -> CornerOffsets:
    """Re-express corner offsets for a different patch resolution.

    Corner displacements scale linearly with the axis ratios; this is exact
    for the corner points, so the rescaled offsets describe the conjugated
    homography at the new resolution.
    """
    sx = float(to_size[0]) / float(from_size[0])
    sy = float(to_size[1]) / float(from_size[1])
    return CornerOffsets(offsets.du * sx, offsets.dv * sy, to_size)


def sample_random_offsets(rng: np.random.Generator, patch_size, max_disturbance: float) -> CornerOffsets:
    """Draw the 8 offset components from a truncated normal.

    Zero mean, sigma = max_disturbance / 2, components rejected outside
    +/- max_disturbance (so ~95% of the untruncated mass is kept).
    Deterministic for a given generator state.
    """
    if max_disturbance <= 0:
        raise ValueError("max_disturbance must be positive")
    sigma = max_disturbance / 2.0
    vals = rng.normal(0.0, sigma, size=8)
    while True:
        bad = np.abs(vals) > max_disturbance
        if not bad.any():
            break
        vals[bad] = rng.normal(0.0, sigma, size=int(bad.sum()))
    return CornerOffsets(vals[0::2], vals[1::2], patch_size)


def warp_image(src: np.ndarray, h: HomographyMatrix, out_size, fill: float = 0.0) -> WarpResult:
    """Warp src by h with inverse mapping and bilinear interpolation.

    Output pixel (x, y) takes the bilinear sample of src at h^-1(x, y);
    samples outside the source support get `fill` and validity 0.
    src may be (H, W) or (H, W, C); out_size is (width, height).
    """
    src = np.asarray(src, dtype=np.float64)
    out_w, out_h = int(out_size[0]), int(out_size[1])
    if out_w <= 0 or out_h <= 0:
        raise ValueError("out_size must be positive")
    hinv = h.inverse().m

    xs, ys = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    denom = hinv[2, 0] * xs + hinv[2, 1] * ys + hinv[2, 2]
    tiny = np.abs(denom) < MIN_HOMOGENEOUS_W
    denom = np.where(tiny, np.inf, denom)
    sx = (hinv[0, 0] * xs + hinv[0, 1] * ys + hinv[0, 2]) / denom
    sy = (hinv[1, 0] * xs + hinv[1, 1] * ys + hinv[1, 2]) / denom

    src_h, src_w = src.shape[:2]
    valid = (sx >= 0) & (sx <= src_w - 1) & (sy >= 0) & (sy <= src_h - 1) & ~tiny

    x0 = np.clip(np.floor(sx), 0, src_w - 1).astype(np.int64)
    y0 = np.clip(np.floor(sy), 0, src_h - 1).astype(np.int64)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)
    fx = np.clip(sx, 0, src_w - 1) - x0
    fy = np.clip(sy, 0, src_h - 1) - y0

    flat = src.reshape(src_h * src_w, -1)
    idx00 = y0 * src_w + x0
    idx01 = y0 * src_w + x1
    idx10 = y1 * src_w + x0
    idx11 = y1 * src_w + x1
    wx0, wx1 = (1.0 - fx)[..., None], fx[..., None]
    wy0, wy1 = (1.0 - fy)[..., None], fy[..., None]
    out = (
        wy0 * (wx0 * flat[idx00] + wx1 * flat[idx01])
        + wy1 * (wx0 * flat[idx10] + wx1 * flat[idx11])
    )
    out = np.where(valid[..., None], out, fill)
    if src.ndim == 2:
        out = out[..., 0]
    else:
        out = out.reshape(out_h, out_w, src.shape[2])
    return WarpResult(out.astype(np.float64), valid.astype(np.uint8))


def translation_matrix(tx: float, ty: float) -> HomographyMatrix:
    return HomographyMatrix(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))


def compose(a: HomographyMatrix, b: HomographyMatrix) -> HomographyMatrix:
    """The map applying b first, then a."""
    return HomographyMatrix(a.m @ b.m)
