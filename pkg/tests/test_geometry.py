import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuselite.errors import DegenerateCorners, DegenerateMatrix
from fuselite.geometry import (
    CornerOffsets,
    HomographyMatrix,
    compose,
    matrix_to_offsets,
    offsets_to_matrix,
    rescale_offsets,
    sample_random_offsets,
    translation_matrix,
    warp_image,
)


def apply_matrix_oracle(m, point):
    # independent homogeneous multiply, no HomographyMatrix involvement
    x, y = point
    w = m[2][0] * x + m[2][1] * y + m[2][2]
    return (
        (m[0][0] * x + m[0][1] * y + m[0][2]) / w,
        (m[1][0] * x + m[1][1] * y + m[1][2]) / w,
    )


def warp_oracle(src, h, out_size, fill=0.0):
    """Scalar per-pixel inverse-mapping warp, explicit loops only."""
    src = np.asarray(src, dtype=np.float64)
    out_w, out_h = out_size
    channels = 1 if src.ndim == 2 else src.shape[2]
    out = np.full((out_h, out_w, channels), fill, dtype=np.float64)
    valid = np.zeros((out_h, out_w), dtype=np.uint8)
    hinv = np.linalg.inv(h.m)
    src_h, src_w = src.shape[:2]
    for y in range(out_h):
        for x in range(out_w):
            sx, sy = apply_matrix_oracle(hinv, (x, y))
            if 0 <= sx <= src_w - 1 and 0 <= sy <= src_h - 1:
                x0, y0 = int(math.floor(sx)), int(math.floor(sy))
                x1, y1 = min(x0 + 1, src_w - 1), min(y0 + 1, src_h - 1)
                fx, fy = sx - x0, sy - y0
                for c in range(channels):
                    plane = src if src.ndim == 2 else src[:, :, c]
                    val = (1 - fy) * ((1 - fx) * plane[y0, x0] + fx * plane[y0, x1]) + fy * (
                        (1 - fx) * plane[y1, x0] + fx * plane[y1, x1]
                    )
                    out[y, x, c] = val
                valid[y, x] = 1
    if src.ndim == 2:
        out = out[:, :, 0]
    return out, valid


def truncated_normal_std(sigma, bound):
    """Closed-form std of N(0, sigma^2) truncated at +/- bound."""
    alpha = bound / sigma
    phi = math.exp(-0.5 * alpha * alpha) / math.sqrt(2 * math.pi)
    mass = math.erf(alpha / math.sqrt(2))
    return sigma * math.sqrt(1.0 - 2.0 * alpha * phi / mass)


def random_offsets(rng, patch=256.0, scale=32.0):
    return CornerOffsets(
        rng.uniform(-scale, scale, 4), rng.uniform(-scale, scale, 4), (patch, patch)
    )


def smooth_image(rng, h, w):
    from scipy.ndimage import gaussian_filter

    img = gaussian_filter(rng.random((h, w, 3)), sigma=(2.0, 2.0, 0.0))
    lo, hi = img.min(), img.max()
    return ((img - lo) / (hi - lo)).astype(np.float64)


class TestOffsetsToMatrix:
    def test_zero_offsets_identity(self):
        h = offsets_to_matrix(CornerOffsets.zero((256, 256)))
        np.testing.assert_allclose(h.m, np.eye(3), atol=1e-12)

    def test_pure_translation(self):
        off = CornerOffsets([10.0] * 4, [0.0] * 4, (256, 256))
        h = offsets_to_matrix(off)
        expected = np.eye(3)
        expected[0, 2] = 10.0
        np.testing.assert_allclose(h.m, expected, atol=1e-9)

    def test_corner_fidelity_random(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            off = random_offsets(rng)
            h = offsets_to_matrix(off)
            for corner, target in zip(off.corners(), off.displaced_corners()):
                mapped = apply_matrix_oracle(h.m, corner)
                assert abs(mapped[0] - target[0]) < 1e-9
                assert abs(mapped[1] - target[1]) < 1e-9

    def test_normalized_bottom_right(self):
        rng = np.random.default_rng(8)
        h = offsets_to_matrix(random_offsets(rng))
        assert h.m[2, 2] == 1.0

    def test_degenerate_corners_raise(self):
        # collapse every corner to a single point
        base = CornerOffsets.zero((256, 256))
        target = np.array([128.0, 128.0])
        delta = target - base.corners()
        with pytest.raises(DegenerateCorners):
            offsets_to_matrix(CornerOffsets(delta[:, 0], delta[:, 1], (256, 256)))


class TestMatrixToOffsets:
    def test_identity(self):
        off = matrix_to_offsets(HomographyMatrix.identity(), (256, 256))
        np.testing.assert_allclose(off.as_vector(), np.zeros(8), atol=1e-12)

    def test_translation(self):
        off = matrix_to_offsets(translation_matrix(5.0, -3.0), (256, 256))
        np.testing.assert_allclose(off.du, [5.0] * 4, atol=1e-12)
        np.testing.assert_allclose(off.dv, [-3.0] * 4, atol=1e-12)

    def test_round_trip_1000(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(1000):
            off = random_offsets(rng)
            back = matrix_to_offsets(offsets_to_matrix(off), off.patch_size)
            worst = max(worst, np.abs(back.as_vector() - off.as_vector()).max())
        assert worst < 1e-9

    def test_point_at_infinity_raises(self):
        h = HomographyMatrix(np.array([[1.0, 0, 0], [0, 1.0, 0], [-1.0 / 256, 0, 1.0]]))
        with pytest.raises(DegenerateMatrix):
            matrix_to_offsets(h, (256, 256))


class TestWarpImage:
    def test_identity_warp_exact(self):
        rng = np.random.default_rng(3)
        img = rng.random((20, 24, 3))
        res = warp_image(img, HomographyMatrix.identity(), (24, 20))
        np.testing.assert_array_equal(res.image, img)
        assert res.validity.all()

    def test_integer_translation(self):
        rng = np.random.default_rng(4)
        img = rng.random((16, 16, 3))
        res = warp_image(img, translation_matrix(3.0, 0.0), (16, 16))
        np.testing.assert_allclose(res.image[:, 3:], img[:, :-3], atol=1e-12)
        assert not res.validity[:, :3].any()
        assert res.validity[:, 3:].all()
        np.testing.assert_array_equal(res.image[:, :3], 0.0)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            img = rng.random((16, 16, 3))
            off = random_offsets(rng, patch=16.0, scale=2.0)
            h = offsets_to_matrix(off)
            res = warp_image(img, h, (16, 16))
            expected, valid = warp_oracle(img, h, (16, 16))
            np.testing.assert_array_equal(res.validity, valid)
            assert np.abs(res.image - expected).max() < 1e-6

    def test_grayscale_input(self):
        rng = np.random.default_rng(6)
        img = rng.random((12, 12))
        res = warp_image(img, translation_matrix(1.0, 1.0), (12, 12))
        assert res.image.shape == (12, 12)
        np.testing.assert_allclose(res.image[1:, 1:], img[:-1, :-1], atol=1e-12)

    def test_warp_composition_psnr(self):
        from fuselite.metrics import psnr

        rng = np.random.default_rng(9)
        img = smooth_image(rng, 64, 64)
        for _ in range(5):
            off = random_offsets(rng, patch=64.0, scale=4.0)
            h = offsets_to_matrix(off)
            fwd = warp_image(img, h, (64, 64))
            back = warp_image(fwd.image, h.inverse(), (64, 64))
            mask = (warp_image(fwd.validity.astype(np.float64), h.inverse(), (64, 64)).image > 0.999) & (
                back.validity > 0
            )
            assert psnr(back.image, img, mask=mask) > 35.0

    def test_degenerate_fill(self):
        res = warp_image(np.ones((8, 8)), translation_matrix(100.0, 0.0), (8, 8), fill=0.25)
        assert not res.validity.any()
        np.testing.assert_array_equal(res.image, 0.25)


class TestRescaleOffsets:
    def test_zero_stays_zero(self):
        off = rescale_offsets(CornerOffsets.zero((256, 256)), (256, 256), (1024, 1024))
        np.testing.assert_array_equal(off.as_vector(), np.zeros(8))

    def test_linear_scaling(self):
        off = CornerOffsets([8.0] * 4, [0.0] * 4, (256, 256))
        out = rescale_offsets(off, (256, 256), (1024, 256))
        np.testing.assert_allclose(out.du, [32.0] * 4)
        np.testing.assert_allclose(out.dv, [0.0] * 4)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        off = random_offsets(rng)
        fwd = rescale_offsets(off, (256, 256), (1200, 800))
        back = rescale_offsets(fwd, (1200, 800), (256, 256))
        assert np.abs(back.as_vector() - off.as_vector()).max() < 1e-12

    def test_matches_matrix_conjugation(self):
        # rescaled offsets describe S^-1 H S exactly
        rng = np.random.default_rng(13)
        off = random_offsets(rng)
        h = offsets_to_matrix(off)
        scaled = rescale_offsets(off, (256, 256), (1200, 800))
        hs = offsets_to_matrix(scaled)
        s = np.diag([256.0 / 1200.0, 256.0 / 800.0, 1.0])
        expected = np.linalg.inv(s) @ h.m @ s
        expected /= expected[2, 2]
        np.testing.assert_allclose(hs.m, expected, atol=1e-9)


class TestSampleRandomOffsets:
    def test_bounds_100k(self):
        rng = np.random.default_rng(21)
        vals = np.concatenate(
            [sample_random_offsets(rng, (256, 256), 32.0).as_vector() for _ in range(12500)]
        )
        assert vals.size == 100000
        assert np.abs(vals).max() <= 32.0

    def test_sigma_to_zero_limit(self):
        rng = np.random.default_rng(22)
        off = sample_random_offsets(rng, (256, 256), 1e-9)
        assert np.abs(off.as_vector()).max() <= 1e-9

    def test_empirical_std_matches_closed_form(self):
        rng = np.random.default_rng(23)
        vals = np.concatenate(
            [sample_random_offsets(rng, (256, 256), 32.0).as_vector() for _ in range(12500)]
        )
        expected = truncated_normal_std(16.0, 32.0)
        assert abs(vals.std() - expected) / expected < 0.05

    def test_deterministic_per_seed(self):
        a = sample_random_offsets(np.random.default_rng(99), (256, 256), 32.0)
        b = sample_random_offsets(np.random.default_rng(99), (256, 256), 32.0)
        np.testing.assert_array_equal(a.as_vector(), b.as_vector())

    def test_rejects_nonpositive_bound(self):
        with pytest.raises(ValueError):
            sample_random_offsets(np.random.default_rng(0), (256, 256), 0.0)


class TestSerialization:
    def test_matrix_flat_round_trip(self):
        rng = np.random.default_rng(31)
        h = offsets_to_matrix(random_offsets(rng))
        again = HomographyMatrix.from_flat(h.to_flat())
        np.testing.assert_allclose(again.m, h.m)

    def test_offsets_vector_round_trip(self):
        rng = np.random.default_rng(32)
        off = random_offsets(rng)
        again = CornerOffsets.from_vector(off.as_vector(), off.patch_size)
        np.testing.assert_array_equal(again.as_vector(), off.as_vector())


def test_compose_order():
    a = translation_matrix(1.0, 0.0)
    b = translation_matrix(0.0, 2.0)
    c = compose(a, b)
    np.testing.assert_allclose(c.apply(np.array([[0.0, 0.0]])), [[1.0, 2.0]])
